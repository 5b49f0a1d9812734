//! Narrow-passage experiments for SCBF-constrained MPPI: closed-loop
//! trials, benchmark tables, sample-size reports and CSV/JSON export.

pub mod benchmark;
pub mod config;
pub mod export;
pub mod samplesize;
pub mod trial;
pub mod validate;
