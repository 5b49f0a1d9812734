use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("high-order lift unsupported: {0}")]
    UnsupportedOrder(&'static str),
    #[error("assumption violated: estimated E[w] = {e1_hat} does not exceed eps1 = {eps1}")]
    AssumptionViolated { e1_hat: f64, eps1: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { context, expected, actual })
    }
}
