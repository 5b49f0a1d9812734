use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use scbf_mppi::benchmark::{parse_grid, run_benchmark, summarize, Cell};
use scbf_mppi::config::ExperimentConfig;
use scbf_mppi::export::{export_results, Summary, TrialSummary};
use scbf_mppi::samplesize::run_samplesize;
use scbf_mppi::trial::{collision_rate, run_trial};
use scbf_mppi::validate::run_all;

#[derive(Parser)]
#[command(name = "scbf-mppi", version, about = "Narrow-passage experiments for SCBF-constrained MPPI")]
struct Cli {
    /// Print the default configuration as JSON and exit.
    #[arg(long)]
    print_default_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run closed-loop trials with the configured algorithm and sample count.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides controller.seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-step controller diagnostics as JSON lines.
        #[arg(long)]
        verbose: bool,
    },
    /// Collision rate and time-to-finish over a grid of algorithm:K cells.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "plain:200,plain:500,scbf:200,scbf:500")]
        grid: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// N1/N2 sample-size bounds from the batch at a given control step.
    Samplesize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        step: Option<usize>,
        #[arg(long)]
        eps1: Option<f64>,
        #[arg(long)]
        eps2: Option<f64>,
        #[arg(long)]
        rho1: Option<f64>,
        #[arg(long)]
        rho2: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in property checks.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.print_default_config {
        println!("{}", ExperimentConfig::default().to_json_pretty());
        return Ok(());
    }
    match cli.command {
        None => bail!("no command given; see --help"),
        Some(Command::Run { config, seed, out, verbose }) => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.controller.seed = s;
            }
            let cell = Cell { mode: cfg.controller.mode, samples: cfg.controller.samples };
            let records = (0..cfg.controller.trials)
                .map(|t| run_trial(&cfg, cell.mode, cell.samples, t))
                .collect::<Result<Vec<_>>>()?;
            for r in &records {
                let ttf = r.ttf.map_or("-".to_string(), |t| t.to_string());
                println!("trial {:>3}  states {:>4}  collisions {:>3}  rate {:.4}  ttf {ttf}", r.trial, r.states.len(), r.collisions, collision_rate(r));
            }
            let mut summary = Summary::new("run", &cfg);
            summary.table.push(summarize(cell, &records));
            summary.trials = records.iter().map(TrialSummary::of).collect();
            if let Some(dir) = out {
                export_results(&dir, &[("trajectories".to_string(), &records[..])], &summary)?;
                if verbose {
                    let path = dir.join("diagnostics.jsonl");
                    let mut f = std::io::BufWriter::new(
                        std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
                    );
                    for r in &records {
                        for (k, d) in r.diagnostics.iter().enumerate() {
                            let line = serde_json::json!({
                                "trial": r.trial,
                                "step": k,
                                "baseline": d.baseline,
                                "weight_entropy": d.weight_entropy,
                                "effective_sample_size": d.effective_sample_size,
                                "shaped_samples": d.shaped_samples,
                                "flagged_samples": d.flagged_samples,
                                "var_du": d.var_du.as_slice(),
                            });
                            writeln!(f, "{line}")?;
                        }
                    }
                }
                println!("wrote {}", dir.display());
            }
        }
        Some(Command::Benchmark { config, grid, trials, out }) => {
            let cfg = ExperimentConfig::load(&config)?;
            let cells = parse_grid(&grid)?;
            let trials = trials.unwrap_or(cfg.controller.trials);
            let bench = run_benchmark(&cfg, &cells, trials)?;
            println!("{:<10} {:>6} {:>7} {:>14} {:>10} {:>9} {:>5}", "algorithm", "K", "trials", "collision rate", "mean TTF", "finished", "DNF");
            for row in &bench.rows {
                let ttf = row.mean_ttf.map_or("-".to_string(), |t| format!("{t:.1}"));
                println!(
                    "{:<10} {:>6} {:>7} {:>14.4} {:>10} {:>9} {:>5}",
                    row.algorithm, row.samples, row.trials, row.mean_collision_rate, ttf, row.finished, row.did_not_finish
                );
            }
            if let Some(dir) = out {
                let mut summary = Summary::new("benchmark", &cfg);
                summary.table = bench.rows.clone();
                summary.trials = bench.records.iter().flat_map(|(_, rs)| rs.iter().map(TrialSummary::of)).collect();
                let groups: Vec<(String, &[_])> = bench.records.iter().map(|(c, rs)| (c.label(), &rs[..])).collect();
                export_results(&dir, &groups, &summary)?;
                println!("wrote {}", dir.display());
            }
        }
        Some(Command::Samplesize { config, step, eps1, eps2, rho1, rho2, out }) => {
            let mut cfg = ExperimentConfig::load(&config)?;
            let k = &mut cfg.complexity;
            k.step = step.unwrap_or(k.step);
            k.eps1 = eps1.unwrap_or(k.eps1);
            k.eps2 = eps2.unwrap_or(k.eps2);
            k.rho1 = rho1.unwrap_or(k.rho1);
            k.rho2 = rho2.unwrap_or(k.rho2);
            cfg.validate()?;
            let reports = run_samplesize(&cfg)?;
            println!("{:<10} {:>6} {:>10} {:>24} {:>7} {:>9} {:>9}", "algorithm", "step", "E1_hat", "Var[du]", "N1", "N2", "N");
            for r in &reports {
                let var = r.var_du.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(",");
                println!("{:<10} {:>6} {:>10.4} {:>24} {:>7} {:>9} {:>9}", r.algorithm, r.step, r.e1_hat, var, r.n1, r.n2, r.n);
            }
            if let Some(dir) = out {
                let mut summary = Summary::new("samplesize", &cfg);
                summary.samplesize = reports;
                export_results(&dir, &[], &summary)?;
                println!("wrote {}", dir.display());
            }
        }
        Some(Command::Validate { seed }) => {
            let checks = run_all(seed);
            let mut failed = 0;
            for c in &checks {
                println!("{} {:<45} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                bail!("{failed} check(s) failed");
            }
        }
    }
    Ok(())
}
