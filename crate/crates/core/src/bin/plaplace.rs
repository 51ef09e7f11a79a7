//! Command-line driver for the experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use plaplace::experiment::config::{ExperimentConfig, ExperimentKind};
use plaplace::experiment::{bounds, fidelity, memorization, training};
use plaplace::Result;

#[derive(Parser)]
#[command(
    name = "plaplace",
    version,
    about = "Averaged p-Laplace experiments on Gaussian mixtures and toy diffusion models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimator accuracy against the exact operator at fixed anchors.
    Fidelity(Common),
    /// Memorization injection and detection by learned p-Laplace ranking.
    Memorize(Common),
    /// Error-bound validation between the true and a learned score.
    Bounds(Common),
    /// Train a score model on mixture draws and save a checkpoint.
    Train(Common),
    /// Draw samples with the reverse process.
    Sample(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, kind: ExperimentKind) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::new(kind),
        };
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        let out = self.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
        // The output location is left out of the embedded config so that
        // artifacts of the same run compare equal wherever they are written.
        Ok((cfg, out))
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    Ok(match cli.command {
        Command::Fidelity(c) => {
            let (cfg, out) = c.resolve(ExperimentKind::Fidelity)?;
            let r = fidelity::run(&cfg, &out)?;
            for s in &r.seeds {
                println!(
                    "seed {}: analytic estimates within 3 SE: {}, boundary p=1 variance <= volume: {}, median cosine: {}",
                    s.seed,
                    s.oracle_within_3se,
                    s.boundary_variance_le_volume,
                    s.median_cosine.map_or("n/a".into(), |c| format!("{c:.4}"))
                );
            }
            r.failures.is_empty()
        }
        Command::Memorize(c) => {
            let (cfg, out) = c.resolve(ExperimentKind::Memorization)?;
            let r = memorization::run(&cfg, &out)?;
            for s in &r.summaries {
                println!(
                    "{:?}: p=1 bottom decile in {}/{} seeds, p1 <= p3 in {}/{}, mean AUC p=1 {:.3}, score norm {:.3}",
                    s.condition,
                    s.p1_bottom_decile,
                    s.n_seeds,
                    s.p1_le_p3,
                    s.n_seeds,
                    s.mean_auc_p1,
                    s.mean_auc_score_norm
                );
            }
            r.failures.is_empty()
        }
        Command::Bounds(c) => {
            let (cfg, out) = c.resolve(ExperimentKind::Bounds)?;
            let r = bounds::run(&cfg, &out)?;
            for s in &r.seeds {
                for b in &s.summaries {
                    println!(
                        "seed {} p={}: {}/{} anchors satisfy the assumptions, max error/bound {:.4}, violations {}",
                        s.seed, b.p, b.n_assumptions_ok, b.n_anchors, b.max_ratio, b.violations
                    );
                }
            }
            r.failures.is_empty()
        }
        Command::Train(c) => {
            let (cfg, out) = c.resolve(ExperimentKind::Fidelity)?;
            let (done, failures) = training::run_train(&cfg, &out)?;
            for t in &done {
                println!("seed {}: loss {:.4} -> {:.4}, saved {}", t.seed, t.first_loss, t.final_loss, t.checkpoint);
            }
            failures.is_empty()
        }
        Command::Sample(c) => {
            let (cfg, out) = c.resolve(ExperimentKind::Fidelity)?;
            let (done, failures) = training::run_sample(&cfg, &out)?;
            for s in &done {
                println!("seed {}: {} samples, {:.1}% within 3 sigma of a mean", s.seed, s.n, 100.0 * s.mode_coverage);
            }
            failures.is_empty()
        }
    })
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some seeds failed; see errors.json in the output directory");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
