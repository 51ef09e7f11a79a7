//! End-to-end experiment runners behind the command-line tool.
//!
//! Each runner takes a validated [`ExperimentConfig`] and an output
//! directory, loops over the configured seeds, writes CSV/JSON/SVG artifacts
//! (per seed under `seed_<n>/`, aggregates at the top level) and returns the
//! numbers it wrote. A seed that fails is recorded in `errors.json` and the
//! remaining seeds still run.

pub mod artifacts;
pub mod bounds;
pub mod config;
pub mod fidelity;
pub mod memorization;
pub mod training;

use std::path::Path;

pub use artifacts::{ArtifactWriter, SeedFailure, SCHEMA_VERSION};
pub use config::ExperimentConfig;

use crate::error::Result;
use crate::gmm::GmmParams;
use crate::model::{train, LearnedScore, MlpScoreModel, NoiseSchedule, TrainReport};
use crate::rng::{streams, substream};

/// Mixture draws for `seed` followed by a training run on them.
pub(crate) fn train_on_mixture(
    cfg: &ExperimentConfig,
    gmm: &GmmParams,
    schedule: &NoiseSchedule,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, MlpScoreModel, TrainReport)> {
    let data = gmm.sample(cfg.training.n_train, &mut substream(seed, streams::DATA));
    let (model, report) = train(&data, schedule, &cfg.training.train_config(seed))?;
    Ok((data, model, report))
}

/// The learned field at the last denoising step together with the matching
/// analytic field of the corrupted mixture.
pub(crate) fn last_step_fields<'a>(
    model: &'a MlpScoreModel,
    gmm: &GmmParams,
    schedule: &NoiseSchedule,
) -> Result<(LearnedScore<'a>, crate::gmm::PerturbedGmm)> {
    let learned = LearnedScore::last_step(model, schedule)?;
    let truth = gmm.perturbed(schedule.alpha(learned.timestep())?)?;
    Ok((learned, truth))
}

/// Writes `errors.json` when any seed failed.
pub(crate) fn write_failures(writer: &ArtifactWriter, failures: &[SeedFailure]) -> Result<()> {
    if !failures.is_empty() {
        writer.json("errors.json", &serde_json::json!({ "failed_seeds": failures }))?;
    }
    Ok(())
}

/// Runs the experiment named in the config.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    use config::ExperimentKind;
    Ok(match cfg.experiment {
        ExperimentKind::Fidelity => fidelity::run(cfg, out)?.failures.is_empty(),
        ExperimentKind::Memorization => memorization::run(cfg, out)?.failures.is_empty(),
        ExperimentKind::Bounds => bounds::run(cfg, out)?.failures.is_empty(),
    })
}

pub(crate) fn fmt_p(p: f64) -> String {
    format!("{p}").replace('.', "_")
}

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RunningStats {
    n: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub(crate) fn from_slice(xs: &[f64]) -> Self {
        let mut s = Self::default();
        xs.iter().for_each(|x| s.push(*x));
        s
    }

    pub(crate) fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Unbiased sample variance.
    pub(crate) fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub(crate) fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Linear-interpolated quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
