//! The `train` and `sample` commands: fit a model to mixture draws and save a
//! checkpoint; draw samples from a checkpoint (or a freshly trained model).

use std::path::Path;

use serde::Serialize;

use super::artifacts::{cell, coord_columns, coords, ArtifactWriter, SeedFailure};
use super::config::ExperimentConfig;
use super::{train_on_mixture, write_failures};
use crate::error::Result;
use crate::geometry::distance;
use crate::gmm::GmmParams;
use crate::model::{reverse_sample, ModelCheckpoint};
use crate::rng::{streams, substream};
use crate::svg;

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub seed: u64,
    pub first_loss: f64,
    pub final_loss: f64,
    pub checkpoint: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleOutcome {
    pub seed: u64,
    pub n: usize,
    /// Fraction of samples within 3σ of some mixture mean.
    pub mode_coverage: f64,
}

pub fn run_train(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<TrainOutcome>, Vec<SeedFailure>)> {
    cfg.validate()?;
    let root = ArtifactWriter::new(out, cfg, None)?;
    let gmm = cfg.gmm.build()?;
    let schedule = cfg.schedule.build()?;
    let mut done = Vec::new();
    let mut failures = Vec::new();
    for &seed in &cfg.seeds {
        let writer = root.child(&format!("seed_{seed}"), Some(seed))?;
        let result = train_on_mixture(cfg, &gmm, &schedule, seed).and_then(|(data, model, report)| {
            let path = writer.dir().join("model.json");
            ModelCheckpoint::new(&model, &schedule).save(&path)?;
            let rows: Vec<Vec<String>> =
                report.epoch_losses.iter().enumerate().map(|(e, l)| vec![cell(e), cell(l)]).collect();
            writer.csv("losses.csv", &["epoch", "loss"], &rows)?;
            let pts: Vec<(f64, f64, &str)> =
                report.epoch_losses.iter().enumerate().map(|(e, l)| (e as f64, *l, "steelblue")).collect();
            writer.svg("losses.svg", &svg::scatter("training loss per epoch", &pts, "epoch", "loss"))?;
            let data_rows: Vec<Vec<String>> = data.iter().map(|x| coords(x)).collect();
            writer.csv("data.csv", &coord_columns("x", gmm.dim()), &data_rows)?;
            let outcome = TrainOutcome {
                seed,
                first_loss: report.epoch_losses[0],
                final_loss: *report.epoch_losses.last().expect("at least one epoch"),
                checkpoint: path.display().to_string(),
            };
            writer.json("summary.json", &outcome)?;
            Ok(outcome)
        });
        match result {
            Ok(o) => done.push(o),
            Err(e) => failures.push(SeedFailure { seed, error: e.to_string() }),
        }
    }
    write_failures(&root, &failures)?;
    Ok((done, failures))
}

/// Fraction of `samples` within `3σ` of at least one mean.
pub fn mode_coverage(gmm: &GmmParams, samples: &[Vec<f64>]) -> f64 {
    let r = 3.0 * gmm.sigma2.sqrt();
    let hits = samples.iter().filter(|x| gmm.means.iter().any(|m| distance(x, m) <= r)).count();
    hits as f64 / samples.len().max(1) as f64
}

pub fn run_sample(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<SampleOutcome>, Vec<SeedFailure>)> {
    cfg.validate()?;
    let root = ArtifactWriter::new(out, cfg, None)?;
    let gmm = cfg.gmm.build()?;
    let mut done = Vec::new();
    let mut failures = Vec::new();
    for &seed in &cfg.seeds {
        let writer = root.child(&format!("seed_{seed}"), Some(seed))?;
        let result = (|| -> Result<SampleOutcome> {
            let (model, schedule) = match &cfg.sample.checkpoint {
                Some(path) => ModelCheckpoint::load(path)?.into_parts()?,
                None => {
                    let schedule = cfg.schedule.build()?;
                    let (_, model, _) = train_on_mixture(cfg, &gmm, &schedule, seed)?;
                    (model, schedule)
                }
            };
            let samples = reverse_sample(&model, &schedule, cfg.sample.n, &mut substream(seed, streams::SAMPLE))?;
            let rows: Vec<Vec<String>> = samples.iter().map(|x| coords(x)).collect();
            writer.csv("samples.csv", &coord_columns("x", model.input_dim()), &rows)?;
            if model.input_dim() >= 2 {
                let pts: Vec<(f64, f64, &str)> = samples
                    .iter()
                    .map(|x| (x[0], x[1], "steelblue"))
                    .chain(gmm.means.iter().filter(|m| m.len() >= 2).map(|m| (m[0], m[1], "red")))
                    .collect();
                writer.svg("samples.svg", &svg::scatter("reverse-process samples, means in red", &pts, "x0", "x1"))?;
            }
            let outcome = SampleOutcome { seed, n: samples.len(), mode_coverage: mode_coverage(&gmm, &samples) };
            writer.json("summary.json", &outcome)?;
            Ok(outcome)
        })();
        match result {
            Ok(o) => done.push(o),
            Err(e) => failures.push(SeedFailure { seed, error: e.to_string() }),
        }
    }
    write_failures(&root, &failures)?;
    Ok((done, failures))
}
