//! Memorization injection: train on mixture draws plus replicas of one point,
//! then rank that point by its learned p-Laplace against a grid and against
//! fresh draws. Optionally repeats every seed without replicas as a control.

use std::path::Path;

use serde::Serialize;

use super::artifacts::{cell, ArtifactWriter, SeedFailure};
use super::config::ExperimentConfig;
use super::{fmt_p, last_step_fields, write_failures, RunningStats};
use crate::error::Result;
use crate::geometry::distance;
use crate::gmm::GmmParams;
use crate::memorization::{
    build_scenario, grid_p_laplace, percentile_rank, score_norm_criterion, Criterion, DetectionResult, Grid2,
};
use crate::model::{train, NoiseSchedule};
use crate::plaplace::{estimate, EstimatorConfig};
use crate::rng::{streams, substream};
use crate::svg;

/// Fraction of seeds that must rank the memorized point in the bottom decile
/// for detection to count as systematic.
pub const SYSTEMATIC_FRACTION: f64 = 0.8;
pub const BOTTOM_PERCENTILE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// The chosen point is replicated.
    Memorized,
    /// Same seed, zero replicas.
    Null,
}

impl Condition {
    fn as_str(self) -> &'static str {
        match self {
            Condition::Memorized => "memorized",
            Condition::Null => "null",
        }
    }
}

/// Grid readout for one p.
#[derive(Debug, Clone, Serialize)]
pub struct PRow {
    pub p: f64,
    pub value: f64,
    /// Percentile of the memorized point's value among the grid values.
    pub percentile: f64,
    pub grid_argmin: [f64; 2],
    /// Distance from the grid minimum to the memorized point, in grid cells.
    pub argmin_distance_cells: f64,
    /// Detection of the memorized point among fresh mixture draws.
    pub detection: DetectionResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemorizationRun {
    pub seed: u64,
    pub condition: Condition,
    pub memorized_point: Vec<f64>,
    pub final_loss: f64,
    pub rows: Vec<PRow>,
    pub score_norm: DetectionResult,
}

impl MemorizationRun {
    pub fn row(&self, p: f64) -> Option<&PRow> {
        self.rows.iter().find(|r| r.p == p)
    }
}

/// Seed-level aggregate for one condition.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub n_seeds: usize,
    /// Seeds whose p=1 grid percentile is below the bottom-decile cut.
    pub p1_bottom_decile: usize,
    /// Seeds where the p=1 percentile does not exceed the p=3 percentile.
    pub p1_le_p3: usize,
    pub mean_auc_p1: f64,
    pub mean_auc_score_norm: f64,
    /// `p1_bottom_decile >= SYSTEMATIC_FRACTION * n_seeds`.
    pub systematic_bottom_decile: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemorizationReport {
    pub runs: Vec<MemorizationRun>,
    pub summaries: Vec<ConditionSummary>,
    pub failures: Vec<SeedFailure>,
}

impl MemorizationReport {
    pub fn summary(&self, condition: Condition) -> Option<&ConditionSummary> {
        self.summaries.iter().find(|s| s.condition == condition)
    }
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<MemorizationReport> {
    cfg.validate()?;
    let root = ArtifactWriter::new(out, cfg, None)?;
    let gmm = cfg.gmm.build()?;
    let schedule = cfg.schedule.build()?;
    let grid = if gmm.dim() == 2 {
        Some(Grid2::around_means(&gmm, cfg.memorization.grid_inflate_sigmas, cfg.memorization.grid_size)?)
    } else {
        None
    };
    let mut conditions = vec![Condition::Memorized];
    if cfg.memorization.null_control {
        conditions.push(Condition::Null);
    }

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for &seed in &cfg.seeds {
        for &condition in &conditions {
            let writer = root.child(&format!("seed_{seed}_{}", condition.as_str()), Some(seed))?;
            match run_one(cfg, &gmm, &schedule, grid.as_ref(), seed, condition, &writer) {
                Ok(r) => runs.push(r),
                Err(e) => failures.push(SeedFailure { seed, error: format!("{}: {e}", condition.as_str()) }),
            }
        }
    }
    write_failures(&root, &failures)?;

    let summaries: Vec<ConditionSummary> = conditions.iter().map(|c| summarize(&runs, *c)).collect();
    write_tables(&root, &runs)?;
    root.json(
        "summary.json",
        &serde_json::json!({
            "experiment": "memorization",
            "bottom_percentile": BOTTOM_PERCENTILE,
            "systematic_fraction": SYSTEMATIC_FRACTION,
            "conditions": summaries,
            "failed_seeds": failures,
        }),
    )?;
    Ok(MemorizationReport { runs, summaries, failures })
}

fn summarize(runs: &[MemorizationRun], condition: Condition) -> ConditionSummary {
    let these: Vec<&MemorizationRun> = runs.iter().filter(|r| r.condition == condition).collect();
    let n = these.len();
    let p1: Vec<Option<&PRow>> = these.iter().map(|r| r.row(1.0)).collect();
    let p1_bottom_decile = p1.iter().flatten().filter(|r| r.percentile < BOTTOM_PERCENTILE).count();
    let p1_le_p3 = these
        .iter()
        .filter(|r| matches!((r.row(1.0), r.row(3.0)), (Some(a), Some(b)) if a.percentile <= b.percentile))
        .count();
    let mean = |xs: Vec<f64>| RunningStats::from_slice(&xs).mean();
    ConditionSummary {
        condition,
        n_seeds: n,
        p1_bottom_decile,
        p1_le_p3,
        mean_auc_p1: mean(p1.iter().flatten().map(|r| r.detection.auc).collect()),
        mean_auc_score_norm: mean(these.iter().map(|r| r.score_norm.auc).collect()),
        systematic_bottom_decile: n > 0 && p1_bottom_decile as f64 >= SYSTEMATIC_FRACTION * n as f64,
    }
}

/// Trains one model and reads out every criterion.
pub fn run_one(
    cfg: &ExperimentConfig,
    gmm: &GmmParams,
    schedule: &NoiseSchedule,
    grid: Option<&Grid2>,
    seed: u64,
    condition: Condition,
    writer: &ArtifactWriter,
) -> Result<MemorizationRun> {
    let mc = &cfg.memorization;
    let replicas = match condition {
        Condition::Memorized => mc.n_replicas,
        Condition::Null => 0,
    };
    let scenario = build_scenario(gmm, mc.n_base, replicas, seed)?;
    let (model, report) = train(&scenario.training_set(), schedule, &cfg.training.train_config(seed))?;
    let (field, _) = last_step_fields(&model, gmm, schedule)?;
    let mem = &scenario.memorized_point;
    let background = gmm.sample(mc.n_background, &mut substream(seed, streams::BACKGROUND));
    let background_stream = streams::PER_ITEM + grid.map_or(0, |g| g.nx * g.ny) as u64;

    let mut rows = Vec::new();
    for &p in &mc.p_values {
        let ecfg = EstimatorConfig { p, ..cfg.estimator.clone() };
        let value = estimate(&field, mem, &ecfg, &mut substream(seed, streams::EVAL))?.value;
        let bg_values = background
            .iter()
            .enumerate()
            .map(|(i, x)| {
                estimate(&field, x, &ecfg, &mut substream(seed, background_stream + i as u64)).map(|e| e.value)
            })
            .collect::<Result<Vec<f64>>>()?;
        let detection = DetectionResult::new(Criterion::PLaplace, vec![value], bg_values)?;
        let (percentile, grid_argmin, argmin_distance_cells) = match grid {
            Some(g) => {
                let values = grid_p_laplace(&field, g, &ecfg, seed)?;
                let (ix, iy) = values.argmin().expect("grid is nonempty");
                let at = g.node(ix, iy);
                let (cx, cy) = g.cell_size();
                let cells = distance(&[at[0] / cx, at[1] / cy], &[mem[0] / cx, mem[1] / cy]);
                writer.raw(&format!("grid_p{}.csv", fmt_p(p)), &values.to_csv())?;
                let markers: Vec<(f64, f64, &str)> = background
                    .iter()
                    .map(|b| (b[0], b[1], "gray"))
                    .chain(std::iter::once((mem[0], mem[1], "black")))
                    .collect();
                let title = format!("learned p={p} ({}), memorized point in black", condition.as_str());
                writer.svg(
                    &format!("grid_p{}.svg", fmt_p(p)),
                    &svg::heatmap(&title, &values.values, g.nx, g.ny, (g.x_min, g.x_max, g.y_min, g.y_max), &markers),
                )?;
                (percentile_rank(&values.values, value)?, at, cells)
            }
            None => (detection.percentile, [f64::NAN; 2], f64::NAN),
        };
        rows.push(PRow { p, value, percentile, grid_argmin, argmin_distance_cells, detection });
    }

    let score_norm = DetectionResult::new(
        Criterion::ScoreNorm,
        vec![score_norm_criterion(&field, mem)],
        background.iter().map(|x| score_norm_criterion(&field, x)).collect(),
    )?;
    let run = MemorizationRun {
        seed,
        condition,
        memorized_point: mem.clone(),
        final_loss: report.epoch_losses.last().copied().unwrap_or(f64::NAN),
        rows,
        score_norm,
    };
    writer.json("scenario.json", &serde_json::json!({ "scenario": scenario, "epoch_losses": report.epoch_losses }))?;
    writer.json("result.json", &run)?;
    Ok(run)
}

fn write_tables(root: &ArtifactWriter, runs: &[MemorizationRun]) -> Result<()> {
    let mut pct_rows = Vec::new();
    let mut det_rows = Vec::new();
    for r in runs {
        for row in &r.rows {
            pct_rows.push(vec![
                cell(r.seed),
                cell(r.condition.as_str()),
                cell(row.p),
                cell(row.value),
                cell(row.percentile),
                cell(row.grid_argmin[0]),
                cell(row.grid_argmin[1]),
                cell(row.argmin_distance_cells),
            ]);
            det_rows.push(vec![
                cell(r.seed),
                cell(r.condition.as_str()),
                format!("p_laplace_p{}", row.p),
                cell(row.detection.percentile),
                cell(row.detection.auc),
            ]);
        }
        det_rows.push(vec![
            cell(r.seed),
            cell(r.condition.as_str()),
            "score_norm".into(),
            cell(r.score_norm.percentile),
            cell(r.score_norm.auc),
        ]);
    }
    root.csv(
        "percentiles.csv",
        &["seed", "condition", "p", "value", "grid_percentile", "argmin_x", "argmin_y", "argmin_distance_cells"],
        &pct_rows,
    )?;
    root.csv("detection.csv", &["seed", "condition", "criterion", "background_percentile", "auc"], &det_rows)?;
    Ok(())
}
