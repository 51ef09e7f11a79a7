//! Bound validation: train a model, draw anchors from it with the reverse
//! sampler, and compare the boundary-estimate error between the true and
//! learned fields with the bound constant at every anchor.

use std::path::Path;

use serde::Serialize;

use super::artifacts::{cell, coord_columns, coords, ArtifactWriter, SeedFailure};
use super::config::ExperimentConfig;
use super::{fmt_p, last_step_fields, train_on_mixture, write_failures};
use crate::bounds::{bound_constant, validate_bound, BoundReport};
use crate::error::Result;
use crate::field::ScoreField;
use crate::model::reverse_sample;
use crate::plaplace::{EstimatorConfig, Formulation};
use crate::rng::{streams, substream};
use crate::svg;

/// Aggregate over the anchors of one p.
#[derive(Debug, Clone, Serialize)]
pub struct BoundSummary {
    pub p: f64,
    pub n_anchors: usize,
    pub n_assumptions_ok: usize,
    pub assumption_ok_fraction: f64,
    /// Largest `empirical_error / c_p` over anchors whose assumptions hold.
    pub max_ratio: f64,
    /// Anchors with assumptions holding and `empirical_error > c_p`.
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsSeed {
    pub seed: u64,
    pub anchors: Vec<Vec<f64>>,
    pub summaries: Vec<BoundSummary>,
    #[serde(skip)]
    pub reports: Vec<BoundReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub seeds: Vec<BoundsSeed>,
    pub failures: Vec<SeedFailure>,
}

pub fn summarize(p: f64, reports: &[BoundReport]) -> BoundSummary {
    let ok: Vec<&BoundReport> = reports.iter().filter(|r| r.assumptions_ok).collect();
    BoundSummary {
        p,
        n_anchors: reports.len(),
        n_assumptions_ok: ok.len(),
        assumption_ok_fraction: if reports.is_empty() { 0.0 } else { ok.len() as f64 / reports.len() as f64 },
        max_ratio: ok.iter().map(|r| r.ratio()).fold(0.0, f64::max),
        violations: ok.iter().filter(|r| !r.holds()).count(),
    }
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<BoundsReport> {
    cfg.validate()?;
    let root = ArtifactWriter::new(out, cfg, None)?;
    let mut seeds = Vec::new();
    let mut failures = Vec::new();
    for &seed in &cfg.seeds {
        let writer = root.child(&format!("seed_{seed}"), Some(seed))?;
        match run_seed(cfg, seed, &writer) {
            Ok(r) => seeds.push(r),
            Err(e) => failures.push(SeedFailure { seed, error: e.to_string() }),
        }
    }
    write_failures(&root, &failures)?;
    let all: Vec<serde_json::Value> =
        seeds.iter().map(|s| serde_json::json!({ "seed": s.seed, "per_p": s.summaries })).collect();
    let ok = seeds.iter().flat_map(|s| &s.summaries).map(|s| s.n_assumptions_ok).sum::<usize>();
    let total = seeds.iter().flat_map(|s| &s.summaries).map(|s| s.n_anchors).sum::<usize>();
    let max_ratio = seeds.iter().flat_map(|s| &s.summaries).map(|s| s.max_ratio).fold(0.0, f64::max);
    root.json(
        "summary.json",
        &serde_json::json!({
            "experiment": "bounds",
            "assumption_ok_fraction": if total == 0 { 0.0 } else { ok as f64 / total as f64 },
            "max_ratio": max_ratio,
            "violations": seeds.iter().flat_map(|s| &s.summaries).map(|s| s.violations).sum::<usize>(),
            "runs": all,
            "failed_seeds": failures,
        }),
    )?;
    Ok(BoundsReport { seeds, failures })
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64, writer: &ArtifactWriter) -> Result<BoundsSeed> {
    let bc = &cfg.bounds;
    let gmm = cfg.gmm.build()?;
    let dim = gmm.dim();
    let schedule = cfg.schedule.build()?;
    let (_, model, _) = train_on_mixture(cfg, &gmm, &schedule, seed)?;
    let (learned, truth) = last_step_fields(&model, &gmm, &schedule)?;
    let anchors = reverse_sample(&model, &schedule, bc.n_anchors, &mut substream(seed, streams::SAMPLE))?;
    let approx: &dyn ScoreField = if bc.self_test { &truth } else { &learned };

    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    for &p in &bc.p_values {
        let ecfg = EstimatorConfig { p, formulation: Formulation::Boundary, ..cfg.estimator.clone() };
        let r = validate_bound(&truth, approx, &anchors, &ecfg, seed)?;
        summaries.push(summarize(p, &r));
        write_surface(writer, p, &r, dim, ecfg.radius, bc.surface_points)?;
        reports.extend(r);
    }

    let mut cols = vec!["anchor".to_string()];
    cols.extend(coord_columns("x", dim));
    cols.extend(
        [
            "p",
            "delta",
            "m",
            "big_m",
            "segment_min",
            "c_p",
            "empirical_error",
            "ratio",
            "assumptions_ok",
            "estimate_true",
            "estimate_approx",
        ]
        .map(String::from),
    );
    let n = anchors.len();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![cell(i % n)];
            row.extend(coords(&r.anchor));
            row.extend([
                cell(r.p),
                cell(r.delta),
                cell(r.m),
                cell(r.big_m),
                cell(r.segment_min),
                cell(r.c_p),
                cell(r.empirical_error),
                cell(r.ratio()),
                cell(r.assumptions_ok),
                cell(r.estimate_true),
                cell(r.estimate_approx),
            ]);
            row
        })
        .collect();
    writer.csv("bound_reports.csv", &cols, &rows)?;
    let result = BoundsSeed { seed, anchors, summaries, reports };
    writer.json("summary.json", &result)?;
    Ok(result)
}

/// Bound constant over a δ × (m or M) lattice spanning the observed values,
/// plus the observed anchors as an overlay. For `p < 2` the second axis is
/// `m`, otherwise `M`.
fn write_surface(
    writer: &ArtifactWriter,
    p: f64,
    reports: &[BoundReport],
    dim: usize,
    radius: f64,
    n: usize,
) -> Result<()> {
    let ok: Vec<&BoundReport> = reports.iter().filter(|r| r.assumptions_ok).collect();
    let second = |r: &BoundReport| if p < 2.0 { r.m } else { r.big_m };
    let axis_name = if p < 2.0 { "m" } else { "big_m" };
    let d_max = ok.iter().map(|r| r.delta).fold(0.0, f64::max).max(1e-6) * 1.1;
    let (lo, hi) = ok.iter().map(|r| second(r)).fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo * 0.9, hi * 1.1) } else { (0.1, 2.0) };
    let mut rows = Vec::with_capacity(n * n);
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        let s = lo + (hi - lo) * j as f64 / (n - 1) as f64;
        for i in 0..n {
            let delta = d_max * i as f64 / (n - 1) as f64;
            // M must not fall below m; the unused one is pinned to the other.
            let c = bound_constant(p, delta, s, s, dim, radius)?;
            rows.push(vec![cell(delta), cell(s), cell(c)]);
            values.push(c);
        }
    }
    let tag = fmt_p(p);
    writer.csv(&format!("bound_surface_p{tag}.csv"), &["delta", axis_name, "c_p"], &rows)?;
    let markers: Vec<(f64, f64, &str)> =
        ok.iter().map(|r| (r.delta, second(r), if r.holds() { "black" } else { "red" })).collect();
    writer.svg(
        &format!("bound_surface_p{tag}.svg"),
        &svg::heatmap(&format!("c_p over (delta, {axis_name}), p={p}"), &values, n, n, (0.0, d_max, lo, hi), &markers),
    )?;
    let points: Vec<(f64, f64, &str)> =
        ok.iter().map(|r| (r.c_p, r.empirical_error, if r.holds() { "steelblue" } else { "red" })).collect();
    writer.svg(
        &format!("bound_vs_error_p{tag}.svg"),
        &svg::scatter(&format!("empirical error vs bound, p={p}"), &points, "c_p", "empirical error"),
    )?;
    Ok(())
}
