//! Estimator fidelity: repeated volume and boundary estimates at a handful of
//! anchors, compared with a dense Monte Carlo average of the exact pointwise
//! operator, for the analytic field and a trained model.

use std::path::Path;

use serde::Serialize;

use super::artifacts::{cell, coord_columns, coords, ArtifactWriter, SeedFailure};
use super::config::ExperimentConfig;
use super::{fmt_p, last_step_fields, quantile, train_on_mixture, write_failures, RunningStats};
use crate::error::{Error, Result};
use crate::field::ScoreField;
use crate::geometry::{dot, norm, sample_ball_uniform, BallSpec};
use crate::gmm::{p_laplace_from_derivatives, GmmParams};
use crate::memorization::Grid2;
use crate::plaplace::{estimate, EstimatorConfig, Formulation};
use crate::rng::{streams, substream};
use crate::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorKind {
    /// A local maximum of the mixture density.
    Mode,
    /// Midpoint of two means: a saddle or low-density region.
    Midpoint,
    Custom,
}

impl AnchorKind {
    fn as_str(self) -> &'static str {
        match self {
            AnchorKind::Mode => "mode",
            AnchorKind::Midpoint => "midpoint",
            AnchorKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anchor {
    pub kind: AnchorKind,
    pub point: Vec<f64>,
}

/// Fixed-point iteration `x ← Σ r_k(x) μ_k`, which is the stationarity
/// condition of an isotropic equal-variance mixture. Started at a mean it
/// climbs to the nearby mode.
pub fn find_mode(gmm: &GmmParams, start: &[f64]) -> Vec<f64> {
    let mut x = start.to_vec();
    for _ in 0..10_000 {
        let r = gmm.responsibilities(&x);
        let next: Vec<f64> = (0..x.len()).map(|j| r.iter().zip(&gmm.means).map(|(rk, m)| rk * m[j]).sum()).collect();
        let step = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if step < 1e-14 {
            break;
        }
    }
    x
}

/// Modes reached from every mean, then the midpoint of every pair of means.
pub fn default_anchors(gmm: &GmmParams) -> Vec<Anchor> {
    let mut anchors: Vec<Anchor> =
        gmm.means.iter().map(|m| Anchor { kind: AnchorKind::Mode, point: find_mode(gmm, m) }).collect();
    for i in 0..gmm.means.len() {
        for j in i + 1..gmm.means.len() {
            let point = gmm.means[i].iter().zip(&gmm.means[j]).map(|(a, b)| 0.5 * (a + b)).collect();
            anchors.push(Anchor { kind: AnchorKind::Midpoint, point });
        }
    }
    anchors
}

/// Ball average of the exact pointwise p-Laplace over `n` uniform points,
/// for each `p` at once. Singular points (`p < 2`, vanishing gradient) are
/// skipped.
pub fn exact_ball_average<R: rand::Rng + ?Sized>(
    gmm: &GmmParams,
    center: &[f64],
    radius: f64,
    n: usize,
    ps: &[f64],
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let ball = BallSpec::new(center.to_vec(), radius)?;
    let mut stats = vec![RunningStats::default(); ps.len()];
    let mut left = n;
    while left > 0 {
        let chunk = left.min(10_000);
        left -= chunk;
        for x in sample_ball_uniform(&ball, chunk, rng) {
            let g = gmm.score(&x)?;
            let h = gmm.hessian(&x)?;
            for (s, p) in stats.iter_mut().zip(ps) {
                match p_laplace_from_derivatives(&g, &h, *p) {
                    Ok(v) => s.push(v),
                    Err(Error::Singular { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(stats.iter().map(|s| (s.mean(), s.std_error())).collect())
}

/// Repeated estimates for one (anchor, field, formulation, p).
#[derive(Debug, Clone, Serialize)]
pub struct FidelityCell {
    pub anchor: usize,
    pub kind: AnchorKind,
    pub field: &'static str,
    pub formulation: Formulation,
    pub p: f64,
    pub exact: f64,
    pub exact_std_error: f64,
    pub mean: f64,
    /// Sample variance of the repeated estimates.
    pub variance: f64,
    pub mean_std_error: f64,
    /// `(mean - exact) / sqrt(mean_std_error² + exact_std_error²)`.
    pub z: f64,
    pub singular_hits: usize,
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl FidelityCell {
    pub fn within(&self, n_sigma: f64) -> bool {
        self.z.abs() <= n_sigma
    }
}

/// Everything one seed produced.
#[derive(Debug, Clone, Serialize)]
pub struct FidelitySeed {
    pub seed: u64,
    pub anchors: Vec<Anchor>,
    pub cells: Vec<FidelityCell>,
    /// Cosine between learned and true score over the evaluation points.
    #[serde(skip)]
    pub cosines: Vec<f64>,
    pub median_cosine: Option<f64>,
    /// Analytic-field cells within three combined standard errors of the
    /// exact average.
    pub oracle_within_3se: bool,
    /// Boundary p=1 variance is at most the volume p=1 variance at every
    /// anchor (analytic field).
    pub boundary_variance_le_volume: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityReport {
    pub seeds: Vec<FidelitySeed>,
    pub failures: Vec<SeedFailure>,
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<FidelityReport> {
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
    let summary: Vec<_> = seeds
        .iter()
        .map(|s| {
            serde_json::json!({
                "seed": s.seed,
                "median_cosine": s.median_cosine,
                "oracle_within_3se": s.oracle_within_3se,
                "boundary_variance_le_volume": s.boundary_variance_le_volume,
            })
        })
        .collect();
    root.json(
        "summary.json",
        &serde_json::json!({ "experiment": "fidelity", "runs": summary, "failed_seeds": failures }),
    )?;
    Ok(FidelityReport { seeds, failures })
}

const FIELDS: [&str; 2] = ["oracle", "learned"];
const FORMULATIONS: [Formulation; 2] = [Formulation::Volume, Formulation::Boundary];

/// One seed of the fidelity experiment.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, writer: &ArtifactWriter) -> Result<FidelitySeed> {
    let fc = &cfg.fidelity;
    let gmm = cfg.gmm.build()?;
    let dim = gmm.dim();
    let anchors: Vec<Anchor> = match &fc.anchors {
        Some(points) => points.iter().map(|p| Anchor { kind: AnchorKind::Custom, point: p.clone() }).collect(),
        None => default_anchors(&gmm),
    };
    let reps = fc.repetitions;

    let trained = if fc.learned {
        let schedule = cfg.schedule.build()?;
        let (_, model, _) = train_on_mixture(cfg, &gmm, &schedule, seed)?;
        Some((model, schedule))
    } else {
        None
    };
    let learned = match &trained {
        Some((model, schedule)) => Some(last_step_fields(model, &gmm, schedule)?),
        None => None,
    };

    let mut cells = Vec::new();
    let mut est_rows = Vec::new();
    let exact_stream = streams::PER_ITEM + (anchors.len() * FORMULATIONS.len() * reps) as u64;
    for (a, anchor) in anchors.iter().enumerate() {
        let mut rng = substream(seed, exact_stream + a as u64);
        let exact =
            exact_ball_average(&gmm, &anchor.point, cfg.estimator.radius, fc.exact_samples, &fc.p_values, &mut rng)?;
        for (fi, field_name) in FIELDS.iter().enumerate() {
            let field: &dyn ScoreField = match (fi, &learned) {
                (0, _) => &gmm,
                (_, Some((l, _))) => l,
                (_, None) => continue,
            };
            for (f, formulation) in FORMULATIONS.iter().enumerate() {
                for (pi, &p) in fc.p_values.iter().enumerate() {
                    let ecfg = EstimatorConfig { p, formulation: *formulation, ..cfg.estimator.clone() };
                    let mut values = Vec::with_capacity(reps);
                    let mut singular = 0;
                    for r in 0..reps {
                        // Repetition r shares its samples across p and fields.
                        let stream = streams::PER_ITEM + ((a * FORMULATIONS.len() + f) * reps + r) as u64;
                        let est = estimate(field, &anchor.point, &ecfg, &mut substream(seed, stream))?;
                        singular += est.singular_hits;
                        let mut row = vec![cell(a), anchor.kind.as_str().into()];
                        row.extend(coords(&anchor.point));
                        row.extend([
                            cell(field_name),
                            cell(formulation),
                            cell(p),
                            cell(ecfg.n_samples),
                            cell(ecfg.radius),
                        ]);
                        row.extend([
                            cell(seed),
                            cell(r),
                            cell(est.value),
                            cell(est.std_error),
                            cell(est.singular_hits),
                        ]);
                        est_rows.push(row);
                        values.push(est.value);
                    }
                    let st = RunningStats::from_slice(&values);
                    let (ex, ex_se) = exact[pi];
                    let se = (st.variance() / reps as f64).sqrt();
                    cells.push(FidelityCell {
                        anchor: a,
                        kind: anchor.kind,
                        field: field_name,
                        formulation: *formulation,
                        p,
                        exact: ex,
                        exact_std_error: ex_se,
                        mean: st.mean(),
                        variance: st.variance(),
                        mean_std_error: se,
                        z: (st.mean() - ex) / (se * se + ex_se * ex_se).sqrt(),
                        singular_hits: singular,
                        values,
                    });
                }
            }
        }
    }

    // Learned vs true score on a lattice (2-D) or mixture draws (other dims).
    let mut cosines = Vec::new();
    let mut direction_rows = Vec::new();
    let mut log_ratios = Vec::new();
    if let Some((learned, truth)) = &learned {
        let points: Vec<Vec<f64>> = if dim == 2 {
            let grid = Grid2::around_means(&gmm, 2.0, fc.eval_grid)?;
            grid.nodes().iter().map(|n| n.to_vec()).collect()
        } else {
            gmm.sample(fc.eval_grid * fc.eval_grid, &mut substream(seed, streams::EVAL))
        };
        for x in &points {
            let s = ScoreField::score(truth, x);
            let h = learned.score(x);
            let (ns, nh) = (norm(&s), norm(&h));
            let cos = dot(&s, &h) / (ns * nh);
            let log_ratio = (nh / ns).ln();
            if cos.is_finite() {
                cosines.push(cos);
            }
            if log_ratio.is_finite() {
                log_ratios.push(log_ratio);
            }
            let mut row = coords(x);
            row.extend([cell(cos), cell(ns), cell(nh), cell(log_ratio)]);
            direction_rows.push(row);
        }
    }
    let median_cosine = if cosines.is_empty() {
        None
    } else {
        let mut sorted = cosines.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Some(quantile(&sorted, 0.5))
    };

    let oracle_within_3se = cells.iter().filter(|c| c.field == "oracle").all(|c| c.within(3.0));
    let boundary_variance_le_volume = (0..anchors.len()).all(|a| {
        let var = |f: Formulation| {
            cells
                .iter()
                .find(|c| c.anchor == a && c.field == "oracle" && c.formulation == f && c.p == 1.0)
                .map(|c| c.variance)
        };
        match (var(Formulation::Boundary), var(Formulation::Volume)) {
            (Some(b), Some(v)) => b <= v,
            _ => true,
        }
    });

    write_seed(writer, &anchors, &cells, est_rows, direction_rows, &cosines, &log_ratios, &fc.p_values, dim)?;
    let result =
        FidelitySeed { seed, anchors, cells, cosines, median_cosine, oracle_within_3se, boundary_variance_le_volume };
    writer.json("summary.json", &result)?;
    Ok(result)
}

#[allow(clippy::too_many_arguments)]
fn write_seed(
    writer: &ArtifactWriter,
    anchors: &[Anchor],
    cells: &[FidelityCell],
    est_rows: Vec<Vec<String>>,
    direction_rows: Vec<Vec<String>>,
    cosines: &[f64],
    log_ratios: &[f64],
    ps: &[f64],
    dim: usize,
) -> Result<()> {
    let mut cols = vec!["anchor".to_string(), "kind".into()];
    cols.extend(coord_columns("x", dim));
    let anchor_rows: Vec<Vec<String>> = anchors
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut row = vec![cell(i), a.kind.as_str().into()];
            row.extend(coords(&a.point));
            row
        })
        .collect();
    writer.csv("anchors.csv", &cols, &anchor_rows)?;
    let mut est_cols = vec!["anchor".to_string(), "kind".into()];
    est_cols.extend(coord_columns("x", dim));
    est_cols.extend(
        ["field", "formulation", "p", "n", "radius", "seed", "rep", "value", "std_error", "singular_hits"]
            .map(String::from),
    );
    writer.csv("estimates.csv", &est_cols, &est_rows)?;

    let summary_rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            let mut sorted = c.values.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            vec![
                cell(c.anchor),
                c.kind.as_str().into(),
                cell(c.field),
                cell(c.formulation),
                cell(c.p),
                cell(c.exact),
                cell(c.exact_std_error),
                cell(c.mean),
                cell(c.variance),
                cell(c.mean_std_error),
                cell(c.z),
                cell(c.within(3.0)),
                cell(quantile(&sorted, 0.0)),
                cell(quantile(&sorted, 0.25)),
                cell(quantile(&sorted, 0.5)),
                cell(quantile(&sorted, 0.75)),
                cell(quantile(&sorted, 1.0)),
                cell(c.singular_hits),
            ]
        })
        .collect();
    writer.csv(
        "summary.csv",
        &[
            "anchor",
            "kind",
            "field",
            "formulation",
            "p",
            "exact",
            "exact_std_error",
            "mean",
            "variance",
            "mean_std_error",
            "z",
            "within_3se",
            "min",
            "q25",
            "median",
            "q75",
            "max",
            "singular_hits",
        ],
        &summary_rows,
    )?;

    if !direction_rows.is_empty() {
        let mut cols = coord_columns("x", dim);
        cols.extend(["cosine", "true_norm", "learned_norm", "log_norm_ratio"].map(String::from));
        writer.csv("score_error.csv", &cols, &direction_rows)?;
        writer.svg("cosine_hist.svg", &svg::histogram("cosine(learned, true score)", cosines, 30, "cosine"))?;
        writer
            .svg("magnitude_hist.svg", &svg::histogram("log(|learned| / |true|)", log_ratios, 30, "log norm ratio"))?;
    }

    // Violin-style view: every repetition as a point, x = anchor (+ offset by formulation).
    for field in FIELDS {
        for &p in ps {
            let mut points = Vec::new();
            for c in cells.iter().filter(|c| c.field == field && c.p == p) {
                let (offset, color) = match c.formulation {
                    Formulation::Volume => (-0.15, "darkorange"),
                    Formulation::Boundary => (0.15, "steelblue"),
                };
                points.extend(c.values.iter().map(|v| (c.anchor as f64 + offset, *v, color)));
                points.push((c.anchor as f64, c.exact, "black"));
            }
            if !points.is_empty() {
                let title = format!("{field} p={p}: volume (orange), boundary (blue), exact (black)");
                writer.svg(
                    &format!("estimates_{field}_p{}.svg", fmt_p(p)),
                    &svg::scatter(&title, &points, "anchor", "estimate"),
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_search_finds_a_stationary_point() {
        let g = GmmParams::equal_weights(vec![vec![0.0, 0.0], vec![2.5, 0.0]], 1.0).unwrap();
        let m = find_mode(&g, &[0.0, 0.0]);
        assert!(norm(&g.score(&m).unwrap()) < 1e-10);
        // The neighbour pulls the mode toward it.
        assert!(m[0] > 0.0 && m[0] < 0.5);
    }

    #[test]
    fn default_anchors_are_modes_then_midpoints() {
        let g = GmmParams::equal_weights(vec![vec![-4.0, 0.0], vec![4.0, 0.0], vec![0.0, 6.0]], 1.0).unwrap();
        let a = default_anchors(&g);
        assert_eq!(a.len(), 6);
        assert!(a[..3].iter().all(|x| x.kind == AnchorKind::Mode));
        assert_eq!(a[3].point, vec![0.0, 0.0]);
        assert_eq!(a[5].point, vec![2.0, 3.0]);
    }

    #[test]
    fn exact_average_of_a_single_gaussian_p2_is_constant() {
        let g = GmmParams::equal_weights(vec![vec![0.0, 0.0]], 0.5).unwrap();
        let r = exact_ball_average(&g, &[1.0, 1.0], 1.0, 1000, &[2.0], &mut substream(1, 0)).unwrap();
        assert!((r[0].0 + 4.0).abs() < 1e-12);
        assert!(r[0].1 < 1e-12);
    }
}
