//! Error bound for the boundary estimator when the true score `s` is replaced
//! by an approximation `ŝ`.
//!
//! If on the sphere `‖s - ŝ‖ < δ`, `m < ‖s‖, ‖ŝ‖ ≤ M`, and every point of the
//! segment between `s(y)` and `ŝ(y)` has norm at least `m`, then the two
//! ball-averaged flux estimates differ by at most
//!
//! ```text
//! C_p = |∂B_R|/|B_R| · δ M^{p-2} (p-1)   for p >= 2
//! C_p = |∂B_R|/|B_R| · δ m^{p-2} (3-p)   for p <  2
//! ```
//!
//! The per-sample integrand satisfies the same bound, so when the constants
//! are measured on the very sample set the estimates use, the bound holds for
//! the Monte Carlo estimates themselves, not just for the integrals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::field::ScoreField;
use crate::geometry::{norm, sample_sphere_uniform, surface_to_volume, BallSpec, SpherePoint};
use crate::plaplace::{estimate_boundary_on, EstimatorConfig, Formulation};
use crate::rng::{streams, substream};

/// Relative inflation applied to the measured `δ` so assumption (a) holds strictly.
pub const DELTA_INFLATION: f64 = 0.01;

/// Default number of equispaced `t` values in the segment check.
pub const DEFAULT_SEGMENT_POINTS: usize = 11;

/// `C_p` including the `|∂B_R|/|B_R|` factor.
pub fn bound_constant(p: f64, delta: f64, m: f64, big_m: f64, dim: usize, radius: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta must be non-negative, got {delta}")));
    }
    if !(m > 0.0 && m <= big_m && big_m.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 0 < m <= M, got m = {m}, M = {big_m}")));
    }
    let ratio = surface_to_volume(dim, radius)?;
    let per_sample =
        if p >= 2.0 { delta * big_m.powf(p - 2.0) * (p - 1.0) } else { delta * m.powf(p - 2.0) * (3.0 - p) };
    Ok(ratio * per_sample)
}

/// Minimum of `‖t a + (1-t) b‖` over `t ∈ [0, 1]` in closed form.
pub fn segment_min_norm(a: &[f64], b: &[f64]) -> f64 {
    // ‖b + t (a - b)‖² is a convex quadratic in t.
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let dd: f64 = diff.iter().map(|v| v * v).sum();
    let t = if dd > 0.0 { (-b.iter().zip(&diff).map(|(x, y)| x * y).sum::<f64>() / dd).clamp(0.0, 1.0) } else { 0.0 };
    let point: Vec<f64> = a.iter().zip(b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
    norm(&point)
}

/// Minimum of `‖t a + (1-t) b‖` over `n` equispaced `t` in `[0, 1]`.
pub fn segment_min_grid(a: &[f64], b: &[f64], n: usize) -> f64 {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let point: Vec<f64> = a.iter().zip(b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            norm(&point)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Assumption constants measured on a finite set of sphere samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    /// `max ‖s - ŝ‖` before inflation.
    pub delta_raw: f64,
    /// `delta_raw · (1 + DELTA_INFLATION)`.
    pub delta: f64,
    pub m: f64,
    pub big_m: f64,
    /// Smallest segment norm (closed form; never above the grid minimum).
    pub segment_min: f64,
    /// Smallest segment norm on the `t` grid.
    pub segment_min_grid: f64,
    pub assumptions_ok: bool,
}

/// Measures `(δ, m, M)` for the pair `(s, ŝ)` on `samples`.
pub fn assumption_constants_on<S, H>(
    s: &S,
    s_hat: &H,
    samples: &[SpherePoint],
    n_segment: usize,
) -> Result<AssumptionConstants>
where
    S: ScoreField + ?Sized,
    H: ScoreField + ?Sized,
{
    check_dim(s.dim(), s_hat.dim())?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no sphere samples".into()));
    }
    let mut a = vec![0.0; s.dim()];
    let mut b = vec![0.0; s.dim()];
    let mut delta_raw: f64 = 0.0;
    let mut norm_min = f64::INFINITY;
    let mut big_m: f64 = 0.0;
    let mut seg_exact = f64::INFINITY;
    let mut seg_grid = f64::INFINITY;
    for sample in samples {
        s.score_into(&sample.point, &mut a);
        s_hat.score_into(&sample.point, &mut b);
        let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        delta_raw = delta_raw.max(diff);
        let (na, nb) = (norm(&a), norm(&b));
        norm_min = norm_min.min(na).min(nb);
        big_m = big_m.max(na).max(nb);
        seg_exact = seg_exact.min(segment_min_norm(&a, &b));
        seg_grid = seg_grid.min(segment_min_grid(&a, &b, n_segment));
    }
    let segment_min = seg_exact.min(seg_grid);
    let m = norm_min.min(segment_min);
    let values_finite = [delta_raw, m, big_m].iter().all(|v| v.is_finite());
    Ok(AssumptionConstants {
        delta_raw,
        delta: delta_raw * (1.0 + DELTA_INFLATION),
        m,
        big_m,
        segment_min,
        segment_min_grid: seg_grid,
        assumptions_ok: values_finite && m > 0.0,
    })
}

/// Samples `n_samples` points on `∂B_radius(anchor)` and measures the constants there.
#[allow(clippy::too_many_arguments)]
pub fn estimate_assumption_constants<S, H, R>(
    s: &S,
    s_hat: &H,
    anchor: &[f64],
    radius: f64,
    n_samples: usize,
    n_segment: usize,
    rng: &mut R,
) -> Result<AssumptionConstants>
where
    S: ScoreField + ?Sized,
    H: ScoreField + ?Sized,
    R: Rng + ?Sized,
{
    check_dim(s.dim(), anchor.len())?;
    let ball = BallSpec::new(anchor.to_vec(), radius)?;
    let samples = sample_sphere_uniform(&ball, n_samples, rng);
    assumption_constants_on(s, s_hat, &samples, n_segment)
}

/// Outcome of checking the bound at one anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub anchor: Vec<f64>,
    pub p: f64,
    pub delta: f64,
    pub m: f64,
    pub big_m: f64,
    pub c_p: f64,
    pub empirical_error: f64,
    pub assumptions_ok: bool,
    pub segment_min: f64,
    pub estimate_true: f64,
    pub estimate_approx: f64,
}

impl BoundReport {
    /// `empirical_error / c_p` (0 when both vanish).
    pub fn ratio(&self) -> f64 {
        if self.c_p > 0.0 {
            self.empirical_error / self.c_p
        } else if self.empirical_error == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn holds(&self) -> bool {
        self.empirical_error <= self.c_p
    }
}

/// Checks the bound at every anchor. Anchor `i` draws its sphere samples from
/// substream `PER_ITEM + i` of `seed`, and both boundary estimates and the
/// constants use that one sample set.
pub fn validate_bound<S, H>(
    s: &S,
    s_hat: &H,
    anchors: &[Vec<f64>],
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<Vec<BoundReport>>
where
    S: ScoreField + ?Sized,
    H: ScoreField + ?Sized,
{
    cfg.validate()?;
    if cfg.formulation != Formulation::Boundary {
        return Err(Error::InvalidArgument("the bound applies to the boundary formulation only".into()));
    }
    check_dim(s.dim(), s_hat.dim())?;
    // The bound carries the |∂B|/|B| factor, so compare normalized estimates.
    let cfg = EstimatorConfig { normalize_by_volume: true, ..cfg.clone() };
    anchors
        .iter()
        .enumerate()
        .map(|(i, anchor)| {
            check_dim(s.dim(), anchor.len())?;
            let mut rng = substream(seed, streams::PER_ITEM + i as u64);
            let ball = BallSpec::new(anchor.clone(), cfg.radius)?;
            let samples = sample_sphere_uniform(&ball, cfg.n_samples, &mut rng);
            let k = assumption_constants_on(s, s_hat, &samples, DEFAULT_SEGMENT_POINTS)?;
            let est_true = estimate_boundary_on(s, &samples, &cfg);
            let est_hat = estimate_boundary_on(s_hat, &samples, &cfg);
            let (estimate_true, estimate_approx, complete) = match (est_true, est_hat) {
                (Ok(a), Ok(b)) => (a.value, b.value, a.singular_hits == 0 && b.singular_hits == 0),
                _ => (f64::NAN, f64::NAN, false),
            };
            let assumptions_ok = k.assumptions_ok && complete;
            let c_p = if k.m > 0.0 && k.big_m.is_finite() {
                bound_constant(cfg.p, k.delta, k.m, k.big_m, s.dim(), cfg.radius)?
            } else {
                f64::INFINITY
            };
            Ok(BoundReport {
                anchor: anchor.clone(),
                p: cfg.p,
                delta: k.delta,
                m: k.m,
                big_m: k.big_m,
                c_p,
                empirical_error: (estimate_true - estimate_approx).abs(),
                assumptions_ok,
                segment_min: k.segment_min,
                estimate_true,
                estimate_approx,
            })
        })
        .collect()
}
