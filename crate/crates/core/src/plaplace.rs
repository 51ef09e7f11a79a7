//! Pointwise and ball-averaged p-Laplace estimates from a score field.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::field::ScoreField;
use crate::geometry::{
    dot, norm, sample_ball_uniform, sample_sphere_uniform, surface_to_volume, BallSpec, SpherePoint,
};
use crate::GRADIENT_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Volume,
    Boundary,
}

impl Formulation {
    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::Volume => "volume",
            Formulation::Boundary => "boundary",
        }
    }
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub p: f64,
    pub radius: f64,
    pub n_samples: usize,
    /// Central-difference step of the volume formulation.
    pub fd_step: f64,
    pub formulation: Formulation,
    /// Multiply boundary flux means by `|∂B_R| / |B_R|`. Ranking-only uses
    /// can drop the constant.
    pub normalize_by_volume: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            radius: 1.0,
            n_samples: 100,
            fd_step: 1e-3,
            formulation: Formulation::Boundary,
            normalize_by_volume: true,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidArgument(format!("p must be >= 1, got {}", self.p)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {}", self.radius)));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::InvalidArgument(format!("fd_step must be positive, got {}", self.fd_step)));
        }
        Ok(())
    }

    pub fn with_p(&self, p: f64) -> Self {
        Self { p, ..self.clone() }
    }

    pub fn with_formulation(&self, formulation: Formulation) -> Self {
        Self { formulation, ..self.clone() }
    }
}

/// Monte Carlo estimate of the ball-averaged p-Laplace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLaplaceEstimate {
    pub value: f64,
    /// Standard error of the mean, including any normalization factor.
    pub std_error: f64,
    pub n_used: usize,
    /// Samples skipped because the score norm fell below the floor (`p < 2`).
    pub singular_hits: usize,
}

/// `|v|^{p-2} v` in place; `false` if the weight is singular (`p < 2`, tiny `v`).
fn weight_in_place(v: &mut [f64], p: f64) -> bool {
    if p == 2.0 {
        return true;
    }
    let n = norm(v);
    if n < GRADIENT_FLOOR {
        if p < 2.0 {
            return false;
        }
        if n == 0.0 {
            return true;
        }
    }
    let w = n.powf(p - 2.0);
    v.iter_mut().for_each(|x| *x *= w);
    true
}

/// `|s(y)|^{p-2} s(y)·n`, or `None` when the sample is singular.
pub fn flux_density<F: ScoreField + ?Sized>(field: &F, y: &[f64], normal: &[f64], p: f64) -> Option<f64> {
    let mut s = field.score(y);
    flux_of_score(&mut s, normal, p)
}

fn flux_of_score(s: &mut [f64], normal: &[f64], p: f64) -> Option<f64> {
    if p == 1.0 {
        // Cosine form keeps p = 1 exactly invariant to the score magnitude.
        let n = norm(s);
        if n < GRADIENT_FLOOR {
            return None;
        }
        return Some(dot(s, normal) / n);
    }
    weight_in_place(s, p).then(|| dot(s, normal))
}

/// Central-difference divergence of `v(x) = |s(x)|^{p-2} s(x)` with step `h`:
/// `Σ_j (v_j(x + h e_j) - v_j(x - h e_j)) / 2h`. `None` if any stencil point
/// is singular.
pub fn divergence_fd<F: ScoreField + ?Sized>(field: &F, x: &[f64], p: f64, h: f64) -> Option<f64> {
    let d = x.len();
    let mut probe = x.to_vec();
    let mut v = vec![0.0; d];
    let mut total = 0.0;
    for j in 0..d {
        probe[j] = x[j] + h;
        field.score_into(&probe, &mut v);
        if !weight_in_place(&mut v, p) {
            return None;
        }
        let plus = v[j];
        probe[j] = x[j] - h;
        field.score_into(&probe, &mut v);
        if !weight_in_place(&mut v, p) {
            return None;
        }
        let minus = v[j];
        probe[j] = x[j];
        total += (plus - minus) / (2.0 * h);
    }
    Some(total)
}

fn summarize(values: &[f64], scale: f64, singular_hits: usize) -> Result<PLaplaceEstimate> {
    let n = values.len();
    if n == 0 {
        return Err(Error::AllSingular { n: singular_hits });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_error = if n > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(PLaplaceEstimate { value: scale * mean, std_error: scale.abs() * std_error, n_used: n, singular_hits })
}

fn anchor_ball<F: ScoreField + ?Sized>(field: &F, x0: &[f64], cfg: &EstimatorConfig) -> Result<BallSpec> {
    cfg.validate()?;
    check_dim(field.dim(), x0.len())?;
    BallSpec::new(x0.to_vec(), cfg.radius)
}

/// Volume formulation: mean of [`divergence_fd`] at `N` uniform points in `B_R(x0)`.
pub fn estimate_volume<F: ScoreField + ?Sized, R: Rng + ?Sized>(
    field: &F,
    x0: &[f64],
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<PLaplaceEstimate> {
    let ball = anchor_ball(field, x0, cfg)?;
    let points = sample_ball_uniform(&ball, cfg.n_samples, rng);
    let mut values = Vec::with_capacity(points.len());
    let mut singular = 0;
    for x in &points {
        match divergence_fd(field, x, cfg.p, cfg.fd_step) {
            Some(v) => values.push(v),
            None => singular += 1,
        }
    }
    summarize(&values, 1.0, singular)
}

/// Boundary formulation: `|∂B_R|/|B_R|` times the mean of [`flux_density`]
/// over `N` uniform points on `∂B_R(x0)` (factor omitted when
/// `normalize_by_volume` is off).
pub fn estimate_boundary<F: ScoreField + ?Sized, R: Rng + ?Sized>(
    field: &F,
    x0: &[f64],
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<PLaplaceEstimate> {
    let ball = anchor_ball(field, x0, cfg)?;
    let samples = sample_sphere_uniform(&ball, cfg.n_samples, rng);
    estimate_boundary_on(field, &samples, cfg)
}

/// Boundary formulation over a caller-supplied set of sphere samples.
pub fn estimate_boundary_on<F: ScoreField + ?Sized>(
    field: &F,
    samples: &[SpherePoint],
    cfg: &EstimatorConfig,
) -> Result<PLaplaceEstimate> {
    cfg.validate()?;
    let mut values = Vec::with_capacity(samples.len());
    let mut singular = 0;
    for s in samples {
        match flux_density(field, &s.point, &s.normal, cfg.p) {
            Some(v) => values.push(v),
            None => singular += 1,
        }
    }
    let scale = boundary_scale(field.dim(), cfg)?;
    summarize(&values, scale, singular)
}

pub(crate) fn boundary_scale(dim: usize, cfg: &EstimatorConfig) -> Result<f64> {
    if cfg.normalize_by_volume {
        surface_to_volume(dim, cfg.radius)
    } else {
        Ok(1.0)
    }
}

/// Dispatches on `cfg.formulation`.
pub fn estimate<F: ScoreField + ?Sized, R: Rng + ?Sized>(
    field: &F,
    x0: &[f64],
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<PLaplaceEstimate> {
    match cfg.formulation {
        Formulation::Volume => estimate_volume(field, x0, cfg, rng),
        Formulation::Boundary => estimate_boundary(field, x0, cfg, rng),
    }
}

/// Monte Carlo p-Dirichlet energy `(1/p) ∫ |s|^p` over a region, from
/// uniform samples of that region and its volume.
pub fn dirichlet_energy_mc<F: ScoreField + ?Sized>(
    field: &F,
    samples: &[Vec<f64>],
    region_volume: f64,
    p: f64,
) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no region samples".into()));
    }
    let mut s = vec![0.0; field.dim()];
    let total: f64 = samples
        .iter()
        .map(|x| {
            field.score_into(x, &mut s);
            norm(&s).powf(p)
        })
        .sum();
    Ok(total / samples.len() as f64 * region_volume / p)
}
