//! Measures of d-balls and d-spheres, and uniform sampling on and inside them.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A closed ball `B_R(center)` in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSpec {
    center: Vec<f64>,
    radius: f64,
}

impl BallSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidArgument("ball dimension must be >= 1".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("ball center must be finite".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// A point on a sphere together with its outward unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
}

fn check_measure_args(dim: usize, radius: f64) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    Ok(())
}

fn finite_measure(value: f64, dim: usize, radius: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow { dim, radius })
    }
}

/// Volume `π^{d/2} R^d / Γ(d/2 + 1)` of a `dim`-ball, evaluated in log space.
pub fn ball_volume(dim: usize, radius: f64) -> Result<f64> {
    check_measure_args(dim, radius)?;
    let d = dim as f64;
    let log_v = 0.5 * d * std::f64::consts::PI.ln() + d * radius.ln() - libm::lgamma(0.5 * d + 1.0);
    finite_measure(log_v.exp(), dim, radius)
}

/// Surface measure `2 π^{d/2} R^{d-1} / Γ(d/2)` of the sphere bounding a `dim`-ball.
pub fn sphere_area(dim: usize, radius: f64) -> Result<f64> {
    check_measure_args(dim, radius)?;
    let d = dim as f64;
    let log_a =
        std::f64::consts::LN_2 + 0.5 * d * std::f64::consts::PI.ln() + (d - 1.0) * radius.ln() - libm::lgamma(0.5 * d);
    finite_measure(log_a.exp(), dim, radius)
}

/// `|∂B_R| / |B_R|`, the normalization applied to boundary flux averages.
///
/// Computed from the two log-measures directly so it stays finite even where
/// the individual measures under- or overflow; it equals `dim / radius`.
pub fn surface_to_volume(dim: usize, radius: f64) -> Result<f64> {
    check_measure_args(dim, radius)?;
    let d = dim as f64;
    let log_ratio = std::f64::consts::LN_2 - radius.ln() + libm::lgamma(0.5 * d + 1.0) - libm::lgamma(0.5 * d);
    finite_measure(log_ratio.exp(), dim, radius)
}

/// Standard normal vector normalized to unit length (uniform direction).
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `n` points uniform on `∂B_R(center)`, each with its outward normal `(y - center) / R`.
pub fn sample_sphere_uniform<R: Rng + ?Sized>(spec: &BallSpec, n: usize, rng: &mut R) -> Vec<SpherePoint> {
    (0..n)
        .map(|_| {
            let normal = random_unit_vector(spec.dim(), rng);
            let point = spec.center.iter().zip(&normal).map(|(c, u)| c + spec.radius * u).collect();
            SpherePoint { point, normal }
        })
        .collect()
}

/// `n` points uniform in `B_R(center)`: uniform direction, radius `R * U^{1/d}`.
pub fn sample_ball_uniform<R: Rng + ?Sized>(spec: &BallSpec, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let inv_d = 1.0 / spec.dim() as f64;
    (0..n)
        .map(|_| {
            let dir = random_unit_vector(spec.dim(), rng);
            let u: f64 = rng.random();
            let r = spec.radius * u.powf(inv_d);
            spec.center.iter().zip(&dir).map(|(c, d)| c + r * d).collect()
        })
        .collect()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn measures_match_closed_forms() {
        assert_relative_eq!(ball_volume(2, 1.0).unwrap(), PI, max_relative = 1e-13);
        assert_relative_eq!(ball_volume(1, 2.0).unwrap(), 4.0, max_relative = 1e-13);
        assert_relative_eq!(ball_volume(3, 1.0).unwrap(), 4.0 * PI / 3.0, max_relative = 1e-13);
        assert_relative_eq!(sphere_area(2, 1.0).unwrap(), 2.0 * PI, max_relative = 1e-13);
        assert_relative_eq!(sphere_area(3, 2.0).unwrap(), 16.0 * PI, max_relative = 1e-13);
        assert_relative_eq!(sphere_area(2, 1.0).unwrap() / ball_volume(2, 1.0).unwrap(), 2.0, max_relative = 1e-13);
    }

    #[test]
    fn one_dimensional_sphere_is_two_points() {
        assert_relative_eq!(sphere_area(1, 3.0).unwrap(), 2.0, max_relative = 1e-13);
    }

    #[test]
    fn large_dimension_uses_log_gamma() {
        // Γ(d/2 + 1) overflows f64 for d > ~340; the log-space form does not.
        let v = ball_volume(400, 1.0).unwrap();
        assert!(v > 0.0 && v < 1e-100);
        assert_relative_eq!(surface_to_volume(400, 1.0).unwrap(), 400.0, max_relative = 1e-10);
    }

    #[test]
    fn overflow_is_an_error() {
        assert!(matches!(ball_volume(2, 1e300), Err(Error::Overflow { .. })));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(ball_volume(0, 1.0).is_err());
        assert!(sphere_area(2, 0.0).is_err());
        assert!(sphere_area(2, -1.0).is_err());
        assert!(BallSpec::new(vec![], 1.0).is_err());
        assert!(BallSpec::new(vec![0.0], f64::NAN).is_err());
    }

    #[test]
    fn sphere_samples_have_exact_radius_and_outward_normals() {
        let spec = BallSpec::new(vec![1.5, -2.0, 0.25], 0.7).unwrap();
        let mut rng = substream(3, 0);
        for s in sample_sphere_uniform(&spec, 500, &mut rng) {
            let r = distance(&s.point, spec.center());
            assert!((r - 0.7).abs() / 0.7 < 1e-12);
            let radial: Vec<f64> = s.point.iter().zip(spec.center()).map(|(y, c)| (y - c) / 0.7).collect();
            assert_relative_eq!(dot(&s.normal, &radial), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sphere_mean_converges_to_center() {
        let spec = BallSpec::new(vec![0.0, 0.0], 1.0).unwrap();
        let mut rng = substream(11, 0);
        let n = 100_000;
        let pts = sample_sphere_uniform(&spec, n, &mut rng);
        for j in 0..2 {
            let mean = pts.iter().map(|s| s.point[j]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 0.02, "coordinate {j} mean {mean}");
        }
    }

    #[test]
    fn ball_samples_fill_disk_by_area() {
        let spec = BallSpec::new(vec![0.0, 0.0], 1.0).unwrap();
        let mut rng = substream(12, 0);
        let n = 100_000;
        let pts = sample_ball_uniform(&spec, n, &mut rng);
        assert!(pts.iter().all(|p| norm(p) <= 1.0));
        let inner = pts.iter().filter(|p| norm(p) <= 0.5).count() as f64 / n as f64;
        assert!((inner - 0.25).abs() < 0.01, "inner fraction {inner}");
    }

    #[test]
    fn one_dimensional_ball_is_uniform_interval() {
        let spec = BallSpec::new(vec![0.0], 1.0).unwrap();
        let mut rng = substream(13, 0);
        let n = 100_000;
        let mean_abs = sample_ball_uniform(&spec, n, &mut rng).iter().map(|p| p[0].abs()).sum::<f64>() / n as f64;
        assert!((mean_abs - 0.5).abs() < 0.01);
    }

    #[test]
    fn identical_seeds_are_bit_identical() {
        let spec = BallSpec::new(vec![0.3, 0.1, -0.2], 2.0).unwrap();
        let a = sample_ball_uniform(&spec, 64, &mut substream(5, 1));
        let b = sample_ball_uniform(&spec, 64, &mut substream(5, 1));
        assert_eq!(a, b);
        let a = sample_sphere_uniform(&spec, 64, &mut substream(5, 2));
        let b = sample_sphere_uniform(&spec, 64, &mut substream(5, 2));
        assert_eq!(a, b);
    }
}
