use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete variance-preserving schedule.
///
/// Betas may be zero (a drift-free step), in which case `α_t` can be zero and
/// the score read-out at that step is undefined.
///
/// `alphas[t] = 1 - Π_{i<=t} (1 - betas[i])` is the noise variance fraction
/// at step `t`, so `x_t = sqrt(1-α_t) x_0 + sqrt(α_t) ε` holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleRepr {
    betas: Vec<f64>,
}

impl TryFrom<ScheduleRepr> for NoiseSchedule {
    type Error = Error;

    fn try_from(repr: ScheduleRepr) -> Result<Self> {
        Self::from_betas(repr.betas)
    }
}

impl From<NoiseSchedule> for ScheduleRepr {
    fn from(s: NoiseSchedule) -> Self {
        ScheduleRepr { betas: s.betas }
    }
}

impl NoiseSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidArgument("schedule needs at least one step".into()));
        }
        if betas.iter().any(|b| !(*b >= 0.0 && *b < 1.0)) {
            return Err(Error::InvalidArgument("betas must lie in [0, 1)".into()));
        }
        let mut keep = 1.0;
        let alphas: Vec<f64> = betas
            .iter()
            .map(|b| {
                keep *= 1.0 - b;
                1.0 - keep
            })
            .collect();
        debug_assert!(alphas.windows(2).all(|w| w[0] <= w[1]));
        Ok(Self { betas, alphas })
    }

    /// `steps` betas spaced linearly from `beta_start` to `beta_end`.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("schedule needs at least one step".into()));
        }
        let betas = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        Self::from_betas(betas)
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        self.betas.get(t).copied().ok_or_else(|| self.out_of_range(t))
    }

    pub fn alpha(&self, t: usize) -> Result<f64> {
        self.alphas.get(t).copied().ok_or_else(|| self.out_of_range(t))
    }

    fn out_of_range(&self, t: usize) -> Error {
        Error::InvalidArgument(format!("timestep {t} outside [0, {})", self.len()))
    }
}

/// `sqrt(1-α) x0 + sqrt(α) ε` for a given noise vector.
pub fn perturb_with_noise(x0: &[f64], alpha: f64, eps: &[f64]) -> Vec<f64> {
    let a = (1.0 - alpha).sqrt();
    let b = alpha.sqrt();
    x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect()
}

/// Draws `ε ~ N(0, I)` and returns `(x_t, ε)`.
pub fn forward_perturb<R: Rng + ?Sized>(
    x0: &[f64],
    t: usize,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let alpha = schedule.alpha(t)?;
    let eps: Vec<f64> = (0..x0.len()).map(|_| StandardNormal.sample(rng)).collect();
    Ok((perturb_with_noise(x0, alpha, &eps), eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn alphas_are_cumulative_and_variance_preserving() {
        let s = NoiseSchedule::linear(100, 1e-3, 0.2).unwrap();
        assert_eq!(s.len(), 100);
        assert!((s.alpha(0).unwrap() - 1e-3).abs() < 1e-15);
        for w in s.alphas().windows(2) {
            assert!(w[0] < w[1]);
        }
        for &a in s.alphas() {
            assert!(a > 0.0 && a < 1.0);
            let total = (1.0 - a).sqrt().powi(2) + a.sqrt().powi(2);
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert!(s.alpha(100).is_err());
    }

    #[test]
    fn endpoints_of_the_corruption() {
        let x0 = [1.5, -2.0];
        let eps = [0.3, 0.7];
        assert_eq!(perturb_with_noise(&x0, 0.0, &eps), x0.to_vec());
        assert_eq!(perturb_with_noise(&x0, 1.0, &eps), eps.to_vec());
    }

    #[test]
    fn corrupted_variance_matches_alpha() {
        let s = NoiseSchedule::from_betas(vec![0.3]).unwrap();
        let mut rng = substream(31, 0);
        let n = 100_000;
        let mut sums = [0.0; 2];
        for _ in 0..n {
            let (xt, _) = forward_perturb(&[0.0, 0.0], 0, &s, &mut rng).unwrap();
            sums[0] += xt[0] * xt[0];
            sums[1] += xt[1] * xt[1];
        }
        for v in sums {
            assert!((v / n as f64 - 0.3).abs() < 0.01);
        }
    }

    #[test]
    fn rejects_bad_betas() {
        assert!(NoiseSchedule::from_betas(vec![]).is_err());
        assert!(NoiseSchedule::from_betas(vec![-0.1]).is_err());
        assert!(NoiseSchedule::from_betas(vec![1.0]).is_err());
    }
}
