//! Analytic isotropic Gaussian mixtures: log-density, score, Hessian and the
//! exact pointwise p-Laplace of the log-density.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::field::ScoreField;
use crate::GRADIENT_FLOOR;

/// `Σ_k w_k N(x; μ_k, σ² I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmParams {
    pub means: Vec<Vec<f64>>,
    pub sigma2: f64,
    pub weights: Vec<f64>,
}

impl GmmParams {
    pub fn new(means: Vec<Vec<f64>>, sigma2: f64, weights: Vec<f64>) -> Result<Self> {
        let g = Self { means, sigma2, weights };
        g.validate()?;
        Ok(g)
    }

    /// Equal-weight mixture.
    pub fn equal_weights(means: Vec<Vec<f64>>, sigma2: f64) -> Result<Self> {
        let k = means.len().max(1);
        let weights = vec![1.0 / k as f64; means.len()];
        Self::new(means, sigma2, weights)
    }

    /// `k` equal-weight components in `dim` dimensions with means uniform in
    /// `[-half_width, half_width]^dim`.
    pub fn random<R: Rng + ?Sized>(k: usize, dim: usize, sigma2: f64, half_width: f64, rng: &mut R) -> Result<Self> {
        let means = (0..k).map(|_| (0..dim).map(|_| rng.random_range(-half_width..=half_width)).collect()).collect();
        Self::equal_weights(means, sigma2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.means.is_empty() {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        let d = self.means[0].len();
        if d == 0 {
            return Err(Error::InvalidArgument("mixture dimension must be >= 1".into()));
        }
        for m in &self.means {
            check_dim(d, m.len())?;
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("mixture means must be finite".into()));
            }
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if self.weights.len() != self.means.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} components",
                self.weights.len(),
                self.means.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument("mixture weights must be positive".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn n_components(&self) -> usize {
        self.means.len()
    }

    /// The density of `sqrt(1-α) x0 + sqrt(α) ε` for `x0` drawn from this mixture.
    pub fn perturbed(&self, alpha: f64) -> Result<PerturbedGmm> {
        PerturbedGmm::new(self.clone(), alpha)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let sigma = self.sigma2.sqrt();
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut k = self.weights.len() - 1;
                for (i, w) in self.weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        k = i;
                        break;
                    }
                }
                self.means[k]
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + sigma * z
                    })
                    .collect()
            })
            .collect()
    }

    /// Per-component log terms `log w_k + log N(x; μ_k, σ² I)`.
    fn log_terms(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim() as f64;
        let log_norm = -0.5 * d * (2.0 * std::f64::consts::PI * self.sigma2).ln();
        self.means
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| {
                let sq: f64 = m.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                w.ln() + log_norm - 0.5 * sq / self.sigma2
            })
            .collect()
    }

    /// Posterior component probabilities at `x`.
    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let terms = self.log_terms(x);
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = terms.iter().map(|t| (t - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    /// `log p(x)` via log-sum-exp.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(log_sum_exp(&self.log_terms(x)))
    }

    /// `∇ log p(x) = Σ_k r_k(x) (μ_k - x) / σ²`.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; self.dim()];
        self.score_unchecked(x, &mut out);
        Ok(out)
    }

    fn score_unchecked(&self, x: &[f64], out: &mut [f64]) {
        let r = self.responsibilities(x);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (m, rk) in self.means.iter().zip(&r) {
            for ((o, mj), xj) in out.iter_mut().zip(m).zip(x) {
                *o += rk * (mj - xj) / self.sigma2;
            }
        }
    }

    /// Hessian of `log p` at `x`, row-major `dim × dim`:
    /// `-I/σ² + Σ_k r_k g_k g_kᵀ - s sᵀ` with `g_k = (μ_k - x)/σ²`.
    pub fn hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let d = self.dim();
        let r = self.responsibilities(x);
        let mut s = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        for (m, rk) in self.means.iter().zip(&r) {
            let g: Vec<f64> = m.iter().zip(x).map(|(mj, xj)| (mj - xj) / self.sigma2).collect();
            for i in 0..d {
                s[i] += rk * g[i];
                for j in 0..d {
                    h[i * d + j] += rk * g[i] * g[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                h[i * d + j] -= s[i] * s[j];
            }
            h[i * d + i] -= 1.0 / self.sigma2;
        }
        Ok(h)
    }

    /// Exact `Δ_p log p(x)` from the analytic gradient and Hessian.
    pub fn pointwise_p_laplace_exact(&self, x: &[f64], p: f64) -> Result<f64> {
        let s = self.score(x)?;
        let h = self.hessian(x)?;
        p_laplace_from_derivatives(&s, &h, p)
    }
}

impl ScoreField for GmmParams {
    fn dim(&self) -> usize {
        GmmParams::dim(self)
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        self.score_unchecked(x, out)
    }
}

/// `p_α`: a base mixture pushed through the forward corruption at noise level α.
///
/// Means scale by `sqrt(1-α)` and the component variance becomes
/// `(1-α) σ² + α`, so `p_α` is again an isotropic mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedGmm {
    base: GmmParams,
    alpha: f64,
    effective: GmmParams,
}

impl PerturbedGmm {
    pub fn new(base: GmmParams, alpha: f64) -> Result<Self> {
        base.validate()?;
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1), got {alpha}")));
        }
        let scale = (1.0 - alpha).sqrt();
        let effective = GmmParams {
            means: base.means.iter().map(|m| m.iter().map(|v| scale * v).collect()).collect(),
            sigma2: (1.0 - alpha) * base.sigma2 + alpha,
            weights: base.weights.clone(),
        };
        Ok(Self { base, alpha, effective })
    }

    pub fn base(&self) -> &GmmParams {
        &self.base
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The equivalent plain mixture.
    pub fn effective(&self) -> &GmmParams {
        &self.effective
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.effective.log_density(x)
    }

    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.effective.score(x)
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.effective.hessian(x)
    }

    pub fn pointwise_p_laplace_exact(&self, x: &[f64], p: f64) -> Result<f64> {
        self.effective.pointwise_p_laplace_exact(x, p)
    }
}

impl ScoreField for PerturbedGmm {
    fn dim(&self) -> usize {
        self.effective.dim()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        self.effective.score_unchecked(x, out)
    }
}

/// `|∇u|^{p-2} (Δu + (p-2) ∇uᵀ H ∇u / |∇u|²)` from a gradient and a
/// row-major Hessian.
///
/// For `p < 2` a gradient below [`GRADIENT_FLOOR`] is reported as
/// [`Error::Singular`]. For `p > 2` the operator vanishes at critical points.
pub fn p_laplace_from_derivatives(grad: &[f64], hess: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    let d = grad.len();
    check_dim(d * d, hess.len())?;
    let trace: f64 = (0..d).map(|i| hess[i * d + i]).sum();
    if p == 2.0 {
        return Ok(trace);
    }
    let g2: f64 = grad.iter().map(|g| g * g).sum();
    let gnorm = g2.sqrt();
    if gnorm < GRADIENT_FLOOR {
        if p < 2.0 {
            return Err(Error::Singular { p, norm: gnorm });
        }
        if gnorm == 0.0 {
            return Ok(0.0);
        }
    }
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += grad[i] * hess[i * d + j] * grad[j];
        }
    }
    Ok(gnorm.powf(p - 2.0) * (trace + (p - 2.0) * quad / g2))
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    fn single(mu: Vec<f64>, sigma2: f64) -> GmmParams {
        GmmParams::new(vec![mu], sigma2, vec![1.0]).unwrap()
    }

    /// Direct summation of the mixture density, no log-space tricks.
    fn density_direct(g: &GmmParams, x: &[f64]) -> f64 {
        let d = g.dim() as f64;
        g.means
            .iter()
            .zip(&g.weights)
            .map(|(m, w)| {
                let sq: f64 = m.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                w * (2.0 * std::f64::consts::PI * g.sigma2).powf(-0.5 * d) * (-0.5 * sq / g.sigma2).exp()
            })
            .sum()
    }

    #[test]
    fn log_density_at_single_mode() {
        let g = single(vec![1.0, -2.0, 0.5], 0.7);
        let expected = -1.5 * (2.0 * std::f64::consts::PI * 0.7).ln();
        assert_relative_eq!(g.log_density(&[1.0, -2.0, 0.5]).unwrap(), expected, max_relative = 1e-14);
    }

    #[test]
    fn symmetric_pair_at_origin_equals_single_component() {
        let g = GmmParams::equal_weights(vec![vec![2.0, 1.0], vec![-2.0, -1.0]], 1.3).unwrap();
        let s = single(vec![2.0, 1.0], 1.3);
        assert_relative_eq!(
            g.log_density(&[0.0, 0.0]).unwrap(),
            s.log_density(&[0.0, 0.0]).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn log_density_matches_direct_sum() {
        let mut rng = substream(21, 0);
        let g = GmmParams::random(3, 2, 1.0, 5.0, &mut rng).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-6.0..6.0)).collect();
            assert_relative_eq!(g.log_density(&x).unwrap(), density_direct(&g, &x).ln(), max_relative = 1e-10);
        }
    }

    #[test]
    fn log_density_stays_finite_far_away() {
        let g = single(vec![0.0, 0.0], 1e-2);
        let v = g.log_density(&[1e3, 1e3]).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn single_component_score() {
        let g = single(vec![1.0, 2.0], 0.5);
        let s = g.score(&[0.0, 3.0]).unwrap();
        assert_eq!(s, vec![2.0, -2.0]);
    }

    #[test]
    fn score_vanishes_at_mode_of_symmetric_mixture() {
        // Well-separated symmetric pair: each mode sits at a critical point up
        // to the (negligible) pull of the other component.
        let g = GmmParams::equal_weights(vec![vec![-20.0, 0.0], vec![20.0, 0.0]], 1.0).unwrap();
        let s = g.score(&[20.0, 0.0]).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-10), "{s:?}");
        let s = g.score(&[0.0, 0.0]).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-10), "{s:?}");
    }

    #[test]
    fn p2_is_minus_d_over_sigma2_for_single_gaussian() {
        let g = single(vec![0.5, -0.5, 1.0], 2.0);
        for x in [[0.0, 0.0, 0.0], [3.0, -1.0, 2.0]] {
            assert_relative_eq!(g.pointwise_p_laplace_exact(&x, 2.0).unwrap(), -1.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn p1_single_gaussian_is_minus_d_minus_1_over_r() {
        let g = single(vec![1.0, 1.0, 1.0], 0.3);
        let x = [2.0, 3.0, -1.0];
        let r = ((1.0f64) + 4.0 + 4.0).sqrt();
        assert_relative_eq!(g.pointwise_p_laplace_exact(&x, 1.0).unwrap(), -2.0 / r, max_relative = 1e-12);
    }

    #[test]
    fn singular_for_p_below_two_at_critical_point() {
        let g = single(vec![0.0, 0.0], 1.0);
        assert!(matches!(g.pointwise_p_laplace_exact(&[0.0, 0.0], 1.0), Err(Error::Singular { .. })));
        assert_eq!(g.pointwise_p_laplace_exact(&[0.0, 0.0], 3.0).unwrap(), 0.0);
    }

    #[test]
    fn hessian_is_symmetric_and_matches_score_differences() {
        let mut rng = substream(22, 0);
        let g = GmmParams::random(3, 3, 0.8, 2.0, &mut rng).unwrap();
        let x = [0.3, -0.4, 0.9];
        let h = g.hessian(&x).unwrap();
        let step = 1e-5;
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += step;
            xm[j] -= step;
            let sp = g.score(&xp).unwrap();
            let sm = g.score(&xm).unwrap();
            for i in 0..3 {
                let fd = (sp[i] - sm[i]) / (2.0 * step);
                assert_relative_eq!(h[i * 3 + j], fd, epsilon = 1e-7, max_relative = 1e-6);
                assert_relative_eq!(h[i * 3 + j], h[j * 3 + i], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn perturbation_rescales_means_and_variance() {
        let g = GmmParams::equal_weights(vec![vec![2.0, 0.0], vec![0.0, -4.0]], 1.5).unwrap();
        let p = g.perturbed(0.36).unwrap();
        assert_relative_eq!(p.effective().means[1][1], -3.2, max_relative = 1e-14);
        assert_relative_eq!(p.effective().sigma2, 0.64 * 1.5 + 0.36, max_relative = 1e-14);
        assert_eq!(g.perturbed(0.0).unwrap().effective(), &g);
        assert!(g.perturbed(1.0).is_err());
    }

    #[test]
    fn validation_catches_bad_params() {
        assert!(GmmParams::new(vec![vec![0.0], vec![1.0]], 1.0, vec![0.5, 0.6]).is_err());
        assert!(GmmParams::new(vec![vec![0.0], vec![1.0, 2.0]], 1.0, vec![0.5, 0.5]).is_err());
        assert!(GmmParams::new(vec![vec![0.0]], 0.0, vec![1.0]).is_err());
        assert!(single(vec![0.0], 1.0).log_density(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn sampling_follows_weights() {
        let g = GmmParams::new(vec![vec![-10.0], vec![10.0]], 1.0, vec![0.25, 0.75]).unwrap();
        let mut rng = substream(23, 0);
        let xs = g.sample(20_000, &mut rng);
        let frac = xs.iter().filter(|x| x[0] > 0.0).count() as f64 / xs.len() as f64;
        assert!((frac - 0.75).abs() < 0.02);
    }

    #[test]
    fn json_round_trip() {
        let g = GmmParams::equal_weights(vec![vec![0.1, 0.2], vec![-3.0, 4.0]], 1.0).unwrap();
        let back: GmmParams = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(g, back);
    }
}
