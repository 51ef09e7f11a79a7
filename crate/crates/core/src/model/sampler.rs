use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::mlp::MlpScoreModel;
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};

/// Euler–Maruyama integration of the reverse-time VP SDE
/// `dx = [-½β x - β ∇log p_t(x)] dt + sqrt(β) dW` from `N(0, I)` at the
/// last timestep down to `t = 0`, one unit step per schedule entry:
///
/// `x ← x + ½β_t x + β_t ŝ(x, t) + sqrt(β_t) z`  (no noise on the final step).
pub fn reverse_sample<R: Rng + ?Sized>(
    model: &MlpScoreModel,
    schedule: &NoiseSchedule,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let d = model.input_dim();
    let mut eps_hat = vec![0.0; d];
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for t in (0..schedule.len()).rev() {
            let beta = schedule.beta(t)?;
            if beta > 0.0 {
                let alpha = schedule.alpha(t)?;
                model.predict_noise_into(&x, t, &mut eps_hat);
                let inv_sqrt_alpha = 1.0 / alpha.sqrt();
                for (xi, e) in x.iter_mut().zip(&eps_hat) {
                    *xi += 0.5 * beta * *xi - beta * e * inv_sqrt_alpha;
                }
            }
            if t > 0 {
                let sd = beta.sqrt();
                for xi in x.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *xi += sd * z;
                }
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::SamplingDiverged { step: t });
            }
        }
        samples.push(x);
    }
    Ok(samples)
}
