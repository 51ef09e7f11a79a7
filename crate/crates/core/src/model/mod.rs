//! A small denoising diffusion model for low-dimensional data.
//!
//! The pieces are the variance-preserving noise schedule, the forward
//! corruption, a one-hidden-layer noise predictor with sinusoidal time
//! embeddings trained by hand-written backpropagation and plain SGD, the
//! score read-out `ŝ = -ε̂ / sqrt(α_t)`, and an Euler–Maruyama reverse sampler.

mod checkpoint;
mod mlp;
mod sampler;
mod schedule;
mod train;

pub use checkpoint::ModelCheckpoint;
pub use mlp::{sinusoidal_embed, Activation, Gradients, MlpConfig, MlpScoreModel, TrainingExample};
pub use sampler::reverse_sample;
pub use schedule::{forward_perturb, perturb_with_noise, NoiseSchedule};
pub use train::{train, TrainConfig, TrainReport};

use crate::error::{Error, Result};
use crate::field::ScoreField;

/// The score `-ε̂(x, t) / sqrt(α_t)` of a trained model frozen at timestep `t`.
#[derive(Debug, Clone, Copy)]
pub struct LearnedScore<'a> {
    model: &'a MlpScoreModel,
    t: usize,
    inv_sqrt_alpha: f64,
}

impl<'a> LearnedScore<'a> {
    pub fn new(model: &'a MlpScoreModel, schedule: &NoiseSchedule, t: usize) -> Result<Self> {
        let alpha = schedule.alpha(t)?;
        if !(alpha > 0.0) {
            return Err(Error::ZeroNoiseLevel { t });
        }
        Ok(Self { model, t, inv_sqrt_alpha: 1.0 / alpha.sqrt() })
    }

    /// The score at the least noisy trained step, `t = 0`.
    pub fn last_step(model: &'a MlpScoreModel, schedule: &NoiseSchedule) -> Result<Self> {
        Self::new(model, schedule, 0)
    }

    pub fn timestep(&self) -> usize {
        self.t
    }
}

impl ScoreField for LearnedScore<'_> {
    fn dim(&self) -> usize {
        self.model.input_dim()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        self.model.predict_noise_into(x, self.t, out);
        out.iter_mut().for_each(|v| *v *= -self.inv_sqrt_alpha);
    }
}

/// Score of a model at timestep `t`: `-ε̂(x, t) / sqrt(α_t)`.
pub fn learned_score(model: &MlpScoreModel, schedule: &NoiseSchedule, x: &[f64], t: usize) -> Result<Vec<f64>> {
    crate::error::check_dim(model.input_dim(), x.len())?;
    Ok(LearnedScore::new(model, schedule, t)?.score(x))
}
