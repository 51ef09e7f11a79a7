use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{MlpConfig, MlpScoreModel, TrainingExample};
use super::schedule::{forward_perturb, NoiseSchedule};
use crate::error::{check_dim, Error, Result};
use crate::rng::{streams, substream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Minibatch size; `None` trains full-batch (one step per epoch).
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub model: MlpConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 500, learning_rate: 1e-3, batch_size: Some(16), seed: 0, model: MlpConfig::default() }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        self.model.validate()
    }
}

/// Per-epoch mean training loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

/// Fits the noise predictor by minimizing `‖ε̂(x_t, t) - ε‖²` over fresh
/// `(t, ε)` draws for every data point in every epoch, with plain SGD.
pub fn train(data: &[Vec<f64>], schedule: &NoiseSchedule, cfg: &TrainConfig) -> Result<(MlpScoreModel, TrainReport)> {
    cfg.validate()?;
    let first = data.first().ok_or_else(|| Error::InvalidArgument("training data is empty".into()))?;
    let dim = first.len();
    for x in data {
        check_dim(dim, x.len())?;
    }
    let mut rng = substream(cfg.seed, streams::TRAIN);
    let mut model = MlpScoreModel::new(dim, cfg.model.clone(), schedule.len(), &mut rng)?;
    let batch_size = cfg.batch_size.unwrap_or(data.len()).min(data.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; model.n_params()];
    let mut batch = Vec::with_capacity(batch_size);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch_size) {
            batch.clear();
            for &i in chunk {
                let t = rng.random_range(0..schedule.len());
                let (x_t, eps) = forward_perturb(&data[i], t, schedule, &mut rng)?;
                batch.push(TrainingExample { x_t, t, eps });
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = model.accumulate_grad(&batch, &mut grad);
            for (p, g) in model.params_mut().iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
            epoch_loss += loss * chunk.len() as f64;
        }
        let epoch_loss = epoch_loss / data.len() as f64;
        if !epoch_loss.is_finite() || model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::TrainingDiverged { epoch, loss: epoch_loss });
        }
        epoch_losses.push(epoch_loss);
    }
    Ok((model, TrainReport { epoch_losses }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_weights() {
        let data: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.1, -1.0]).collect();
        let schedule = NoiseSchedule::linear(20, 1e-3, 0.2).unwrap();
        let cfg = TrainConfig { epochs: 3, batch_size: Some(8), ..TrainConfig::default() };
        let (a, _) = train(&data, &schedule, &cfg).unwrap();
        let (b, _) = train(&data, &schedule, &cfg).unwrap();
        assert_eq!(a.params(), b.params());
        let (c, _) = train(&data, &schedule, &TrainConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let data: Vec<Vec<f64>> = (0..20).map(|i| vec![1e3 * i as f64, 0.0]).collect();
        let schedule = NoiseSchedule::linear(10, 1e-3, 0.2).unwrap();
        let cfg = TrainConfig { epochs: 50, learning_rate: 10.0, batch_size: Some(4), ..TrainConfig::default() };
        match train(&data, &schedule, &cfg) {
            Err(Error::TrainingDiverged { epoch, .. }) => assert!(epoch < 50),
            other => panic!("expected divergence, got {:?}", other.map(|(_, r)| r)),
        }
    }

    #[test]
    fn rejects_empty_or_ragged_data() {
        let schedule = NoiseSchedule::linear(10, 1e-3, 0.2).unwrap();
        let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
        assert!(train(&[], &schedule, &cfg).is_err());
        assert!(train(&[vec![0.0, 1.0], vec![1.0]], &schedule, &cfg).is_err());
    }
}
