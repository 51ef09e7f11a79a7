use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{MlpConfig, MlpScoreModel};
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "plaplace-mlp";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk form of a trained model and the schedule it was trained with.
///
/// Matrices are row-major: `w1` is `hidden_width × (input_dim + embed_dim)`
/// with the data coordinates first, `w2` is `input_dim × hidden_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCheckpoint {
    pub format: String,
    pub version: u32,
    pub input_dim: usize,
    pub model: MlpConfig,
    pub betas: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl ModelCheckpoint {
    pub fn new(model: &MlpScoreModel, schedule: &NoiseSchedule) -> Self {
        let (w1, b1, w2, b2) = model.weights();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            input_dim: model.input_dim(),
            model: model.config().clone(),
            betas: schedule.betas().to_vec(),
            w1: w1.to_vec(),
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2: b2.to_vec(),
        }
    }

    pub fn into_parts(self) -> Result<(MlpScoreModel, NoiseSchedule)> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported checkpoint {} v{}", self.format, self.version)));
        }
        let schedule = NoiseSchedule::from_betas(self.betas)?;
        let model = MlpScoreModel::from_parts(
            self.input_dim,
            self.model,
            schedule.len(),
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
        )?;
        Ok((model, schedule))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
