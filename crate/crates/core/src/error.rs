use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("measure overflow for dim {dim}, radius {radius}")]
    Overflow { dim: usize, radius: f64 },

    #[error("gradient norm {norm:e} below singularity floor for p = {p}")]
    Singular { p: f64, norm: f64 },

    #[error("all {n} samples were singular")]
    AllSingular { n: usize },

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("non-finite state during reverse sampling at step {step}")]
    SamplingDiverged { step: usize },

    #[error("noise level is zero at timestep {t}")]
    ZeroNoiseLevel { t: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
