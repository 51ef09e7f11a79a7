//! TOML experiment configuration with strict key checking.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::GmmParams;
use crate::model::{MlpConfig, NoiseSchedule, TrainConfig};
use crate::plaplace::EstimatorConfig;
use crate::rng::{streams, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Fidelity,
    Memorization,
    Bounds,
}

/// Mixture used as ground truth. Means are drawn uniformly from
/// `[-half_width, half_width]^dim` with `seed` unless given explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmmConfig {
    pub components: usize,
    pub dim: usize,
    pub sigma2: f64,
    pub half_width: f64,
    pub seed: u64,
    pub means: Option<Vec<Vec<f64>>>,
    pub weights: Option<Vec<f64>>,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self { components: 3, dim: 2, sigma2: 1.0, half_width: 5.0, seed: 1, means: None, weights: None }
    }
}

impl GmmConfig {
    pub fn build(&self) -> Result<GmmParams> {
        let means = match &self.means {
            Some(m) => m.clone(),
            None => {
                let mut rng = substream(self.seed, streams::GMM);
                GmmParams::random(self.components, self.dim, self.sigma2, self.half_width, &mut rng)?.means
            }
        };
        match &self.weights {
            Some(w) => GmmParams::new(means, self.sigma2, w.clone()),
            None => GmmParams::equal_weights(means, self.sigma2),
        }
    }
}

/// Linear β schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { steps: 100, beta_start: 1e-4, beta_end: 0.02 }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.steps, self.beta_start, self.beta_end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// Mixture draws used as training data (fidelity, bounds, `train`).
    pub n_train: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// One SGD step per epoch over the whole data set; overrides `batch_size`.
    pub full_batch: bool,
    pub model: MlpConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            n_train: 1000,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size.unwrap_or(16),
            full_batch: false,
            model: t.model,
        }
    }
}

impl TrainingConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: if self.full_batch { None } else { Some(self.batch_size) },
            seed,
            model: self.model.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FidelityConfig {
    pub repetitions: usize,
    /// Pointwise exact values averaged per anchor for the reference.
    pub exact_samples: usize,
    pub p_values: Vec<f64>,
    /// Explicit anchors; default is the mixture modes plus the midpoints of
    /// every pair of means.
    pub anchors: Option<Vec<Vec<f64>>>,
    /// Side of the square lattice on which learned and true scores are compared.
    pub eval_grid: usize,
    /// Train a model and repeat every estimate on the learned field.
    pub learned: bool,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        Self {
            repetitions: 100,
            exact_samples: 1_000_000,
            p_values: vec![1.0, 2.0, 3.0],
            anchors: None,
            eval_grid: 20,
            learned: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemorizationConfig {
    pub n_base: usize,
    pub n_replicas: usize,
    pub p_values: Vec<f64>,
    pub grid_size: usize,
    /// Grid covers the bounding box of the means grown by this many σ.
    pub grid_inflate_sigmas: f64,
    /// Fresh mixture draws used as the non-memorized class for AUC.
    pub n_background: usize,
    /// Also run every seed with zero replicas.
    pub null_control: bool,
}

impl Default for MemorizationConfig {
    fn default() -> Self {
        Self {
            n_base: 1000,
            n_replicas: 250,
            p_values: vec![1.0, 2.0, 3.0],
            grid_size: 40,
            grid_inflate_sigmas: 2.0,
            n_background: 200,
            null_control: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    /// Anchors drawn from the trained model with the reverse sampler.
    pub n_anchors: usize,
    pub p_values: Vec<f64>,
    /// Replace the learned field by the true one (every error must vanish).
    pub self_test: bool,
    /// Resolution of the exported δ × m bound surface.
    pub surface_points: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { n_anchors: 64, p_values: vec![1.0, 2.0, 3.0], self_test: false, surface_points: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    pub n: usize,
    /// Checkpoint to sample from; a model is trained first when absent.
    pub checkpoint: Option<PathBuf>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { n: 1000, checkpoint: None }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub gmm: GmmConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub fidelity: FidelityConfig,
    #[serde(default)]
    pub memorization: MemorizationConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub sample: SampleConfig,
}

impl ExperimentConfig {
    /// All defaults for the given experiment.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            seeds: default_seeds(),
            output_dir: None,
            gmm: GmmConfig::default(),
            schedule: ScheduleConfig::default(),
            training: TrainingConfig::default(),
            estimator: EstimatorConfig::default(),
            fidelity: FidelityConfig::default(),
            memorization: MemorizationConfig::default(),
            bounds: BoundsConfig::default(),
            sample: SampleConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        self.gmm.build()?;
        self.schedule.build()?;
        self.training.train_config(0).validate()?;
        if self.training.n_train == 0 {
            return bad("training.n_train must be >= 1");
        }
        self.estimator.validate()?;
        let p_lists = [&self.fidelity.p_values, &self.memorization.p_values, &self.bounds.p_values];
        for ps in p_lists {
            if ps.is_empty() || ps.iter().any(|p| !(*p >= 1.0 && p.is_finite())) {
                return bad("p_values must be a nonempty list of reals >= 1");
            }
        }
        if self.fidelity.repetitions < 2 || self.fidelity.exact_samples < 2 || self.fidelity.eval_grid == 0 {
            return bad("fidelity needs repetitions >= 2, exact_samples >= 2, eval_grid >= 1");
        }
        if let Some(anchors) = &self.fidelity.anchors {
            if anchors.is_empty() || anchors.iter().any(|a| a.len() != self.gmm.dim) {
                return bad("fidelity.anchors must be nonempty points of the mixture dimension");
            }
        }
        let m = &self.memorization;
        if m.n_base == 0 || m.grid_size == 0 || m.n_background == 0 || !(m.grid_inflate_sigmas >= 0.0) {
            return bad("memorization needs n_base, grid_size, n_background >= 1 and grid_inflate_sigmas >= 0");
        }
        if self.bounds.n_anchors == 0 || self.bounds.surface_points < 2 {
            return bad("bounds needs n_anchors >= 1 and surface_points >= 2");
        }
        if self.sample.n == 0 {
            return bad("sample.n must be >= 1");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("experiment = \"memorization\"\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::new(ExperimentKind::Memorization));
        assert_eq!(cfg.memorization.n_replicas, 250);
        assert_eq!(cfg.training.epochs, 500);
        assert_eq!(cfg.estimator.n_samples, 100);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "experiment = \"bounds\"\nsedes = [1]\n",
            "experiment = \"bounds\"\n[estimator]\nradus = 2.0\n",
            "experiment = \"bounds\"\n[training.model]\nwidth = 3\n",
        ] {
            assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::from_toml("experiment = \"bounds\"\n[estimator]\np = 0.5\n").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"bounds\"\nseeds = []\n").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"bounds\"\n[gmm]\nsigma2 = -1.0\n").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Fidelity);
        cfg.gmm.means = Some(vec![vec![0.0, 1.0], vec![2.0, -1.5]]);
        cfg.fidelity.anchors = Some(vec![vec![0.25, 0.5]]);
        cfg.training.full_batch = true;
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn explicit_means_override_the_seed() {
        let mut g = GmmConfig { means: Some(vec![vec![1.0, 2.0]]), ..GmmConfig::default() };
        assert_eq!(g.build().unwrap().means, vec![vec![1.0, 2.0]]);
        g.means = None;
        let a = g.build().unwrap();
        assert_eq!(a.n_components(), 3);
        assert_eq!(a, g.build().unwrap());
    }
}
