use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer nonlinearity. Both choices are smooth so the learned score
/// field can be finite-differenced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Silu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Silu => z / (1.0 + (-z).exp()),
        }
    }

    /// Derivative given the pre-activation and the activation value.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Silu => {
                let sig = 1.0 / (1.0 + (-z).exp());
                sig * (1.0 + z * (1.0 - sig))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub hidden_width: usize,
    pub embed_dim: usize,
    /// Geometric frequency base of the time embedding.
    pub embed_base: f64,
    pub activation: Activation,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden_width: 128, embed_dim: 32, embed_base: 10_000.0, activation: Activation::Tanh }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 {
            return Err(Error::InvalidArgument("hidden_width must be >= 1".into()));
        }
        if self.embed_dim == 0 || !self.embed_dim.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "embed_dim must be a positive even number, got {}",
                self.embed_dim
            )));
        }
        if !(self.embed_base > 1.0) {
            return Err(Error::InvalidArgument("embed_base must exceed 1".into()));
        }
        Ok(())
    }
}

/// Sinusoidal embedding of a timestep: `dim / 2` pairs `(sin(t ω_j), cos(t ω_j))`
/// with `ω_j = base^{-j / (dim/2)}`.
pub fn sinusoidal_embed(t: usize, dim: usize, base: f64) -> Vec<f64> {
    assert!(dim.is_multiple_of(2), "embedding dimension must be even");
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for j in 0..half {
        let omega = base.powf(-(j as f64) / half as f64);
        let arg = t as f64 * omega;
        out.push(arg.sin());
        out.push(arg.cos());
    }
    out
}

/// One `(x_t, t, ε)` training triple.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub x_t: Vec<f64>,
    pub t: usize,
    pub eps: Vec<f64>,
}

/// Noise predictor `ε̂(x, t) = W2 act(W1 [x; emb(t)] + b1) + b2`.
///
/// All parameters live in one flat vector laid out as `[W1, b1, W2, b2]`,
/// matrices row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpScoreModel {
    input_dim: usize,
    config: MlpConfig,
    params: Vec<f64>,
    /// Embedding rows for timesteps `0..embed_table.len() / embed_dim`.
    embed_table: Vec<f64>,
}

/// Gradient of the loss with respect to the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    total: usize,
}

impl MlpScoreModel {
    /// Fan-in scaled uniform init for the hidden layer; zero output layer so
    /// the untrained model predicts zero noise.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, config: MlpConfig, timesteps: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::InvalidArgument("input_dim must be >= 1".into()));
        }
        let mut model = Self::zeros(input_dim, config, timesteps);
        let fan_in = (input_dim + model.config.embed_dim) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let l = model.layout();
        for v in &mut model.params[l.w1..l.w2] {
            *v = rng.random_range(-bound..bound);
        }
        Ok(model)
    }

    pub(crate) fn zeros(input_dim: usize, config: MlpConfig, timesteps: usize) -> Self {
        let mut model = Self { input_dim, config, params: Vec::new(), embed_table: Vec::new() };
        model.params = vec![0.0; model.layout().total];
        model.build_embed_table(timesteps);
        model
    }

    fn build_embed_table(&mut self, timesteps: usize) {
        let e = self.config.embed_dim;
        self.embed_table = (0..timesteps).flat_map(|t| sinusoidal_embed(t, e, self.config.embed_base)).collect();
    }

    fn layout(&self) -> Layout {
        let h = self.config.hidden_width;
        let z = self.input_dim + self.config.embed_dim;
        let d = self.input_dim;
        let w1 = 0;
        let b1 = w1 + h * z;
        let w2 = b1 + h;
        let b2 = w2 + d * h;
        Layout { w1, b1, w2, b2, total: b2 + d }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn timesteps(&self) -> usize {
        self.embed_table.len() / self.config.embed_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// `(W1, b1, W2, b2)` as slices.
    pub fn weights(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let l = self.layout();
        (&self.params[l.w1..l.b1], &self.params[l.b1..l.w2], &self.params[l.w2..l.b2], &self.params[l.b2..l.total])
    }

    pub(crate) fn from_parts(
        input_dim: usize,
        config: MlpConfig,
        timesteps: usize,
        w1: &[f64],
        b1: &[f64],
        w2: &[f64],
        b2: &[f64],
    ) -> Result<Self> {
        config.validate()?;
        let mut model = Self::zeros(input_dim, config, timesteps);
        let l = model.layout();
        let parts = [(w1, l.w1, l.b1, "w1"), (b1, l.b1, l.w2, "b1"), (w2, l.w2, l.b2, "w2"), (b2, l.b2, l.total, "b2")];
        for (src, lo, hi, name) in parts {
            if src.len() != hi - lo {
                return Err(Error::InvalidArgument(format!("{name} has {} entries, expected {}", src.len(), hi - lo)));
            }
            model.params[lo..hi].copy_from_slice(src);
        }
        Ok(model)
    }

    fn embedding(&self, t: usize) -> std::borrow::Cow<'_, [f64]> {
        let e = self.config.embed_dim;
        match self.embed_table.get(t * e..(t + 1) * e) {
            Some(row) => std::borrow::Cow::Borrowed(row),
            None => std::borrow::Cow::Owned(sinusoidal_embed(t, e, self.config.embed_base)),
        }
    }

    /// Hidden pre-activations and activations for input `x` at step `t`.
    fn hidden(&self, x: &[f64], t: usize, pre: &mut [f64], act: &mut [f64]) {
        let l = self.layout();
        let emb = self.embedding(t);
        let z = self.input_dim + self.config.embed_dim;
        let w1 = &self.params[l.w1..l.b1];
        let b1 = &self.params[l.b1..l.w2];
        for (i, (p, a)) in pre.iter_mut().zip(act.iter_mut()).enumerate() {
            let row = &w1[i * z..(i + 1) * z];
            let mut acc = b1[i];
            for (w, v) in row[..self.input_dim].iter().zip(x) {
                acc += w * v;
            }
            for (w, v) in row[self.input_dim..].iter().zip(emb.iter()) {
                acc += w * v;
            }
            *p = acc;
            *a = self.config.activation.apply(acc);
        }
    }

    fn output(&self, act: &[f64], out: &mut [f64]) {
        let l = self.layout();
        let h = self.config.hidden_width;
        let w2 = &self.params[l.w2..l.b2];
        let b2 = &self.params[l.b2..l.total];
        for (j, o) in out.iter_mut().enumerate() {
            *o = b2[j] + w2[j * h..(j + 1) * h].iter().zip(act).map(|(w, a)| w * a).sum::<f64>();
        }
    }

    /// Writes `ε̂(x, t)` into `out`.
    pub fn predict_noise_into(&self, x: &[f64], t: usize, out: &mut [f64]) {
        let h = self.config.hidden_width;
        let mut pre = vec![0.0; h];
        let mut act = vec![0.0; h];
        self.hidden(x, t, &mut pre, &mut act);
        self.output(&act, out);
    }

    pub fn predict_noise(&self, x: &[f64], t: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.input_dim];
        self.predict_noise_into(x, t, &mut out);
        out
    }

    /// Mean over the batch of `‖ε̂(x_t, t) - ε‖²`, and its gradient.
    pub fn loss_and_grad(&self, batch: &[TrainingExample]) -> (f64, Gradients) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate_grad(batch, &mut grad);
        (loss, Gradients(grad))
    }

    /// Adds the batch-mean gradient into `grad`, returns the batch-mean loss.
    pub(crate) fn accumulate_grad(&self, batch: &[TrainingExample], grad: &mut [f64]) -> f64 {
        if batch.is_empty() {
            return 0.0;
        }
        let l = self.layout();
        let h = self.config.hidden_width;
        let d = self.input_dim;
        let z = d + self.config.embed_dim;
        let scale = 1.0 / batch.len() as f64;
        let mut pre = vec![0.0; h];
        let mut act = vec![0.0; h];
        let mut out = vec![0.0; d];
        let mut d_out = vec![0.0; d];
        let mut d_pre = vec![0.0; h];
        let mut loss = 0.0;
        let (w1_end, w2_start) = (l.b1, l.w2);
        for ex in batch {
            self.hidden(&ex.x_t, ex.t, &mut pre, &mut act);
            self.output(&act, &mut out);
            for j in 0..d {
                let r = out[j] - ex.eps[j];
                loss += r * r;
                d_out[j] = 2.0 * r * scale;
            }
            let w2 = &self.params[w2_start..l.b2];
            for i in 0..h {
                let back: f64 = (0..d).map(|j| w2[j * h + i] * d_out[j]).sum();
                d_pre[i] = back * self.config.activation.derivative(pre[i], act[i]);
            }
            {
                let (g_w2, g_b2) = grad[l.w2..l.total].split_at_mut(d * h);
                for j in 0..d {
                    let row = &mut g_w2[j * h..(j + 1) * h];
                    for (g, a) in row.iter_mut().zip(&act) {
                        *g += d_out[j] * a;
                    }
                    g_b2[j] += d_out[j];
                }
            }
            let emb = self.embedding(ex.t);
            let (g_w1, g_b1) = grad[l.w1..w2_start].split_at_mut(w1_end - l.w1);
            for i in 0..h {
                let dp = d_pre[i];
                if dp == 0.0 {
                    continue;
                }
                let row = &mut g_w1[i * z..(i + 1) * z];
                for (g, v) in row[..d].iter_mut().zip(&ex.x_t) {
                    *g += dp * v;
                }
                for (g, v) in row[d..].iter_mut().zip(emb.iter()) {
                    *g += dp * v;
                }
                g_b1[i] += dp;
            }
        }
        loss * scale
    }

    /// Batch-mean loss without gradients.
    pub fn loss(&self, batch: &[TrainingExample]) -> f64 {
        let mut out = vec![0.0; self.input_dim];
        let total: f64 = batch
            .iter()
            .map(|ex| {
                self.predict_noise_into(&ex.x_t, ex.t, &mut out);
                out.iter().zip(&ex.eps).map(|(o, e)| (o - e) * (o - e)).sum::<f64>()
            })
            .sum();
        total / batch.len().max(1) as f64
    }

    /// Plain SGD step `θ ← θ - lr ∇L`.
    pub fn sgd_step(&mut self, grad: &Gradients, learning_rate: f64) {
        for (p, g) in self.params.iter_mut().zip(&grad.0) {
            *p -= learning_rate * g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand_distr::{Distribution, StandardNormal};

    fn random_batch(n: usize, d: usize, steps: usize, seed: u64) -> Vec<TrainingExample> {
        let mut rng = substream(seed, 0);
        (0..n)
            .map(|_| TrainingExample {
                x_t: (0..d)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        2.0 * z
                    })
                    .collect(),
                t: rng.random_range(0..steps),
                eps: (0..d).map(|_| StandardNormal.sample(&mut rng)).collect(),
            })
            .collect()
    }

    #[test]
    fn embedding_at_zero() {
        let e = sinusoidal_embed(0, 32, 10_000.0);
        for pair in e.chunks(2) {
            assert_eq!(pair, [0.0, 1.0]);
        }
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 4.0).abs() < 1e-15);
    }

    #[test]
    fn embeddings_are_pairwise_distinct_over_schedule() {
        let all: Vec<Vec<f64>> = (0..100).map(|t| sinusoidal_embed(t, 32, 10_000.0)).collect();
        for i in 0..100 {
            for j in i + 1..100 {
                let dist: f64 = all[i].iter().zip(&all[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                assert!(dist > 1e-6, "t={i} and t={j} collide");
            }
        }
    }

    #[test]
    fn untrained_model_predicts_zero() {
        let model = MlpScoreModel::new(2, MlpConfig::default(), 100, &mut substream(1, 0)).unwrap();
        assert_eq!(model.predict_noise(&[0.3, -1.0], 17), vec![0.0, 0.0]);
        let batch = random_batch(20_000, 2, 100, 4);
        let loss = model.loss(&batch);
        assert!((loss - 2.0).abs() < 0.05, "loss {loss}");
    }

    fn check_gradient(activation: Activation) {
        let config = MlpConfig { hidden_width: 6, embed_dim: 4, embed_base: 100.0, activation };
        let mut model = MlpScoreModel::new(2, config, 10, &mut substream(2, 0)).unwrap();
        // Nonzero output layer so every parameter carries gradient.
        let mut rng = substream(2, 1);
        for p in model.params_mut() {
            *p += rng.random_range(-0.5..0.5);
        }
        let batch = random_batch(5, 2, 10, 3);
        let (_, grad) = model.loss_and_grad(&batch);
        let step = 1e-5;
        for i in 0..model.n_params() {
            let orig = model.params()[i];
            model.params_mut()[i] = orig + step;
            let lp = model.loss(&batch);
            model.params_mut()[i] = orig - step;
            let lm = model.loss(&batch);
            model.params_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * step);
            let rel = (fd - grad.0[i]).abs() / fd.abs().max(grad.0[i].abs()).max(1e-8);
            assert!(rel < 1e-4, "param {i}: fd {fd} vs backprop {}", grad.0[i]);
        }
    }

    #[test]
    fn backprop_matches_finite_differences_tanh() {
        check_gradient(Activation::Tanh);
    }

    #[test]
    fn backprop_matches_finite_differences_silu() {
        check_gradient(Activation::Silu);
    }

    #[test]
    fn rejects_odd_embedding() {
        let config = MlpConfig { embed_dim: 3, ..MlpConfig::default() };
        assert!(MlpScoreModel::new(2, config, 10, &mut substream(1, 0)).is_err());
    }
}
