//! Memorization injection and detection by learned p-Laplace ranking.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScoreField;
use crate::geometry::norm;
use crate::gmm::GmmParams;
use crate::plaplace::{estimate, EstimatorConfig};
use crate::rng::{streams, substream};

/// A training set with one base sample replicated `n_replicas` extra times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorizationScenario {
    pub base_samples: Vec<Vec<f64>>,
    pub memorized_index: usize,
    pub memorized_point: Vec<f64>,
    pub n_replicas: usize,
    pub seed: u64,
}

impl MemorizationScenario {
    /// Base samples followed by the replicas.
    pub fn training_set(&self) -> Vec<Vec<f64>> {
        let mut data = self.base_samples.clone();
        data.extend(std::iter::repeat_n(self.memorized_point.clone(), self.n_replicas));
        data
    }
}

/// Draws `n_base` points from `gmm` and picks one of them uniformly to replicate.
pub fn build_scenario(gmm: &GmmParams, n_base: usize, n_replicas: usize, seed: u64) -> Result<MemorizationScenario> {
    gmm.validate()?;
    if n_base == 0 {
        return Err(Error::InvalidArgument("n_base must be >= 1".into()));
    }
    let mut rng = substream(seed, streams::SCENARIO);
    let base_samples = gmm.sample(n_base, &mut rng);
    let memorized_index = rng.random_range(0..n_base);
    let memorized_point = base_samples[memorized_index].clone();
    Ok(MemorizationScenario { base_samples, memorized_index, memorized_point, n_replicas, seed })
}

/// Axis-aligned rectangular lattice in the plane, `nx × ny` nodes including
/// the corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid2 {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    pub fn new(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        let g = Self { x_min: x.0, x_max: x.1, y_min: y.0, y_max: y.1, nx, ny };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidArgument("grid needs at least one node per axis".into()));
        }
        if !(self.x_max >= self.x_min && self.y_max >= self.y_min) {
            return Err(Error::InvalidArgument("grid bounds are inverted".into()));
        }
        Ok(())
    }

    /// Bounding box of the mixture means inflated by `inflate_sigmas · σ`.
    pub fn around_means(gmm: &GmmParams, inflate_sigmas: f64, n: usize) -> Result<Self> {
        if gmm.dim() != 2 {
            return Err(Error::InvalidArgument("grid evaluation needs 2-D data".into()));
        }
        let pad = inflate_sigmas * gmm.sigma2.sqrt();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for m in &gmm.means {
            for j in 0..2 {
                lo[j] = lo[j].min(m[j]);
                hi[j] = hi[j].max(m[j]);
            }
        }
        Self::new((lo[0] - pad, hi[0] + pad), (lo[1] - pad, hi[1] + pad), n, n)
    }

    fn coord(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
        if n == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    /// Node `(ix, iy)`.
    pub fn node(&self, ix: usize, iy: usize) -> [f64; 2] {
        [Self::coord(self.x_min, self.x_max, self.nx, ix), Self::coord(self.y_min, self.y_max, self.ny, iy)]
    }

    /// All nodes, row-major with `y` as the row index.
    pub fn nodes(&self) -> Vec<[f64; 2]> {
        (0..self.ny).flat_map(|iy| (0..self.nx).map(move |ix| self.node(ix, iy))).collect()
    }

    pub fn cell_size(&self) -> (f64, f64) {
        let step = |lo: f64, hi: f64, n: usize| if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
        (step(self.x_min, self.x_max, self.nx), step(self.y_min, self.y_max, self.ny))
    }
}

/// Row-major matrix of per-node values (`ny` rows of `nx`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridValues {
    pub grid: Grid2,
    pub values: Vec<f64>,
}

impl GridValues {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.grid.nx + ix]
    }

    /// Node holding the smallest finite value.
    pub fn argmin(&self) -> Option<(usize, usize)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| (i % self.grid.nx, i / self.grid.nx))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.grid.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Ball-averaged p-Laplace at every grid node. Node `i` (row-major) uses
/// substream `PER_ITEM + i` of `seed`, so the matrix does not depend on
/// evaluation order.
pub fn grid_p_laplace<F: ScoreField + ?Sized>(
    field: &F,
    grid: &Grid2,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<GridValues> {
    grid.validate()?;
    if field.dim() != 2 {
        return Err(Error::InvalidArgument("grid evaluation needs a 2-D field".into()));
    }
    let values = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, node)| {
            let mut rng = substream(seed, streams::PER_ITEM + i as u64);
            estimate(field, node, cfg, &mut rng).map(|e| e.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(GridValues { grid: *grid, values })
}

/// `100 · (#{values < v} + ½ #{values = v}) / #values`.
pub fn percentile_rank(values: &[f64], v: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile of an empty set".into()));
    }
    let below = values.iter().filter(|x| **x < v).count() as f64;
    let ties = values.iter().filter(|x| **x == v).count() as f64;
    Ok(100.0 * (below + 0.5 * ties) / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Positives are expected to score lower (p-Laplace: deeper wells).
    LowerIsPositive,
    /// Positives are expected to score higher (score-norm baseline).
    HigherIsPositive,
}

/// Mann–Whitney AUC: probability that a random positive outranks a random
/// negative, ties counting one half. Computed from midranks.
pub fn auc(positives: &[f64], negatives: &[f64], orientation: Orientation) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::InvalidArgument("AUC needs both classes".into()));
    }
    if positives.iter().chain(negatives).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("AUC inputs contain NaN".into()));
    }
    let sign = match orientation {
        Orientation::HigherIsPositive => 1.0,
        Orientation::LowerIsPositive => -1.0,
    };
    let mut all: Vec<(f64, bool)> =
        positives.iter().map(|v| (sign * v, true)).chain(negatives.iter().map(|v| (sign * v, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let midrank = 0.5 * ((i + 1) + (j + 1)) as f64;
        rank_sum += midrank * all[i..=j].iter().filter(|e| e.1).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (positives.len() as f64, negatives.len() as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Promptless score-magnitude baseline `‖ŝ(x)‖`.
pub fn score_norm_criterion<F: ScoreField + ?Sized>(field: &F, x: &[f64]) -> f64 {
    norm(&field.score(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    PLaplace,
    ScoreNorm,
}

impl Criterion {
    pub fn orientation(self) -> Orientation {
        match self {
            Criterion::PLaplace => Orientation::LowerIsPositive,
            Criterion::ScoreNorm => Orientation::HigherIsPositive,
        }
    }
}

/// Values of one criterion at memorized and background points, with the
/// memorized point's percentile among the background and the AUC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub criterion: Criterion,
    pub values_memorized: Vec<f64>,
    pub values_background: Vec<f64>,
    /// Percentile of the first memorized value among the background values.
    pub percentile: f64,
    pub auc: f64,
}

impl DetectionResult {
    pub fn new(criterion: Criterion, values_memorized: Vec<f64>, values_background: Vec<f64>) -> Result<Self> {
        let first = *values_memorized.first().ok_or_else(|| Error::InvalidArgument("no memorized values".into()))?;
        let percentile = percentile_rank(&values_background, first)?;
        let auc = auc(&values_memorized, &values_background, criterion.orientation())?;
        Ok(Self { criterion, values_memorized, values_background, percentile, auc })
    }
}
