#![allow(dead_code)]

use plaplace::gmm::GmmParams;
use plaplace::rng::substream;
use rand::Rng;

/// Kolmogorov–Smirnov statistic of `samples` against the CDF `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// A 3-component planar mixture with unequal weights.
pub fn random_gmm(seed: u64) -> GmmParams {
    let mut rng = substream(seed, 0);
    let base = GmmParams::random(3, 2, 0.6 + rng.random::<f64>(), 4.0, &mut rng).unwrap();
    let w: Vec<f64> = (0..3).map(|_| 0.2 + rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    GmmParams::new(base.means, base.sigma2, w.iter().map(|v| v / total).collect()).unwrap()
}

pub fn uniform_point<R: Rng>(rng: &mut R, dim: usize, half_width: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-half_width..half_width)).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
