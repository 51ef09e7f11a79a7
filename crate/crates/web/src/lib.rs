//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Everything here also builds natively so the logic can be unit tested
//! without a browser. Errors cross the boundary as plain strings.

use plaplace::bounds::bound_constant;
use plaplace::gmm::GmmParams;
use plaplace::memorization::{grid_p_laplace, Grid2};
use plaplace::plaplace::{estimate, EstimatorConfig, Formulation};
use plaplace::rng::substream;
use wasm_bindgen::prelude::*;

fn js_err(e: plaplace::error::Error) -> String {
    e.to_string()
}

fn formulation(name: &str) -> Result<Formulation, String> {
    match name {
        "boundary" => Ok(Formulation::Boundary),
        "volume" => Ok(Formulation::Volume),
        other => Err(format!("unknown formulation {other:?}")),
    }
}

/// A planar mixture plus the square window the page draws.
#[wasm_bindgen]
pub struct Mixture {
    gmm: GmmParams,
    grid: Grid2,
}

#[wasm_bindgen]
impl Mixture {
    /// Random `components`-mode mixture in `[-5, 5]^2` with shared variance `sigma2`.
    #[wasm_bindgen(constructor)]
    pub fn new(components: usize, sigma2: f64, seed: u64) -> Result<Mixture, String> {
        let gmm = GmmParams::random(components, 2, sigma2, 5.0, &mut substream(seed, 0)).map_err(js_err)?;
        let grid = Grid2::around_means(&gmm, 2.0, 2).map_err(js_err)?;
        Ok(Mixture { gmm, grid })
    }

    /// Window as `[x_min, x_max, y_min, y_max]`.
    pub fn extent(&self) -> Vec<f64> {
        vec![self.grid.x_min, self.grid.x_max, self.grid.y_min, self.grid.y_max]
    }

    /// Component means, flattened `[x0, y0, x1, y1, ...]`.
    pub fn means(&self) -> Vec<f64> {
        self.gmm.means.iter().flatten().copied().collect()
    }

    /// Ball-averaged p-Laplace of the score on an `n x n` lattice over the
    /// window, row-major with `y` as the row. Non-finite cells come back as NaN.
    pub fn heatmap(
        &self,
        p: f64,
        n: usize,
        radius: f64,
        samples: usize,
        form: &str,
        seed: u64,
    ) -> Result<Vec<f64>, String> {
        let grid =
            Grid2::new((self.grid.x_min, self.grid.x_max), (self.grid.y_min, self.grid.y_max), n, n).map_err(js_err)?;
        let cfg = config(p, radius, samples, form)?;
        Ok(grid_p_laplace(&self.gmm, &grid, &cfg, seed).map_err(js_err)?.values)
    }

    /// Estimate at one point: `[value, std_error, pointwise_exact_at_center, singular_hits]`.
    #[allow(clippy::too_many_arguments)]
    pub fn estimate_at(
        &self,
        x: f64,
        y: f64,
        p: f64,
        radius: f64,
        samples: usize,
        form: &str,
        seed: u64,
    ) -> Result<Vec<f64>, String> {
        let cfg = config(p, radius, samples, form)?;
        let e = estimate(&self.gmm, &[x, y], &cfg, &mut substream(seed, 1)).map_err(js_err)?;
        let exact = self.gmm.pointwise_p_laplace_exact(&[x, y], p).unwrap_or(f64::NAN);
        Ok(vec![e.value, e.std_error, exact, e.singular_hits as f64])
    }
}

fn config(p: f64, radius: f64, samples: usize, form: &str) -> Result<EstimatorConfig, String> {
    let cfg = EstimatorConfig {
        p,
        radius,
        n_samples: samples,
        formulation: formulation(form)?,
        ..EstimatorConfig::default()
    };
    cfg.validate().map_err(js_err)?;
    Ok(cfg)
}

/// Bound constant over an `n x n` lattice: `delta` in `[0, delta_max]` along
/// x, the norm bound (`m` for `p < 2`, `M` otherwise) in `[lo, hi]` along y.
#[wasm_bindgen]
pub fn bound_surface(
    p: f64,
    delta_max: f64,
    lo: f64,
    hi: f64,
    n: usize,
    dim: usize,
    radius: f64,
) -> Result<Vec<f64>, String> {
    if n < 2 {
        return Err("need at least 2 lattice points per axis".into());
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(format!("need 0 < lo < hi, got lo = {lo}, hi = {hi}"));
    }
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        let s = lo + (hi - lo) * j as f64 / (n - 1) as f64;
        for i in 0..n {
            let delta = delta_max * i as f64 / (n - 1) as f64;
            out.push(bound_constant(p, delta, s, s, dim, radius).map_err(js_err)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_shape_and_determinism() {
        let m = Mixture::new(3, 1.0, 4).unwrap();
        let a = m.heatmap(1.0, 8, 1.0, 50, "boundary", 2).unwrap();
        let b = m.heatmap(1.0, 8, 1.0, 50, "boundary", 2).unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(a, b);
        assert_eq!(m.means().len(), 6);
        let e = m.extent();
        assert!(e[0] < e[1] && e[2] < e[3]);
    }

    #[test]
    fn estimate_tracks_pointwise_for_small_balls() {
        let m = Mixture::new(2, 1.0, 1).unwrap();
        let r = m.estimate_at(0.3, -0.2, 2.0, 0.05, 2000, "boundary", 9).unwrap();
        assert!((r[0] - r[2]).abs() < 4.0 * r[1] + 1e-2, "{r:?}");
    }

    #[test]
    fn bound_surface_is_linear_in_delta() {
        let v = bound_surface(3.0, 1.0, 0.5, 2.0, 5, 2, 1.0).unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[4] - 2.0 * v[2]).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let m = Mixture::new(2, 1.0, 1).unwrap();
        assert!(m.heatmap(1.0, 4, 1.0, 10, "surface", 0).is_err());
        assert!(m.estimate_at(0.0, 0.0, 0.5, 1.0, 10, "volume", 0).is_err());
        assert!(bound_surface(1.0, 1.0, 2.0, 1.0, 4, 2, 1.0).is_err());
    }
}
