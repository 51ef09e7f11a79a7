//! Averaged p-Laplace operators of a log-density, estimated from score fields.
//!
//! Given a score field `s ≈ ∇ log p` (the analytic score of a Gaussian
//! mixture, or the read-out of a small trained diffusion model), the crate
//! estimates the ball average of `Δ_p u = ∇·(|∇u|^{p-2} ∇u)` around an anchor
//! point in two ways:
//!
//! * **volume**: mean of the finite-difference divergence of `|s|^{p-2} s`
//!   over uniform samples inside the ball;
//! * **boundary**: `|∂B|/|B|` times the mean outward flux of `|s|^{p-2} s`
//!   over uniform samples on the sphere.
//!
//! On top of the estimators sit an error bound for swapping the true score
//! for an approximate one ([`bounds`]), and a memorization harness that trains
//! a model on data with one replicated point and ranks that point by its
//! learned 1-Laplace ([`memorization`]).
//!
//! ```
//! use plaplace::gmm::GmmParams;
//! use plaplace::plaplace::{estimate_boundary, EstimatorConfig};
//! use plaplace::rng::substream;
//!
//! let g = GmmParams::new(vec![vec![0.0, 0.0]], 1.0, vec![1.0]).unwrap();
//! let cfg = EstimatorConfig { p: 1.0, ..EstimatorConfig::default() };
//! let est = estimate_boundary(&g, &[0.0, 0.0], &cfg, &mut substream(0, 0)).unwrap();
//! // The score is exactly anti-radial on every sphere around the mode.
//! assert!((est.value + 2.0).abs() < 1e-12);
//! ```

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod field;
pub mod geometry;
pub mod gmm;
pub mod memorization;
pub mod model;
pub mod plaplace;
pub mod rng;
pub mod svg;

pub use error::{Error, Result};
pub use field::ScoreField;

/// Below this score norm the p-Laplace with `p < 2` is treated as singular.
pub const GRADIENT_FLOOR: f64 = 1e-8;
