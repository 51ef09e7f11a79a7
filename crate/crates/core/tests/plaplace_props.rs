mod common;

use common::{random_gmm, uniform_point};
use plaplace::field::{FnField, Scaled, ScoreField};
use plaplace::geometry::{sample_sphere_uniform, BallSpec};
use plaplace::plaplace::{estimate, estimate_boundary, flux_density, EstimatorConfig, Formulation};
use plaplace::rng::substream;
use proptest::prelude::*;

fn cfg(p: f64, formulation: Formulation, n: usize) -> EstimatorConfig {
    EstimatorConfig { p, formulation, n_samples: n, ..EstimatorConfig::default() }
}

#[test]
fn p1_flux_ignores_pointwise_positive_rescaling() {
    let g = random_gmm(21);
    // c(x) > 0 varies over space.
    let rescaled = FnField::new(2, |x: &[f64], out: &mut [f64]| {
        g.score_into(x, out);
        let c = 0.01 + (x[0] * 3.0).sin().powi(2) * 40.0 + x[1].abs();
        out.iter_mut().for_each(|v| *v *= c);
    });
    let spec = BallSpec::new(vec![0.5, -0.5], 1.0).unwrap();
    for s in sample_sphere_uniform(&spec, 200, &mut substream(21, 1)) {
        let a = flux_density(&g, &s.point, &s.normal, 1.0).unwrap();
        let b = flux_density(&rescaled, &s.point, &s.normal, 1.0).unwrap();
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
    let c = cfg(1.0, Formulation::Boundary, 300);
    let a = estimate_boundary(&g, &[0.5, -0.5], &c, &mut substream(21, 2)).unwrap();
    let b = estimate_boundary(&rescaled, &[0.5, -0.5], &c, &mut substream(21, 2)).unwrap();
    assert!((a.value - b.value).abs() <= 1e-12);
}

#[test]
fn estimates_are_deterministic_given_the_seed() {
    let g = random_gmm(22);
    for formulation in [Formulation::Volume, Formulation::Boundary] {
        let c = cfg(1.5, formulation, 50);
        let a = estimate(&g, &[1.0, 1.0], &c, &mut substream(5, 5)).unwrap();
        let b = estimate(&g, &[1.0, 1.0], &c, &mut substream(5, 5)).unwrap();
        assert_eq!(a, b);
    }
}

/// Independent seeds, large N: the two formulations estimate the same ball
/// average, so they must agree within their combined error.
#[test]
fn volume_and_boundary_agree_on_the_analytic_field() {
    let g = random_gmm(23);
    let mut rng = substream(23, 1);
    for i in 0..8 {
        let x0 = uniform_point(&mut rng, 2, 4.0);
        for p in [2.0, 3.0] {
            let v = estimate(&g, &x0, &cfg(p, Formulation::Volume, 4000), &mut substream(23, 100 + i)).unwrap();
            let b = estimate(&g, &x0, &cfg(p, Formulation::Boundary, 4000), &mut substream(23, 200 + i)).unwrap();
            let se = (v.std_error.powi(2) + b.std_error.powi(2)).sqrt();
            assert!((v.value - b.value).abs() <= 4.0 * se, "x0={x0:?} p={p}: {} vs {} (se {se})", v.value, b.value);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Same samples for `s` and `a·s`: estimates scale by `a|a|^{p-2}`.
    #[test]
    fn estimates_are_p_minus_one_homogeneous(
        seed in 0u64..500,
        x0 in prop::array::uniform2(-4.0f64..4.0),
        p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0]),
        a in prop::sample::select(vec![-2.0, 0.5, 3.0]),
        volume in any::<bool>(),
    ) {
        let g = random_gmm(seed);
        let formulation = if volume { Formulation::Volume } else { Formulation::Boundary };
        let c = cfg(p, formulation, 40);
        let base = estimate(&g, &x0, &c, &mut substream(seed, 3)).unwrap();
        let scaled = estimate(&Scaled { inner: &g, factor: a }, &x0, &c, &mut substream(seed, 3)).unwrap();
        let factor = a * f64::abs(a).powf(p - 2.0);
        let tol = 1e-7 * (base.value.abs() + base.std_error).max(1.0) * factor.abs();
        prop_assert!((scaled.value - factor * base.value).abs() <= tol,
            "{} vs {}", scaled.value, factor * base.value);
        prop_assert!((scaled.std_error - factor.abs() * base.std_error).abs() <= tol);
    }

    #[test]
    fn flux_of_aligned_scaled_normal_is_norm_power(
        c in 0.01f64..100.0,
        p in 1.0f64..4.0,
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        let n = [theta.cos(), theta.sin()];
        let f = FnField::new(2, move |_: &[f64], out: &mut [f64]| {
            out[0] = c * n[0];
            out[1] = c * n[1];
        });
        let v = flux_density(&f, &[0.0, 0.0], &n, p).unwrap();
        prop_assert!((v - c.powf(p - 1.0)).abs() <= 1e-12 * c.powf(p - 1.0).max(1.0));
    }

    #[test]
    fn standard_errors_are_nonnegative_and_counts_add_up(
        seed in 0u64..200,
        p in 1.0f64..3.0,
        n in 1usize..60,
    ) {
        let g = random_gmm(seed);
        for formulation in [Formulation::Volume, Formulation::Boundary] {
            let e = estimate(&g, &[0.0, 0.0], &cfg(p, formulation, n), &mut substream(seed, 8)).unwrap();
            prop_assert!(e.std_error >= 0.0);
            prop_assert_eq!(e.n_used + e.singular_hits, n);
        }
        prop_assert!(g.dim() == 2);
    }
}
