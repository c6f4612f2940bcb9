use ciltlab_core::coulomb::log_gamma;
use ciltlab_core::gmc::*;
use ciltlab_core::{ConformalFactor, SurfaceSpec};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

#[test]
fn bulk_first_moment_mc_agrees_with_quadrature() {
    let spec = GmcSpec::bulk(1.0, 0.01, Weight::indicator(0.5));
    let m = gmc_estimate(&spec, 16, 20_000, 3).unwrap();
    let exact = gmc_first_moment(&spec).unwrap();
    assert!(m.within(exact, 3.0), "{m:?} vs {exact}");
}

#[test]
fn boundary_first_moment_mc_agrees_with_quadrature() {
    let spec = GmcSpec::boundary(1.0, 0.01, Weight::constant(one()));
    let m = gmc_estimate(&spec, 8, 4_000, 5).unwrap();
    let exact = gmc_first_moment(&spec).unwrap();
    assert!(m.within(exact, 3.0), "{m:?} vs {exact}");
}

#[test]
fn beta_zero_is_deterministic() {
    let spec = GmcSpec::bulk(0.0, 0.01, Weight::indicator(0.5));
    let area = PI / 4.0;
    assert!((gmc_first_moment(&spec).unwrap().re - area).abs() < 1e-10);
    assert!((gmc_second_moment(&spec).unwrap() - area * area).abs() < 1e-9);
    let (first, second) = gmc_moments_mc(&spec, NodeScheme::Random, 8, 2_000, 1).unwrap();
    assert!(first.stderr < 0.1 && second.stderr < 0.2);
}

#[test]
fn constant_conformal_factor_scales_the_second_moment() {
    let beta: f64 = 0.8;
    let spec = GmcSpec::bulk(beta, 0.01, Weight::indicator(0.5));
    let flat = gmc_second_moment(&spec).unwrap();
    let c = 0.3;
    let scaled = gmc_second_moment_metric(&spec, &ConformalFactor::Constant(c)).unwrap();
    let expect = flat * ((2.0 - beta * beta / 2.0) * c).exp();
    assert!((scaled / expect - 1.0).abs() < 1e-9, "{scaled} vs {expect}");
}

#[test]
fn radial_and_angular_paths_agree_for_a_radial_metric() {
    let spec = GmcSpec::bulk(1.0, 0.01, Weight::indicator(0.5));
    let q = ConformalFactor::Quadratic([0.1, 0.0, 0.0, 0.3]);
    let custom = ConformalFactor::Custom(Arc::new(|z: Complex64| 0.1 + 0.3 * z.norm_sqr()));
    let a = gmc_second_moment_metric(&spec, &q).unwrap();
    let b = gmc_second_moment_metric(&spec, &custom).unwrap();
    assert!((a / b - 1.0).abs() < 1e-6, "{a} vs {b}");
}

#[test]
fn boundary_pair_bound_matches_gamma_product() {
    let disk = SurfaceSpec::disk(vec![]);
    for beta in [0.6f64, 1.0, 1.3] {
        let b = moment_bound_quantities(&Weight::constant(one()), beta, &disk).unwrap();
        // ∬ |e^{is} − e^{it}|^{−γ} ds dt = (2π)² Γ(1−γ)/Γ(1−γ/2)², γ = β²/2
        let g = beta * beta / 2.0;
        let exact = TAU * TAU * (log_gamma(1.0 - g).unwrap() - 2.0 * log_gamma(1.0 - g / 2.0).unwrap()).exp();
        assert!((b.u2 / exact - 1.0).abs() < 1e-8, "β={beta}: {} vs {exact}", b.u2);
    }
}

#[test]
fn boundary_volume_bound_is_elementary() {
    // V = ∫_D (1−|x|)^{−1/2} dv = 2π·∫₀¹ r (1−r)^{−1/2} dr = 8π/3
    let b = moment_bound_quantities(&Weight::constant(one()), 1.0, &SurfaceSpec::disk(vec![])).unwrap();
    assert!((b.v - 8.0 * PI / 3.0).abs() < 1e-8, "{}", b.v);
}

#[test]
fn supercritical_bounds_diverge() {
    let r = moment_bound_quantities(&Weight::indicator(0.5), 1.5, &SurfaceSpec::disk(vec![]));
    assert!(r.is_err());
}

proptest! {
    // each gap is a ~10 s quadrature
    #![proptest_config(ProptestConfig::with_cases(1))]

    #[test]
    fn gap_distance_obeys_the_triangle_inequality(
        e1 in prop::sample::select(vec![0.02, 0.05]),
        e2 in prop::sample::select(vec![0.03, 0.08]),
        e3 in prop::sample::select(vec![0.04, 0.1]),
    ) {
        let spec = GmcSpec::bulk(1.0, 0.1, Weight::indicator(0.4));
        let d = |a: f64, b: f64| l2_gap(&spec, a, b).unwrap().max(0.0).sqrt();
        let (d12, d23, d13) = (d(e1, e2), d(e2, e3), d(e1, e3));
        prop_assert!(d13 <= d12 + d23 + 1e-7, "{d13} > {d12} + {d23}");
    }
}
