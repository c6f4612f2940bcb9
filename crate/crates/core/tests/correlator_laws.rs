use ciltlab_core::correlator::*;
use ciltlab_core::params::{validate_params, BoundaryCharge, BulkCharge, ChargeConfig, ParamSet};
use ciltlab_core::topology::random_family;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

fn params() -> ParamSet {
    // β = 1, R = 4: Q = −3/2, QR = −6
    validate_params(1.0, 4.0, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), false).unwrap()
}

fn bulk(alpha: f64, z: Complex64, m: i64, tangent: f64) -> BulkCharge {
    BulkCharge { position: z, alpha, m, tangent_angle: tangent }
}

fn pair() -> ChargeConfig {
    ChargeConfig {
        bulk: vec![bulk(-1.0, Complex64::new(0.3, 0.0), 0, 0.0), bulk(-1.0, Complex64::new(-0.4, 0.0), 0, 0.0)],
        ..Default::default()
    }
}

/// Charges (quarter-integers above Q) and a degree making (p, q) neutral.
fn neutral_config() -> impl Strategy<Value = (ChargeConfig, u32, u32)> {
    (
        prop::collection::vec((-5i64..8, -2i64..=2, 0.1f64..0.85, 0.0..TAU, 0.0..TAU), 1..4),
        prop::collection::vec((-2i64..4, 0.0..TAU), 0..3),
        0u32..3,
        0u32..3,
    )
        .prop_map(|(b, d, p, q)| {
            let n = b.len() as f64;
            let bulk: Vec<BulkCharge> = b
                .iter()
                .enumerate()
                .map(|(j, &(a, m, r, t, v))| {
                    // spread the angles so positions stay distinct
                    let z = Complex64::from_polar(r, t / n + TAU * j as f64 / n);
                    bulk(a as f64 / 4.0, z, m, v)
                })
                .collect();
            let boundary: Vec<BoundaryCharge> = d
                .iter()
                .enumerate()
                .map(|(k, &(e, t))| BoundaryCharge {
                    position: Complex64::from_polar(1.0, t / 3.0 + TAU * k as f64 / 3.0),
                    eta: e as f64 / 2.0,
                })
                .collect();
            let mut ch = ChargeConfig { bulk, boundary, extra_degree: 0 };
            // κ₀ + p + q/2 = 0 with κ₀ = n/R + Σα + Ση/2 − Q
            let target = -(p as f64) - q as f64 / 2.0 - ch.alpha_sum() - ch.eta_sum() / 2.0 - 1.5;
            ch.extra_degree = (4.0 * target).round() as i64;
            (ch, p, q)
        })
}

#[test]
fn pair_of_minus_one_charges_is_boundary_screened() {
    let res = disk_correlator(&CorrelatorConfig::disk(params(), pair())).unwrap();
    assert_eq!(res.neutrality_set, vec![(0, 1)]);
    assert_eq!(res.per_term.len(), 1);
    // −μ_∂ · I(0, 1)
    assert_eq!(res.value, -res.per_term[0].integral);
    assert!(res.value.re < 0.0);
}

#[test]
fn non_neutral_configuration_gives_exact_zero() {
    let ch = ChargeConfig { bulk: vec![bulk(0.0, Complex64::new(0.2, 0.1), 0, 0.0)], ..Default::default() };
    let res = disk_correlator(&CorrelatorConfig::disk(params(), ch)).unwrap();
    assert!(res.neutrality_set.is_empty());
    assert_eq!(res.value, Complex64::new(0.0, 0.0));
    assert!(res.per_term.is_empty());
}

#[test]
fn zero_coupling_term_is_skipped() {
    let mut p = params();
    p.mu_boundary = Complex64::new(0.0, 0.0);
    let res = disk_correlator(&CorrelatorConfig::disk(p, pair())).unwrap();
    assert_eq!(res.value, Complex64::new(0.0, 0.0));
    assert_eq!(res.per_term[0].n_samples, 0);
}

#[test]
fn charge_free_moment_mc_matches_the_pair_factor() {
    let mut cfg = CorrelatorConfig::disk(params(), pair());
    cfg.epsilon = 0.01;
    cfg.n_samples = 20_000;
    cfg.seed = 4;
    let x = mc_moment_crosscheck(&cfg, 0, 0).unwrap();
    // (|u−v||1−u v̄|)^{α α'} ∏(1−|u|²)^{α²/2} at u = 0.3, v = −0.4
    let exact = 0.7 * 1.12 * (0.91f64 * 0.84).sqrt();
    assert!((x.deterministic.re - exact).abs() < 1e-12, "{}", x.deterministic);
    assert!(x.z_score < 3.0, "{x:?}");
}

#[test]
fn non_neutral_term_is_refused_by_the_coulomb_gas_route() {
    let cfg = CorrelatorConfig::disk(params(), pair());
    assert!(coulomb_gas_term(&cfg, 1, 0).is_err());
    assert!(coulomb_gas_term(&cfg, 0, 1).is_ok());
}

#[test]
fn backends_agree_on_the_minus_one_pair() {
    let mut cfg = CorrelatorConfig::disk(params(), pair());
    let det = disk_correlator(&cfg).unwrap();
    cfg.backend = Backend::MonteCarlo;
    cfg.n_samples = 20_000;
    cfg.seed = 9;
    let mc = disk_correlator(&cfg).unwrap();
    let z = (mc.value - det.value).norm() / mc.stderr;
    assert!(z < 3.0, "{} ± {} vs {}", mc.value, mc.stderr, det.value);
}

#[test]
fn annulus_sum_is_family_independent() {
    let ch = ChargeConfig {
        bulk: vec![
            bulk(0.5, Complex64::new(0.6, 0.0), 1, 0.3),
            bulk(-0.25, Complex64::from_polar(0.6, 2.0), -2, 1.1),
        ],
        ..Default::default()
    };
    let cfg = CorrelatorConfig::annulus(params(), ch, (-1.0f64).exp());
    let fams: Vec<_> = (0..3)
        .map(|s| random_family(&cfg.surface, &[0.3, 1.1], &mut ChaCha8Rng::seed_from_u64(40 + s)).unwrap())
        .collect();
    let sums = annulus_topological_sum(&cfg, &fams).unwrap();
    let (t0, terms) = &sums[0];
    for (t, _) in &sums[1..] {
        assert!((t - t0).norm() <= 1e-8 * t0.norm(), "{t} vs {t0}");
    }
    let w = annulus_topological_weight(&cfg, &fams[0], terms[0].0).unwrap();
    assert!((w - terms[0].1).norm() <= 1e-8 * w.norm().max(1e-300));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weyl_identity_holds_for_constant_rho((ch, p, q) in neutral_config(), rho in -1.0f64..1.0) {
        let cfg = CorrelatorConfig::disk(params(), ch);
        prop_assume!(cfg.validate().is_ok());
        let set = ciltlab_core::params::neutrality_solutions(&cfg.params, &cfg.charges, 1);
        prop_assert!(set.contains(&(p, q)));
        prop_assert!(weyl_constant_rho_check(&cfg, rho).unwrap() < 1e-10);
    }

    #[test]
    fn full_turn_spin_is_trivial((ch, _, _) in neutral_config()) {
        let p = params();
        prop_assume!(ch.validate(&p).is_ok());
        let full = vec![TAU; ch.bulk.len()];
        prop_assert_eq!(spin_phase(&ch, &p, &full).unwrap(), Complex64::new(1.0, 0.0));
        let zero = vec![0.0; ch.bulk.len()];
        prop_assert_eq!(spin_phase(&ch, &p, &zero).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn spin_slope_is_r_alpha_minus_q_m((ch, _, _) in neutral_config(), j in 0usize..3) {
        let p = params();
        prop_assume!(ch.validate(&p).is_ok());
        let j = j % ch.bulk.len();
        let c = &ch.bulk[j];
        let k = p.radius * (c.alpha - p.q_charge) * c.m as f64;
        let t = 0.1;
        let mut th = vec![0.0; ch.bulk.len()];
        th[j] = t;
        let slope = spin_phase(&ch, &p, &th).unwrap().arg() / t;
        prop_assert!((slope - k).abs() < 1e-12, "{} vs {}", slope, k);
    }
}
