use ciltlab_core::geometry::{ConformalFactor, SurfaceSpec};
use ciltlab_core::topology::curvature::{base_point_change, lattice_distance};
use ciltlab_core::topology::family::build;
use ciltlab_core::topology::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

fn punctures(rng: &mut ChaCha8Rng, n: usize, lo: f64) -> Vec<Complex64> {
    loop {
        let pts: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(rng.random_range(lo + 0.1..0.85), rng.random_range(0.0..TAU)))
            .collect();
        let ok = (0..n).all(|i| (0..i).all(|j| (pts[i] - pts[j]).norm() > 0.2));
        if ok {
            return pts;
        }
    }
}

fn base_point(rng: &mut ChaCha8Rng, fams: &[&SeparatingFamily], s: &SurfaceSpec) -> Complex64 {
    loop {
        let lo = s.inner_radius + 0.05;
        let z = Complex64::from_polar(rng.random_range(lo..0.95), rng.random_range(0.0..TAU));
        let clear = fams.iter().all(|f| f.curves.iter().all(|c| c.pieces.iter().all(|p| p.distance(z) > 1e-3)))
            && s.punctures.iter().all(|p| (p - z).norm() > 1e-2);
        if clear {
            return z;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn family_change_is_quantized(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let np = rng.random_range(1..=3usize);
        let a = SurfaceSpec::annulus(rng.random_range(0.2..0.45), vec![]);
        let s = SurfaceSpec::annulus(a.inner_radius, punctures(&mut rng, np, a.inner_radius));
        let m: Vec<i64> = (0..np).map(|_| rng.random_range(-2..=2)).collect();
        let k = rng.random_range(-2..=2);
        let tang: Vec<f64> = (0..np).map(|_| rng.random_range(0.0..TAU)).collect();
        let fa = random_family(&s, &tang, &mut rng).unwrap();
        let fb = random_family(&s, &tang, &mut rng).unwrap();
        let f = HarmonicForm::neumann(&s, &m, k).unwrap();
        let x0 = base_point(&mut rng, &[&fa, &fb], &s);
        let an = anomaly(&f, &fa, &fb, x0).unwrap();
        prop_assert!(lattice_distance(an, PI) < 1e-6, "anomaly {an}");
    }

    #[test]
    fn base_point_rule_on_the_disk(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let np = rng.random_range(1..=2usize);
        let s = SurfaceSpec::disk(punctures(&mut rng, np, 0.0));
        let m: Vec<i64> = (0..np).map(|_| rng.random_range(-2..=2)).collect();
        let tang: Vec<f64> = (0..np).map(|_| rng.random_range(0.0..TAU)).collect();
        let fam = random_family(&s, &tang, &mut rng).unwrap();
        let f = HarmonicForm::neumann(&s, &m, 0).unwrap();
        let x0 = base_point(&mut rng, &[&fam], &s);
        let x1 = base_point(&mut rng, &[&fam], &s);
        let flat = ConformalFactor::Flat;
        let lhs = curvature_term(&f, &fam, x1, &flat).unwrap() - curvature_term(&f, &fam, x0, &flat).unwrap();
        let rhs = base_point_change(&f, &fam, x0, x1).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
    }

    #[test]
    fn conformal_covariance_of_the_norm(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let np = rng.random_range(1..=2usize);
        let s = if rng.random_bool(0.5) {
            SurfaceSpec::disk(punctures(&mut rng, np, 0.0))
        } else {
            SurfaceSpec::annulus(0.3, punctures(&mut rng, np, 0.3))
        };
        let m: Vec<i64> = (0..np).map(|_| rng.random_range(-2..=2)).collect();
        let k = if s.inner_radius > 0.0 { rng.random_range(-2..=2) } else { 0 };
        let f = HarmonicForm::neumann(&s, &m, k).unwrap();
        let rho = ConformalFactor::Bump {
            amplitude: rng.random_range(-1.0..1.0),
            center: Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
            width: rng.random_range(0.3..0.8),
        };
        let d = regularized_norm(&f, &rho).unwrap() - regularized_norm(&f, &ConformalFactor::Flat).unwrap();
        let want: f64 = s.punctures.iter().zip(&m).map(|(z, mi)| (mi * mi) as f64 * rho.value(*z)).sum::<f64>() / (4.0 * PI);
        prop_assert!((d - want).abs() < 1e-8, "{d} vs {want}");
    }

    #[test]
    fn theta_sum_monotone_and_even(a in 0.5f64..20.0, da in 0.1f64..5.0, r in 0.2f64..0.6) {
        let s = SurfaceSpec::annulus(r, vec![]);
        let flat = ConformalFactor::Flat;
        let t0 = theta_sum(&s, &[], a, &flat).unwrap();
        let t1 = theta_sum(&s, &[], a + da, &flat).unwrap();
        prop_assert!(t1 < t0);
        let p = SurfaceSpec::annulus(r, vec![Complex64::new(0.5 * (1.0 + r), 0.1)]);
        let u = theta_sum(&p, &[2], a, &flat).unwrap();
        let v = theta_sum(&p, &[-2], a, &flat).unwrap();
        prop_assert!((u - v).abs() < 1e-9 * u.abs().max(1e-300));
    }
}

#[test]
fn inner_to_puncture_move_gives_two_pi_m1() {
    let (s, fa, fb) = build::inner_to_puncture_move();
    fa.validate(&s).unwrap();
    fb.validate(&s).unwrap();
    for (m1, m2, k) in [(1, 0, 0), (2, -1, 1), (-2, 2, -1)] {
        let f = HarmonicForm::neumann(&s, &[m1, m2], k).unwrap();
        let an = anomaly(&f, &fa, &fb, Complex64::new(0.0, -0.6)).unwrap();
        assert!((an - TAU * m1 as f64).abs() < 1e-6, "{an}");
    }
}

#[test]
fn metric_rule_with_and_without_neumann_condition() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let z = vec![Complex64::new(0.35, -0.2)];
    let s = SurfaceSpec::disk(z.clone());
    let fam = random_family(&s, &[1.0], &mut rng).unwrap();
    let x0 = base_point(&mut rng, &[&fam], &s);
    let rho = ConformalFactor::Quadratic([0.1, 0.3, -0.2, 0.4]);
    for f in [
        HarmonicForm::neumann(&s, &[2], 0).unwrap(),
        HarmonicForm::from_vortices(
            &s,
            vec![
                Vortex { center: z[0], strength: 1.0 },
                Vortex { center: Complex64::new(1.3, 0.6), strength: -0.6 },
            ],
        )
        .unwrap(),
    ] {
        let lhs = curvature_term(&f, &fam, x0, &rho).unwrap() - curvature_term(&f, &fam, x0, &ConformalFactor::Flat).unwrap();
        let rhs = metric_change(&f, &rho).unwrap();
        assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
    }
}

#[test]
fn family_text_is_stable() {
    let (s, fa, _) = build::inner_to_puncture_move();
    let back = SeparatingFamily::from_text(&fa.to_text()).unwrap();
    back.validate(&s).unwrap();
    assert_eq!(back.to_text(), fa.to_text());
}
