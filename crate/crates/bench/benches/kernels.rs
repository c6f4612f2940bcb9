use ciltlab_core::coulomb::{selberg_mc, selberg_quadrature};
use ciltlab_core::gff::double_log_average;
use ciltlab_core::gmc::{gmc_moments_mc, gmc_second_moment, NodeScheme};
use ciltlab_core::topology::family::build;
use ciltlab_core::topology::{anomaly, theta_sum, HarmonicForm};
use ciltlab_core::{Complex64, ConformalFactor, GmcSpec, SurfaceSpec, Weight};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn coulomb(c: &mut Criterion) {
    c.bench_function("selberg_quadrature q=2 256 nodes", |b| {
        b.iter(|| selberg_quadrature(2, black_box(1.0), 0.5, 256).unwrap())
    });
    c.bench_function("selberg_mc q=2 10k samples", |b| {
        b.iter(|| selberg_mc(2, 0.0, 0.5, Complex64::new(1.0, 0.0), 10_000, black_box(3)).unwrap())
    });
}

fn gmc(c: &mut Criterion) {
    let spec = GmcSpec::bulk(1.0, 0.005, Weight::indicator(0.5));
    c.bench_function("double_log_average", |b| b.iter(|| double_log_average(black_box(0.007), 0.005, 0.01)));
    let mut g = c.benchmark_group("gmc");
    g.sample_size(10);
    g.bench_function("second moment limit", |b| b.iter(|| gmc_second_moment(black_box(&spec)).unwrap()));
    g.bench_function("mc K=16 2k samples", |b| {
        b.iter(|| gmc_moments_mc(&spec, NodeScheme::Random, 16, 2_000, black_box(1)).unwrap())
    });
    g.finish();
}

fn topology(c: &mut Criterion) {
    let (s, fa, fb) = build::inner_to_puncture_move();
    let f = HarmonicForm::neumann(&s, &[1, 0], 0).unwrap();
    let mut g = c.benchmark_group("topology");
    g.sample_size(10);
    g.bench_function("anomaly of the move", |b| {
        b.iter(|| anomaly(&f, &fa, &fb, black_box(Complex64::new(0.0, -0.6))).unwrap())
    });
    let a = SurfaceSpec::annulus((-1.0f64).exp(), vec![]);
    g.bench_function("theta sum", |b| {
        b.iter(|| theta_sum(&a, &[], black_box(4.0 * std::f64::consts::PI), &ConformalFactor::Flat).unwrap())
    });
    g.finish();
}

criterion_group!(benches, coulomb, gmc, topology);
criterion_main!(benches);
