//! One function per subcommand: read parameters, call the core, shape the
//! report payload.

use crate::kv::{Params, UResult, Usage};
use ciltlab_core::correlator::{
    annulus_topological_sum, annulus_topological_weight, disk_correlator, spin_phase, weyl_constant_rho_check,
    Backend, CorrelatorConfig,
};
use ciltlab_core::coulomb::{
    fyodorov_bouchaud, mixed_integral_mc, morris_closed_form, selberg_mc, selberg_quadrature, MorrisParams,
};
use ciltlab_core::geometry::gauss_bonnet_defect;
use ciltlab_core::gff::{harmonic_extension_dtn, two_point_mc, BoundaryGff, KernelKind, TrigSeries};
use ciltlab_core::gmc::{
    gmc_first_moment, gmc_moments_mc, gmc_second_moment, gmc_second_moment_fixed_eps, l2_gap, NodeScheme,
};
use ciltlab_core::mc::substream;
use ciltlab_core::params::{central_charge, delta_boundary, delta_bulk, validate_params};
use ciltlab_core::topology::curvature::lattice_distance;
use ciltlab_core::topology::family::build;
use ciltlab_core::topology::{anomaly, random_family, theta_sum, HarmonicForm, SeparatingFamily};
use ciltlab_core::{
    BoundaryCharge, BulkCharge, ChargeConfig, Complex64, ConformalFactor, Error, GmcSpec, ParamSet, SurfaceSpec,
    Weight,
};
use clap::ValueEnum;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sub {
    Params,
    GaussBonnet,
    Anomaly,
    ThetaSum,
    GffCov,
    Dtn,
    GmcMoment,
    GmcGap,
    Morris,
    Selberg,
    MixedIntegral,
    Correlator,
    WeylCheck,
    Spin,
    AnnulusWeight,
}

#[derive(Debug)]
pub enum Failure {
    Usage(Usage),
    Core(Error),
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Self {
        Failure::Usage(u)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Run<T> = std::result::Result<T, Failure>;

/// One CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub term_id: String,
    pub value: Complex64,
    pub stderr: f64,
    pub n_samples: u64,
}

impl Row {
    fn exact(term_id: impl Into<String>, v: f64) -> Self {
        Row { term_id: term_id.into(), value: Complex64::new(v, 0.0), stderr: 0.0, n_samples: 0 }
    }
}

pub struct Outcome {
    pub params: Option<ParamSet>,
    pub result: Value,
    pub rows: Vec<Row>,
    pub summary: String,
}

pub struct Ctx<'a> {
    pub p: &'a Params,
    pub seed: u64,
    pub n_samples: Option<u64>,
}

impl Ctx<'_> {
    fn n(&self, default: u64) -> u64 {
        self.n_samples.unwrap_or(default)
    }
}

pub fn run(sub: Sub, ctx: &Ctx) -> Run<Outcome> {
    match sub {
        Sub::Params => params(ctx),
        Sub::GaussBonnet => gauss_bonnet(ctx),
        Sub::Anomaly => anomaly_cmd(ctx),
        Sub::ThetaSum => theta(ctx),
        Sub::GffCov => gff_cov(ctx),
        Sub::Dtn => dtn(ctx),
        Sub::GmcMoment => gmc_moment(ctx),
        Sub::GmcGap => gmc_gap(ctx),
        Sub::Morris => morris(ctx),
        Sub::Selberg => selberg(ctx),
        Sub::MixedIntegral => mixed(ctx),
        Sub::Correlator => correlator(ctx),
        Sub::WeylCheck => weyl(ctx),
        Sub::Spin => spin(ctx),
        Sub::AnnulusWeight => annulus_weight(ctx),
    }
}

fn param_set(p: &Params, radius: f64, mu_b: f64) -> Run<ParamSet> {
    let beta = p.f64_or("beta", 1.0)?;
    let radius = p.f64_or("radius", radius)?;
    let mu = p.complex_or("mu", Complex64::new(1.0, 0.0))?;
    let mu_b = p.complex_or("mu-boundary", Complex64::new(mu_b, 0.0))?;
    let corners = p.bool_or("corners", false)?;
    Ok(validate_params(beta, radius, mu, mu_b, corners)?)
}

fn params(ctx: &Ctx) -> Run<Outcome> {
    let p = ctx.p;
    let ps = param_set(p, 4.0, 0.0)?;
    let alpha = p.f64_list("alpha")?.unwrap_or_default();
    let m = p.i64_list("m")?.unwrap_or_else(|| vec![0; alpha.len()]);
    if m.len() != alpha.len() {
        return Err(Usage(format!("--m: expected {} entries to match --alpha", alpha.len())).into());
    }
    let eta = p.f64_list("eta")?.unwrap_or_default();
    let bulk: Vec<Value> = alpha
        .iter()
        .zip(&m)
        .map(|(a, m)| json!({"alpha": a, "m": m, "delta": delta_bulk(&ps, *a, *m)}))
        .collect();
    let boundary: Vec<Value> = eta.iter().map(|e| json!({"eta": e, "delta": delta_boundary(&ps, *e)})).collect();
    let c_l = central_charge(ps.q_charge);
    Ok(Outcome {
        params: Some(ps),
        result: json!({"q_charge": ps.q_charge, "c_l": c_l, "constraints": "ok", "bulk": bulk, "boundary": boundary}),
        rows: vec![],
        summary: format!("Q={} c_L={} constraints OK", ps.q_charge, c_l),
    })
}

fn metric(p: &Params) -> UResult<ConformalFactor> {
    Ok(match p.choice("metric", &["flat", "constant", "hemisphere", "bump", "quadratic"], "flat")? {
        "flat" => ConformalFactor::Flat,
        "constant" => ConformalFactor::Constant(p.f64_or("rho-c", 0.0)?),
        "hemisphere" => ConformalFactor::Hemisphere,
        "bump" => ConformalFactor::Bump {
            amplitude: p.f64_or("amplitude", 0.5)?,
            center: p.complex_or("center", Complex64::new(0.0, 0.0))?,
            width: p.f64_or("width", 0.5)?,
        },
        _ => {
            let c = p.f64_list("coefficients")?.unwrap_or_else(|| vec![0.0; 4]);
            let c: [f64; 4] = c
                .try_into()
                .map_err(|_| Usage("--coefficients: expected four numbers c0,c1,c2,c3".into()))?;
            ConformalFactor::Quadratic(c)
        }
    })
}

fn surface(p: &Params, punctures: Vec<Complex64>) -> UResult<SurfaceSpec> {
    Ok(match p.choice("surface", &["disk", "annulus", "half-disk"], "disk")? {
        "disk" => SurfaceSpec::disk(punctures),
        "annulus" => SurfaceSpec::annulus(p.f64_or("inner-radius", (-1.0f64).exp())?, punctures),
        _ => SurfaceSpec::half_disk(),
    })
}

fn gauss_bonnet(ctx: &Ctx) -> Run<Outcome> {
    let p = ctx.p;
    let s = surface(p, vec![])?;
    let rho = metric(p)?;
    let order = p.u64_or("quad-order", 64)? as usize;
    let d = gauss_bonnet_defect(&s, &rho, order)?;
    Ok(Outcome {
        params: None,
        result: json!({"euler_char": s.euler_char, "defect": d}),
        rows: vec![Row::exact("defect", d)],
        summary: format!("Gauss-Bonnet defect {d:e}"),
    })
}

/// Random interior point at least 1e-3 from the curves and 1e-2 from the
/// punctures.
fn clear_point<R: Rng>(rng: &mut R, fams: &[&SeparatingFamily], s: &SurfaceSpec) -> Complex64 {
    loop {
        let lo = s.inner_radius + 0.05;
        let z = Complex64::from_polar(rng.random_range(lo..0.95), rng.random_range(0.0..TAU));
        let clear = fams.iter().all(|f| f.curves.iter().all(|c| c.pieces.iter().all(|q| q.distance(z) > 1e-3)))
            && s.punctures.iter().all(|q| (q - z).norm() > 1e-2);
        if clear {
            return z;
        }
    }
}

fn spaced_punctures<R: Rng>(rng: &mut R, n: usize, lo: f64) -> Vec<Complex64> {
    loop {
        let pts: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(rng.random_range(lo + 0.1..0.85), rng.random_range(0.0..TAU)))
            .collect();
        if (0..n).all(|i| (0..i).all(|j| (pts[i] - pts[j]).norm() > 0.2)) {
            return pts;
        }
    }
}

fn anomaly_cmd(ctx: &Ctx) -> Run<Outcome> {
    let p = ctx.p;
    match p.choice("case", &["move", "random"], "move")? {
        "move" => {
            let (s, fa, fb) = build::inner_to_puncture_move();
            let m = p.i64_list("m")?.unwrap_or_else(|| vec![1, 0]);
            if m.len() != 2 {
                return Err(Usage("--m: the move geometry has two punctures".into()).into());
            }
            let k = p.i64_or("k", 0)?;
            let base = p.complex_or("base", Complex64::new(0.0, -0.6))?;
            let f = HarmonicForm::neumann(&s, &m, k)?;
            let an = anomaly(&f, &fa, &fb, base)?;
            let expected = TAU * m[0] as f64;
            Ok(Outcome {
                params: None,
                result: json!({"anomaly": an, "expected": expected, "error": (an - expected).abs()}),
                rows: vec![Row::exact("move", an)],
                summary: format!("K' - K = {an} (2 pi m1 = {expected})"),
            })
        }
        _ => {
            let pairs = p.u64_or("pairs", 20)?;
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for i in 0..pairs {
                let mut rng = substream(ctx.seed, i);
                let np = rng.random_range(1..=3usize);
                let r = rng.random_range(0.2..0.45);
                let s = SurfaceSpec::annulus(r, spaced_punctures(&mut rng, np, r));
                let m: Vec<i64> = (0..np).map(|_| rng.random_range(-2..=2)).collect();
                let k = rng.random_range(-2..=2);
                let tang: Vec<f64> = (0..np).map(|_| rng.random_range(0.0..TAU)).collect();
                let fa = random_family(&s, &tang, &mut rng)?;
                let fb = random_family(&s, &tang, &mut rng)?;
                let f = HarmonicForm::neumann(&s, &m, k)?;
                let x0 = clear_point(&mut rng, &[&fa, &fb], &s);
                let an = anomaly(&f, &fa, &fb, x0)?;
                worst = worst.max(lattice_distance(an, PI));
                rows.push(Row::exact(format!("pair-{i}"), an));
            }
            let values: Vec<f64> = rows.iter().map(|r| r.value.re / PI).collect();
            Ok(Outcome {
                params: None,
                result: json!({"anomaly_over_pi": values, "max_distance_to_pi_z": worst}),
                rows,
                summary: format!("{pairs} family pairs, max distance to pi*Z {worst:e}"),
            })
        }
    }
}

fn theta(ctx: &Ctx) -> Run<Outcome> {
    let p = ctx.p;
    let r = p.f64_or("inner-radius", (-1.0f64).exp())?;
    let radius = p.f64_or("radius", 2.0)?;
    let a = p.f64_or("a", PI * radius * radius)?;
    let z = p.complex_list("z")?.unwrap_or_default();
    let m = p.i64_list("m")?.unwrap_or_else(|| vec![0; z.len()]);
    if m.len() != z.len() {
        return Err(Usage(format!("--m: expected {} entries to match --z", z.len())).into());
    }
    let s = SurfaceSpec::annulus(r, z);
    let v = theta_sum(&s, &m, a, &metric(p)?)?;
    Ok(Outcome {
        params: None,
        result: json!({"a": a, "value": v}),
        rows: vec![Row::exact("theta", v)],
        summary: format!("theta sum {v}"),
    })
}

fn kernel(p: &Params) -> UResult<KernelKind> {
    Ok(match p.choice("kind", &["circle", "half-circle"], "circle")? {
        "circle" => KernelKind::CircleGff,
        _ => KernelKind::HalfCircleGff,
    })
}

fn mc_json(e: &ciltlab_core::McEstimate) -> Value {
    json!({"value": [e.value.re, e.value.im], "stderr": e.stderr, "n_samples": e.n_samples, "seed": e.seed})
}

fn mc_row(id: &str, e: &ciltlab_core::McEstimate) -> Row {
    Row { term_id: id.into(), value: e.value, stderr: e.stderr, n_samples: e.n_samples }
}

fn gff_cov(ctx: &Ctx) -> Run<Outcome> {
    let p = ctx.p;
    let kind = kernel(p)?;
    let modes = p.u64_or("modes", 2048)? as usize;
    let t1 = p.f64_or("t1", 0.0)?;
    let t2 = p.f64_or("t2", PI)?;
    let e = two_point_mc(kind, modes, t1, t2, ctx.n(100_000), ctx.seed)?;
    let series = BoundaryGff::truncated_covariance(kind, modes, t1, t2);
    let z = e.z_score(Complex64::new(series, 0.0));
    Ok(Outcome {
        params: None,
        result: json!({"estimate": mc_json(&e), "truncated_covariance": series, "z_score": z}),
        rows: vec![mc_row("covariance", &e)],
        summary: format!("E[X X] = {} +- {} vs series {series} (z = {z:.2})", e.value.re, e.stderr),
    })
}

fn dtn(ctx: &Ctx) -> Run<Outcome> {
    let nmax = ctx.p.u64_or("n-max", 8)? as usize;
    let mut rows = Vec::new();
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    for n in 1..=nmax {
        let mut a = vec![0.0; n];
        a[n - 1] = 1.0;
        let ext = harmonic_extension_dtn(&TrigSeries { a0: 0.0, a, b: vec![] });
        let want = n as f64 * PI;
        worst = worst.max((ext.energy_quadrature - want).abs());
        out.push(json!({"n": n, "energy_quadrature": ext.energy_quadrature, "energy_modes": ext.energy_modes}));
        rows.push(Row::exact(format!("cos{n}"), ext.energy_quadrature));
    }
    Ok(Outcome {
        params: None,
        result: json!({"modes": out, "max_error_vs_n_pi": worst}),
        rows,
        summary: format!("Dirichlet energies of cos n theta, max |E - n pi| = {worst:e}"),
    })
}

fn gmc_spec(p: &Params) -> Run<GmcSpec> {
    let beta = p.f64_or("beta", 1.0)?;
    let eps = p.f64_or("epsilon", 0.005)?;
    let spec = match p.choice("region", &["bulk", "boundary"], "bulk")? {
        "bulk" => GmcSpec::bulk(beta, eps, Weight::indicator(p.f64_or("support", 0.5)?)),
        _ => GmcSpec::boundary(beta, eps, Weight::constant(Complex64::new(1.0, 0.0))),
    };
    spec.validate()?;
    Ok(spec)
}

fn gmc_moment(ctx: &Ctx) -> Run<Outcome> {
    let p = ctx.p;
    let spec = gmc_spec(p)?;
    let nodes = p.u64_or("nodes", 32)? as usize;
    let scheme = match p.choice("scheme", &["random", "grid"], "random")? {
        "random" => NodeScheme::Random,
        _ => NodeScheme::Grid,
    };
    let with_fixed = p.bool_or("fixed-eps-oracle", true)?;
    let (first, second) = gmc_moments_mc(&spec, scheme, nodes, ctx.n(100_000), ctx.seed)?;
    let first_exact = gmc_first_moment(&spec)?;
    let limit = gmc_second_moment(&spec)?;
    let fixed = if with_fixed && spec.region == ciltlab_core::Region::Bulk {
        Some(gmc_second_moment_fixed_eps(&spec)?)
    } else {
        None
    };
    let target = fixed.unwrap_or(limit);
    let z = second.z_score(Complex64::new(target, 0.0));
    Ok(Outcome {
        params: None,
        result: json!({
            "first_moment": mc_json(&first),
            "first_moment_quadrature": [first_exact.re, first_exact.im],
            "second_moment": mc_json(&second),
            "second_moment_limit": limit,
            "second_moment_fixed_eps": fixed,
            "z_score": z,
        }),
        rows: vec![mc_row("first", &first), mc_row("second", &second)],
        summary: format!("E|M|^2 = {} +- {} vs quadrature {target} (z = {z:.2})", second.value.re, second.stderr),
    })
}

fn gmc_gap(ctx: &Ctx) -> Run<Outcome> {
    let p = ctx.p;
    let spec = gmc_spec(p)?;
    let eps = p.f64_list("eps")?.unwrap_or_else(|| vec![0.02, 0.01, 0.005]);
    let mut gaps = Vec::new();
    let mut rows = Vec::new();
    for w in eps.windows(2) {
        let g = l2_gap(&spec, w[0], w[1])?;
        rows.push(Row::exact(format!("{}-{}", w[0], w[1]), g));
        gaps.push(g);
    }
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    Ok(Outcome {
        params: None,
        result: json!({"eps": eps, "gaps": gaps, "strictly_decreasing": decreasing}),
        rows,
        summary: format!("L2 gaps {gaps:?}, strictly decreasing: {decreasing}"),
    })
}

fn circular(ctx: &Ctx, q: u32, a: f64, c: f64, closed: f64) -> Run<(Value, Vec<Row>, String)> {
    let nodes = ctx.p.u64_or("nodes", 256)? as usize;
    let mc = selberg_mc(q, 2.0 * a, 2.0 * c, Complex64::new(1.0, 0.0), ctx.n(1_000_000), ctx.seed)?;
    let z = mc.z_score(Complex64::new(closed, 0.0));
    let quad = if q <= 2 { Some(selberg_quadrature(q, 2.0 * a, 2.0 * c, nodes)?) } else { None };
    let rel = quad.map(|v| (v / closed - 1.0).abs());
    let mut rows = vec![Row::exact("closed_form", closed), mc_row("monte_carlo", &mc)];
    if let Some(v) = quad {
        rows.push(Row::exact("quadrature", v));
    }
    let summary = format!("closed form {closed}, MC {} +- {} (|z| = {z:.2})", mc.value.re, mc.stderr);
    Ok((
        json!({"closed_form": closed, "monte_carlo": mc_json(&mc), "z_score": z, "quadrature": quad, "quadrature_rel_error": rel}),
        rows,
        summary,
    ))
}

fn morris(ctx: &Ctx) -> Run<Outcome> {
    let p = ctx.p;
    let q = p.u64_or("q", 2)? as u32;
    let beta = p.f64_or("beta", 1.0)?;
    let eta = p.f64_or("eta", 2.0)?;
    let mp = MorrisParams::from_charges(q, eta, beta);
    mp.check()?;
    let closed = morris_closed_form(&mp)?;
    let (result, rows, summary) = circular(ctx, q, mp.a, mp.c, closed)?;
    Ok(Outcome { params: None, result, rows, summary })
}

fn selberg(ctx: &Ctx) -> Run<Outcome> {
    let p = ctx.p;
    let q = p.u64_or("q", 1)? as u32;
    let beta = p.f64_or("beta", 1.0)?;
    let eta = p.f64_or("eta", 0.0)?;
    let mp = MorrisParams::from_charges(q, eta, beta);
    mp.check()?;
    let closed = if eta == 0.0 { fyodorov_bouchaud(q, beta)? } else { morris_closed_form(&mp)? };
    let (result, rows, summary) = circular(ctx, q, mp.a, mp.c, closed)?;
    Ok(Outcome { params: None, result, rows, summary })
}

fn mixed(ctx: &Ctx) -> Run<Outcome> {
    let p = ctx.p;
    let pp = p.u64_or("p", 1)? as u32;
    let q = p.u64_or("q", 1)? as u32;
    let alpha = p.f64_or("alpha", 0.0)?;
    let eta = p.f64_or("eta", 0.0)?;
    let beta = p.f64_or("beta", 1.0)?;
    let m = mixed_integral_mc(pp, q, alpha, eta, beta, ctx.n(100_000), ctx.seed)?;
    Ok(Outcome {
        params: None,
        result: json!({"estimate": mc_json(&m.estimate), "warnings": m.warnings}),
        rows: vec![mc_row("integral", &m.estimate)],
        summary: format!("mixed integral {} +- {}", m.estimate.value.re, m.estimate.stderr),
    })
}

/// Charges from --alpha/--m/--z/--tangent and --eta/--eta-angle.
///
/// Default bulk positions are evenly spaced on the circle of radius
/// `ring`; default boundary angles are evenly spaced from 0.
fn charges(p: &Params, ring: f64) -> Run<ChargeConfig> {
    let alpha = p.f64_list("alpha")?.unwrap_or_default();
    let n = alpha.len();
    let check = |key: &str, len: usize| -> UResult<()> {
        if len != n {
            return Err(Usage(format!("--{key}: expected {n} entries to match --alpha")));
        }
        Ok(())
    };
    let m = p.i64_list("m")?.unwrap_or_else(|| vec![0; n]);
    check("m", m.len())?;
    let z = p
        .complex_list("z")?
        .unwrap_or_else(|| (0..n).map(|j| Complex64::from_polar(ring, TAU * j as f64 / n as f64)).collect());
    check("z", z.len())?;
    let tangent = p.f64_list("tangent")?.unwrap_or_else(|| vec![0.0; n]);
    check("tangent", tangent.len())?;
    let eta = p.f64_list("eta")?.unwrap_or_default();
    let k = eta.len();
    let angles = p
        .f64_list("eta-angle")?
        .unwrap_or_else(|| (0..k).map(|j| TAU * j as f64 / k as f64).collect());
    if angles.len() != k {
        return Err(Usage(format!("--eta-angle: expected {k} entries to match --eta")).into());
    }
    Ok(ChargeConfig {
        bulk: (0..n)
            .map(|j| BulkCharge { position: z[j], alpha: alpha[j], m: m[j], tangent_angle: tangent[j] })
            .collect(),
        boundary: (0..k)
            .map(|j| BoundaryCharge { position: Complex64::from_polar(1.0, angles[j]), eta: eta[j] })
            .collect(),
        extra_degree: p.i64_or("degree", 0)?,
    })
}

fn correlator_config(ctx: &Ctx) -> Run<CorrelatorConfig> {
    let p = ctx.p;
    let ps = param_set(p, 4.0, 1.0)?;
    let kind = p.choice("surface", &["disk", "annulus"], "disk")?;
    let mut cfg = if kind == "disk" {
        CorrelatorConfig::disk(ps, charges(p, 0.5)?)
    } else {
        let r = p.f64_or("inner-radius", (-1.0f64).exp())?;
        CorrelatorConfig::annulus(ps, charges(p, 0.5 * (1.0 + r))?, r)
    };
    cfg.backend = match p.choice("backend", &["coulomb-gas", "monte-carlo"], "coulomb-gas")? {
        "coulomb-gas" => Backend::CoulombGas,
        _ => Backend::MonteCarlo,
    };
    cfg.epsilon = p.f64_or("epsilon", 0.01)?;
    cfg.n_samples = ctx.n(100_000);
    cfg.seed = ctx.seed;
    if p.raw("base").is_some() {
        cfg.base = Some(p.complex_or("base", Complex64::new(0.0, 0.0))?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn correlator(ctx: &Ctx) -> Run<Outcome> {
    let cfg = correlator_config(ctx)?;
    let res = disk_correlator(&cfg)?;
    let rows = res
        .per_term
        .iter()
        .map(|t| Row {
            term_id: format!("p{}q{}", t.p, t.q),
            value: t.contribution,
            stderr: t.stderr,
            n_samples: t.n_samples,
        })
        .collect();
    let set: Vec<String> = res.neutrality_set.iter().map(|(p, q)| format!("({p},{q})")).collect();
    let summary = format!("neutrality set {{{}}}, value {}", set.join(","), res.value);
    Ok(Outcome {
        params: Some(cfg.params),
        result: serde_json::to_value(&res).expect("serializable"),
        rows,
        summary,
    })
}

fn weyl(ctx: &Ctx) -> Run<Outcome> {
    let cfg = correlator_config(ctx)?;
    let rho = ctx.p.f64_or("rho-c", 0.3)?;
    let r = weyl_constant_rho_check(&cfg, rho)?;
    Ok(Outcome {
        params: Some(cfg.params),
        result: json!({"rho": rho, "residual": r}),
        rows: vec![Row::exact("residual", r)],
        summary: format!("Weyl residual {r:e}"),
    })
}

fn spin(ctx: &Ctx) -> Run<Outcome> {
    let p = ctx.p;
    let ps = param_set(p, 4.0, 0.0)?;
    let ch = charges(p, 0.5)?;
    ch.validate(&ps)?;
    let theta = p.f64_list("theta")?.unwrap_or_else(|| vec![TAU; ch.bulk.len()]);
    let phase = spin_phase(&ch, &ps, &theta)?;
    let slopes: Vec<f64> = ch
        .bulk
        .iter()
        .map(|c| ps.radius * (c.alpha - ps.q_charge) * c.m as f64)
        .collect();
    Ok(Outcome {
        params: Some(ps),
        result: json!({"theta": theta, "phase": [phase.re, phase.im], "slopes": slopes}),
        rows: vec![Row { term_id: "phase".into(), value: phase, stderr: 0.0, n_samples: 0 }],
        summary: format!("spin phase {phase}"),
    })
}

fn annulus_weight(ctx: &Ctx) -> Run<Outcome> {
    let p = ctx.p;
    let cfg = correlator_config(ctx)?;
    if cfg.surface.kind != ciltlab_core::SurfaceKind::Annulus {
        return Err(Usage("--surface: annulus-weight needs annulus".into()).into());
    }
    let count = p.u64_or("families", 5)?;
    let tang: Vec<f64> = cfg.charges.bulk.iter().map(|c| c.tangent_angle).collect();
    let fams = (0..count)
        .map(|i| random_family(&cfg.surface, &tang, &mut substream(ctx.seed, i)))
        .collect::<ciltlab_core::Result<Vec<_>>>()?;
    if let Some(k) = p.opt::<i64>("k", "an integer")? {
        let mut rows = Vec::new();
        for (i, f) in fams.iter().enumerate() {
            let w = annulus_topological_weight(&cfg, f, k)?;
            rows.push(Row { term_id: format!("family-{i}/k={k}"), value: w, stderr: 0.0, n_samples: 0 });
        }
        let ws: Vec<[f64; 2]> = rows.iter().map(|r| [r.value.re, r.value.im]).collect();
        return Ok(Outcome {
            params: Some(cfg.params),
            result: json!({"k": k, "weights": ws}),
            rows,
            summary: format!("weights at k = {k} for {count} families"),
        });
    }
    let sums = annulus_topological_sum(&cfg, &fams)?;
    let mut rows = Vec::new();
    let mut totals = Vec::new();
    for (i, (t, terms)) in sums.iter().enumerate() {
        totals.push([t.re, t.im]);
        for (k, w) in terms {
            rows.push(Row { term_id: format!("family-{i}/k={k}"), value: *w, stderr: 0.0, n_samples: 0 });
        }
    }
    let t0 = sums.first().map(|s| s.0).unwrap_or_default();
    let spread = sums.iter().map(|(t, _)| (t - t0).norm()).fold(0.0, f64::max) / t0.norm().max(f64::MIN_POSITIVE);
    Ok(Outcome {
        params: Some(cfg.params),
        result: json!({"totals": totals, "relative_spread": spread}),
        rows,
        summary: format!("topological sums over {count} families, relative spread {spread:e}"),
    })
}
