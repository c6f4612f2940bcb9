//! Correlation functions on the flat unit disk from the neutrality
//! expansion, and topological weights on the annulus.
//!
//! A term (p, q) of the expansion is the moment
//! I(p, q) = 𝔼[∏ V_α ∏ V_η M^p L^q] of the vertex insertions and the bulk
//! and boundary chaos integrals. Two evaluations are provided: a
//! Coulomb-gas route (Gaussian moments done by hand, then integrated over
//! the screening positions) and a Monte Carlo route that samples the
//! regularized field.
//!
//! Normalization: the zero-mode integral ∫₀^{2πR} e^{iκc} dc = 2πR·[κ = 0]
//! is reported as `zero_mode_volume` and is not folded into `value`.

use crate::coulomb::{screening_mc, CoulombGas};
use crate::error::{Error, Result};
use crate::geometry::{ConformalFactor, SurfaceKind, SurfaceSpec};
use crate::gff::{CovarianceKernel, FieldSampler};
use crate::mc::{estimate, McEstimate};
use crate::params::{
    central_charge, delta_boundary, delta_bulk, neutrality_solutions, on_lattice, ChargeConfig, ParamSet,
};
use crate::quad::{guarded, integrate_with_breaks, take};
use crate::topology::{curvature_term, random_family, regularized_norm, HarmonicForm, Primitive, SeparatingFamily};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::cell::RefCell;
use std::f64::consts::{PI, TAU};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Backend {
    CoulombGas,
    MonteCarlo,
}

#[derive(Debug, Clone)]
pub struct CorrelatorConfig {
    pub params: ParamSet,
    pub charges: ChargeConfig,
    pub surface: SurfaceSpec,
    pub backend: Backend,
    /// Regularization radius of the Monte Carlo backend.
    pub epsilon: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Separating family for magnetic insertions; drawn from `seed` if absent.
    pub family: Option<SeparatingFamily>,
    /// Base point of the primitive; the first admissible default if absent.
    pub base: Option<Complex64>,
}

impl CorrelatorConfig {
    /// Disk configuration with the Coulomb-gas backend.
    pub fn disk(params: ParamSet, charges: ChargeConfig) -> Self {
        let punctures = charges.bulk.iter().map(|c| c.position).collect();
        CorrelatorConfig {
            params,
            charges,
            surface: SurfaceSpec::disk(punctures),
            backend: Backend::CoulombGas,
            epsilon: 0.01,
            n_samples: 100_000,
            seed: 0,
            family: None,
            base: None,
        }
    }

    /// Annulus of inner radius `r` with the bulk insertions as punctures.
    pub fn annulus(params: ParamSet, charges: ChargeConfig, r: f64) -> Self {
        let punctures = charges.bulk.iter().map(|c| c.position).collect();
        CorrelatorConfig { surface: SurfaceSpec::annulus(r, punctures), ..Self::disk(params, charges) }
    }

    pub fn validate(&self) -> Result<()> {
        self.charges.validate(&self.params)?;
        self.surface.validate()?;
        let pos: Vec<Complex64> = self.charges.bulk.iter().map(|c| c.position).collect();
        if pos.len() != self.surface.punctures.len()
            || pos.iter().zip(&self.surface.punctures).any(|(a, b)| (a - b).norm() > 1e-12)
        {
            return Err(Error::Domain("surface punctures must be the bulk insertion points".into()));
        }
        for c in &self.charges.bulk {
            if !self.surface.is_interior(c.position, 1e-9) {
                return Err(Error::Domain(format!("bulk insertion {} is not interior", c.position)));
            }
        }
        for c in &self.charges.boundary {
            if (c.position.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!(
                    "boundary insertion {} is not on the unit circle",
                    c.position
                )));
            }
        }
        Ok(())
    }

    fn is_magnetic(&self) -> bool {
        self.charges.bulk.iter().any(|c| c.m != 0)
    }

    fn gas(&self) -> CoulombGas {
        CoulombGas {
            beta: self.params.beta,
            bulk: self.charges.bulk.iter().map(|c| (c.position, c.alpha)).collect(),
            boundary: self.charges.boundary.iter().map(|c| (c.position, c.eta / 2.0)).collect(),
        }
    }
}

/// One term of the neutrality expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TermValue {
    pub p: u32,
    pub q: u32,
    /// (−1)^{p+q} μ^p μ_∂^q / (p! q!).
    pub coefficient: Complex64,
    /// I(p, q), including the screening phases of a magnetic form.
    pub integral: Complex64,
    pub contribution: Complex64,
    /// Standard error of `integral` (0 for quadrature).
    pub stderr: f64,
    pub n_samples: u64,
}

/// Factors contributed by the harmonic form of the magnetic charges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MagneticFactors {
    /// ∫^reg |ω|².
    pub norm: f64,
    /// K^δ(ω).
    pub curvature: f64,
    /// Σ α_j·2πR·I(v_j) + Σ (η_k/2)·2πR·I(x_k).
    pub insertion_phase: f64,
    /// e^{−πR² norm} e^{i phase} e^{−iQR K}.
    pub factor: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelatorResult {
    pub value: Complex64,
    pub stderr: f64,
    pub per_term: Vec<TermValue>,
    pub neutrality_set: Vec<(u32, u32)>,
    pub zero_mode_volume: f64,
    pub magnetic: Option<MagneticFactors>,
    /// Annulus only: (lattice coordinate, weight).
    pub topological_sum_terms: Vec<(i64, Complex64)>,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// (−1)^{p+q} μ^p μ_∂^q / (p! q!).
pub fn term_coefficient(params: &ParamSet, p: u32, q: u32) -> Complex64 {
    let sign = if (p + q) % 2 == 0 { 1.0 } else { -1.0 };
    params.mu.powu(p) * params.mu_boundary.powu(q) * (sign / (factorial(p) * factorial(q)))
}

/// Primitive data of the magnetic form on the configured surface.
struct Magnetic {
    form: HarmonicForm,
    family: SeparatingFamily,
    base: Complex64,
}

const BASE_CANDIDATES: [(f64, f64); 8] = [
    (0.0, 0.0),
    (0.0, 0.5),
    (0.0, -0.5),
    (0.5, 0.0),
    (-0.5, 0.0),
    (0.35, 0.35),
    (-0.35, 0.35),
    (0.35, -0.35),
];

fn pick_base(
    config: &CorrelatorConfig,
    form: &HarmonicForm,
    families: &[&SeparatingFamily],
) -> Result<Complex64> {
    // every primitive value the phases need must be reachable
    let usable = |b: Complex64| -> Result<()> {
        for f in families {
            let prim = Primitive::new(form, f, b)?;
            for j in 0..config.charges.bulk.len() {
                prim.at_tangent(j)?;
            }
            for c in &config.charges.boundary {
                prim.eval(pull_in(c.position))?;
            }
        }
        Ok(())
    };
    if let Some(b) = config.base {
        usable(b)?;
        return Ok(b);
    }
    let r_in = form.surface.inner_radius;
    let mut last = None;
    for (x, y) in BASE_CANDIDATES {
        let mut b = Complex64::new(x, y);
        if form.surface.kind == SurfaceKind::Annulus && b.norm() <= r_in + 0.05 {
            b = Complex64::from_polar(0.5 * (1.0 + r_in), 2.4 + x + 2.0 * y);
        }
        match usable(b) {
            Ok(()) => return Ok(b),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::Path(format!("no admissible base point among the defaults ({})", last.expect("candidates"))))
}

fn tangents(config: &CorrelatorConfig) -> Vec<f64> {
    config.charges.bulk.iter().map(|c| c.tangent_angle).collect()
}

fn magnetic(config: &CorrelatorConfig, k: i64) -> Result<Magnetic> {
    let m: Vec<i64> = config.charges.bulk.iter().map(|c| c.m).collect();
    let form = HarmonicForm::neumann(&config.surface, &m, k)?;
    let family = match &config.family {
        Some(f) => f.clone(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            random_family(&config.surface, &tangents(config), &mut rng)?
        }
    };
    let base = pick_base(config, &form, &[&family])?;
    Ok(Magnetic { form, family, base })
}

/// Point just inside the disk, for primitives at boundary insertions.
fn pull_in(x: Complex64) -> Complex64 {
    x * (1.0 - 1e-9)
}

impl Magnetic {
    fn factors(&self, config: &CorrelatorConfig) -> Result<MagneticFactors> {
        let prim = Primitive::new(&self.form, &self.family, self.base)?;
        let r = config.params.radius;
        let mut phase = 0.0;
        for (j, c) in config.charges.bulk.iter().enumerate() {
            phase += c.alpha * TAU * r * prim.at_tangent(j)?;
        }
        for c in &config.charges.boundary {
            phase += 0.5 * c.eta * TAU * r * prim.eval(pull_in(c.position))?;
        }
        let flat = ConformalFactor::Flat;
        let norm = regularized_norm(&self.form, &flat)?;
        let curvature = curvature_term(&self.form, &self.family, self.base, &flat)?;
        let qr = config.params.q_charge * r;
        let factor = Complex64::from_polar((-PI * r * r * norm).exp(), phase - qr * curvature);
        Ok(MagneticFactors { norm, curvature, insertion_phase: phase, factor })
    }
}

/// e^{iβ·2πR·I(w)} (bulk) and e^{i(β/2)·2πR·I(y)} (boundary) for the
/// screening points; identity without magnetic charges.
struct ScreeningPhase<'a> {
    prim: Option<Primitive<'a>>,
    scale: f64,
}

impl ScreeningPhase<'_> {
    fn bulk(&self, w: Complex64) -> Result<Complex64> {
        match &self.prim {
            None => Ok(Complex64::new(1.0, 0.0)),
            Some(p) => Ok(Complex64::from_polar(1.0, self.scale * p.eval(w)?)),
        }
    }

    fn boundary(&self, y: Complex64) -> Result<Complex64> {
        match &self.prim {
            None => Ok(Complex64::new(1.0, 0.0)),
            Some(p) => Ok(Complex64::from_polar(1.0, 0.5 * self.scale * p.eval(pull_in(y))?)),
        }
    }
}

fn integrate_complex<F: Fn(f64) -> Result<Complex64>>(f: F, pts: &[f64], abs: f64, rel: f64) -> Result<Complex64> {
    let err = RefCell::new(None);
    let re = integrate_with_breaks(&guarded(&err, |t| Ok(f(t)?.re)), pts, abs, rel)?;
    take(&err)?;
    let im = integrate_with_breaks(&guarded(&err, |t| Ok(f(t)?.im)), pts, abs, rel)?;
    take(&err)?;
    Ok(Complex64::new(re, im))
}

fn angle_breaks(points: impl Iterator<Item = Complex64>) -> Vec<f64> {
    let mut pts = vec![0.0, TAU];
    pts.extend(points.filter(|z| z.norm() > 0.0).map(|z| z.arg().rem_euclid(TAU)));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    pts
}

/// Checks that every exponent of the screening integrand is integrable.
fn integrability(config: &CorrelatorConfig, p: u32, q: u32) -> Result<()> {
    let b = config.params.beta;
    if p > 0 {
        for c in &config.charges.bulk {
            if c.alpha * b <= -2.0 {
                return Err(Error::Divergence(format!("α β = {} at a bulk insertion", c.alpha * b)));
            }
        }
        for c in &config.charges.boundary {
            if c.eta * b <= -2.0 {
                return Err(Error::Divergence(format!("η β = {} at a boundary insertion", c.eta * b)));
            }
        }
    }
    if q > 0 {
        for c in &config.charges.boundary {
            if c.eta * b / 2.0 <= -1.0 {
                return Err(Error::Divergence(format!("η β/2 = {} on the boundary", c.eta * b / 2.0)));
            }
        }
    }
    Ok(())
}

/// Deterministic value of I(p, q) with its standard error.
///
/// Quadrature for p + q ≤ 1; importance-sampled screening integrals
/// (Gaussian moments still done by hand) for larger p + q.
fn moment_coulomb_gas(config: &CorrelatorConfig, p: u32, q: u32) -> Result<(Complex64, f64, u64)> {
    integrability(config, p, q)?;
    let gas = config.gas();
    let fixed = gas.fixed_factor();
    let mag = if config.is_magnetic() { Some(magnetic(config, 0)?) } else { None };
    let prim = match &mag {
        Some(m) => Some(Primitive::new(&m.form, &m.family, m.base)?),
        None => None,
    };
    let phase = ScreeningPhase { prim, scale: config.params.beta * TAU * config.params.radius };
    match (p, q) {
        (0, 0) => Ok((Complex64::new(fixed, 0.0), 0.0, 0)),
        (0, 1) => {
            let pts = angle_breaks(gas.boundary.iter().map(|(x, _)| *x));
            let f = |t: f64| -> Result<Complex64> {
                let y = Complex64::from_polar(1.0, t);
                Ok(phase.boundary(y)? * gas.screening_integrand(&[], &[y]))
            };
            Ok((integrate_complex(f, &pts, 1e-13, 1e-10)? * fixed, 0.0, 0))
        }
        (1, 0) => {
            let th = angle_breaks(gas.bulk.iter().map(|(z, _)| *z).chain(gas.boundary.iter().map(|(x, _)| *x)));
            let mut rs = vec![0.0, 1.0];
            rs.extend(gas.bulk.iter().map(|(z, _)| z.norm()).filter(|r| *r > 0.0 && *r < 1.0));
            rs.sort_by(f64::total_cmp);
            rs.dedup();
            let ring = |r: f64| -> Result<Complex64> {
                let f = |t: f64| -> Result<Complex64> {
                    let w = Complex64::from_polar(r, t);
                    Ok(phase.bulk(w)? * gas.screening_integrand(&[w], &[]))
                };
                Ok(integrate_complex(f, &th, 1e-13, 1e-11)? * r)
            };
            Ok((integrate_complex(ring, &rs, 1e-11, 1e-9)? * fixed, 0.0, 0))
        }
        _ if phase.prim.is_none() => {
            let seed = term_seed(config.seed, p, q);
            let e = screening_mc(&gas, p, q, config.n_samples, seed);
            Ok((e.value * fixed, e.stderr * fixed, e.n_samples))
        }
        _ => {
            // magnetic phases: uniform positions
            let seed = term_seed(config.seed, p, q);
            let err = std::sync::Mutex::new(None);
            let e = estimate(config.n_samples, seed, |rng, _| {
                let ws: Vec<Complex64> = (0..p)
                    .map(|_| Complex64::from_polar(rng.random::<f64>().sqrt(), TAU * rng.random::<f64>()))
                    .collect();
                let ys: Vec<Complex64> =
                    (0..q).map(|_| Complex64::from_polar(1.0, TAU * rng.random::<f64>())).collect();
                let mut ph = Complex64::new(1.0, 0.0);
                for w in &ws {
                    match phase.bulk(*w) {
                        Ok(v) => ph *= v,
                        Err(x) => {
                            err.lock().expect("poisoned").get_or_insert(x);
                        }
                    }
                }
                for y in &ys {
                    match phase.boundary(*y) {
                        Ok(v) => ph *= v,
                        Err(x) => {
                            err.lock().expect("poisoned").get_or_insert(x);
                        }
                    }
                }
                ph * gas.screening_integrand(&ws, &ys) * PI.powi(p as i32) * TAU.powi(q as i32)
            });
            if let Some(x) = err.into_inner().expect("poisoned") {
                return Err(x);
            }
            Ok((e.value * fixed, e.stderr * fixed, e.n_samples))
        }
    }
}

fn term_seed(seed: u64, p: u32, q: u32) -> u64 {
    seed ^ (((p as u64) << 40) | ((q as u64) << 20) | 0x5eed)
}

/// Monte Carlo value of I(p, q): the regularized field is sampled jointly at
/// the insertions and at uniform screening positions.
pub fn moment_mc(config: &CorrelatorConfig, p: u32, q: u32) -> Result<McEstimate> {
    let eps = config.epsilon;
    let kernel = CovarianceKernel::NEUMANN;
    let (beta, r) = (config.params.beta, config.params.radius);
    let mag = if config.is_magnetic() { Some(magnetic(config, 0)?) } else { None };
    let prim = match &mag {
        Some(m) => Some(Primitive::new(&m.form, &m.family, m.base)?),
        None => None,
    };
    let phase = ScreeningPhase { prim, scale: beta * TAU * r };
    // fixed insertions: (point, exponent, normalizer)
    let mut fixed: Vec<(Complex64, f64, f64)> = Vec::new();
    for c in &config.charges.bulk {
        fixed.push((c.position, c.alpha, eps.powf(-0.5 * c.alpha * c.alpha)));
    }
    for c in &config.charges.boundary {
        fixed.push((c.position, 0.5 * c.eta, eps.powf(-0.25 * c.eta * c.eta)));
    }
    let nb = eps.powf(-0.5 * beta * beta);
    let nd = eps.powf(-0.25 * beta * beta);
    let failure = std::sync::Mutex::new(None);
    let seed = term_seed(config.seed, p, q) ^ 0x6d63;
    let one = |rng: &mut ChaCha8Rng| -> Result<Complex64> {
        let mut pts: Vec<(Complex64, f64, f64)> = fixed.clone();
        let mut ph = Complex64::new(1.0, 0.0);
        for _ in 0..p {
            let w = Complex64::from_polar(rng.random::<f64>().sqrt(), TAU * rng.random::<f64>());
            ph *= phase.bulk(w)? * PI;
            pts.push((w, beta, nb));
        }
        for _ in 0..q {
            let y = Complex64::from_polar(1.0, TAU * rng.random::<f64>());
            ph *= phase.boundary(y)? * TAU;
            pts.push((y, 0.5 * beta, nd));
        }
        if pts.is_empty() {
            return Ok(ph);
        }
        let sites = pts.iter().map(|(z, _, _)| kernel.site(*z, eps)).collect::<Result<Vec<_>>>()?;
        let sampler = FieldSampler::from_sites(kernel, sites)?;
        let mut x = vec![0.0; pts.len()];
        sampler.draw_into(rng, &mut x);
        let mut v = ph;
        for ((_, a, n), xi) in pts.iter().zip(&x) {
            v *= Complex64::from_polar(*n, a * xi);
        }
        Ok(v)
    };
    let e = estimate(config.n_samples, seed, |rng, _| match one(rng) {
        Ok(v) => v,
        Err(x) => {
            failure.lock().expect("poisoned").get_or_insert(x);
            ZERO
        }
    });
    if let Some(x) = failure.into_inner().expect("poisoned") {
        return Err(x);
    }
    Ok(e.with_epsilon(eps))
}

/// Coulomb-gas value of the term (p, q), which must lie in the neutrality
/// set. Returns (I(p, q), stderr, samples used).
pub fn coulomb_gas_term(config: &CorrelatorConfig, p: u32, q: u32) -> Result<(Complex64, f64, u64)> {
    config.validate()?;
    let set = neutrality_solutions(&config.params, &config.charges, config.surface.euler_char);
    if !set.contains(&(p, q)) {
        return Err(Error::Neutrality(format!("({p}, {q}) is not in {set:?}")));
    }
    moment_coulomb_gas(config, p, q)
}

/// Both evaluations of one moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossCheck {
    pub p: u32,
    pub q: u32,
    pub mc: McEstimate,
    pub deterministic: Complex64,
    pub deterministic_stderr: f64,
    /// |mc − deterministic| over the combined standard error.
    pub z_score: f64,
}

/// Monte Carlo versus Coulomb-gas value of I(p, q) (neutral or not).
pub fn mc_moment_crosscheck(config: &CorrelatorConfig, p: u32, q: u32) -> Result<CrossCheck> {
    config.validate()?;
    if config.surface.kind != SurfaceKind::Disk {
        return Err(Error::UnsupportedSurface(format!("{:?}", config.surface.kind)));
    }
    let mc = moment_mc(config, p, q)?;
    let (det, det_err, _) = moment_coulomb_gas(config, p, q)?;
    let s = mc.stderr.hypot(det_err);
    let d = (mc.value - det).norm();
    let z_score = if s > 0.0 { d / s } else if d == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(CrossCheck { p, q, mc, deterministic: det, deterministic_stderr: det_err, z_score })
}

/// Σ over the neutrality set of the expansion terms on the flat disk.
pub fn disk_correlator(config: &CorrelatorConfig) -> Result<CorrelatorResult> {
    if config.surface.kind != SurfaceKind::Disk {
        return Err(Error::UnsupportedSurface(format!(
            "disk_correlator needs the disk, got {:?}",
            config.surface.kind
        )));
    }
    config.validate()?;
    let params = &config.params;
    let set = neutrality_solutions(params, &config.charges, config.surface.euler_char);
    let zero_mode_volume = TAU * params.radius;
    if set.is_empty() {
        return Ok(CorrelatorResult {
            value: ZERO,
            stderr: 0.0,
            per_term: vec![],
            neutrality_set: set,
            zero_mode_volume,
            magnetic: None,
            topological_sum_terms: vec![],
        });
    }
    let magnetic = if config.is_magnetic() { Some(magnetic(config, 0)?.factors(config)?) } else { None };
    let mfac = magnetic.map(|m| m.factor).unwrap_or(Complex64::new(1.0, 0.0));
    let mut per_term = Vec::new();
    for &(p, q) in &set {
        let coefficient = term_coefficient(params, p, q);
        let (integral, stderr, n) = if coefficient == ZERO {
            (ZERO, 0.0, 0)
        } else {
            match config.backend {
                Backend::CoulombGas => moment_coulomb_gas(config, p, q)?,
                Backend::MonteCarlo => {
                    let e = moment_mc(config, p, q)?;
                    (e.value, e.stderr, e.n_samples)
                }
            }
        };
        per_term.push(TermValue {
            p,
            q,
            coefficient,
            integral,
            contribution: coefficient * mfac * integral,
            stderr,
            n_samples: n,
        });
    }
    let value = per_term.iter().fold(ZERO, |acc, t| acc + t.contribution);
    let stderr = per_term
        .iter()
        .map(|t| (t.coefficient * mfac).norm() * t.stderr)
        .fold(0.0, f64::hypot);
    Ok(CorrelatorResult {
        value,
        stderr,
        per_term,
        neutrality_set: set,
        zero_mode_volume,
        magnetic,
        topological_sum_terms: vec![],
    })
}

/// max over the neutrality set of |log LHS − log RHS| for the constant
/// conformal factor ρ.
///
/// LHS: exp(−(pβ + qβ/2)(Q/2)ρ − Σ(α²/4 + m²R²/4)ρ − Σ(η²/8)ρ + (χ/12)ρ);
/// RHS: exp((c_L χ/12)ρ − ΣΔ_{α,m}ρ − ½ΣΔ_η ρ + (n/R)(Q/2)ρ).
pub fn weyl_constant_rho_check(config: &CorrelatorConfig, rho: f64) -> Result<f64> {
    let params = &config.params;
    let chi = config.surface.euler_char as f64;
    let set = neutrality_solutions(params, &config.charges, config.surface.euler_char);
    if set.is_empty() {
        return Err(Error::Neutrality("the configuration has no neutral term".into()));
    }
    let (b, qc, r) = (params.beta, params.q_charge, params.radius);
    let ch = &config.charges;
    let bulk_sq: f64 = ch.bulk.iter().map(|c| c.alpha * c.alpha / 4.0 + (c.m as f64 * r).powi(2) / 4.0).sum();
    let bdry_sq: f64 = ch.boundary.iter().map(|c| c.eta * c.eta / 8.0).sum();
    let deltas: f64 = ch.bulk.iter().map(|c| delta_bulk(params, c.alpha, c.m)).sum();
    let deltas_b: f64 = ch.boundary.iter().map(|c| delta_boundary(params, c.eta)).sum();
    let rhs = central_charge(qc) * chi / 12.0 * rho - deltas * rho - 0.5 * deltas_b * rho
        + ch.extra_degree as f64 / r * (qc / 2.0) * rho;
    let mut worst: f64 = 0.0;
    for (p, q) in set {
        let screening = p as f64 * b + q as f64 * b / 2.0;
        let lhs = -screening * (qc / 2.0) * rho - bulk_sq * rho - bdry_sq * rho + chi / 12.0 * rho;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// e^{iR Σ (α_j − Q) m_j θ_j}, reduced exactly when (α_j − Q)R m_j ∈ ℤ.
pub fn spin_phase(charges: &ChargeConfig, params: &ParamSet, theta: &[f64]) -> Result<Complex64> {
    if theta.len() != charges.bulk.len() {
        return Err(Error::Domain(format!(
            "{} angles for {} bulk insertions",
            theta.len(),
            charges.bulk.len()
        )));
    }
    let mut turns = 0.0;
    for (c, t) in charges.bulk.iter().zip(theta) {
        let k = (c.alpha - params.q_charge) * params.radius * c.m as f64;
        // exact integer slope keeps θ = 2π at exactly one full turn
        let k = if on_lattice(k, 1.0) { k.round() } else { k };
        let x = k * (t / TAU);
        turns += x - x.floor();
    }
    let frac = turns - turns.floor();
    if frac == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(Complex64::from_polar(1.0, TAU * frac))
}

/// Weight of the lattice coordinate k on the annulus for one family:
/// e^{−πR²∫^reg|ω_k|²} e^{iΣα_j 2πR I(v_j) + iΣ(η/2)2πR I(x)} e^{−iQR K^δ(ω_k)}.
pub fn annulus_topological_weight(config: &CorrelatorConfig, family: &SeparatingFamily, k: i64) -> Result<Complex64> {
    annulus_check(config)?;
    let m: Vec<i64> = config.charges.bulk.iter().map(|c| c.m).collect();
    let form = HarmonicForm::neumann(&config.surface, &m, k)?;
    let base = pick_base(config, &form, &[family])?;
    let norm = regularized_norm(&form, &ConformalFactor::Flat)?;
    Ok(Complex64::from_polar((-PI * config.params.radius.powi(2) * norm).exp(), annulus_phase(config, &form, family, base)?))
}

fn annulus_check(config: &CorrelatorConfig) -> Result<()> {
    if config.surface.kind != SurfaceKind::Annulus {
        return Err(Error::UnsupportedSurface(format!(
            "topological weights need the annulus, got {:?}",
            config.surface.kind
        )));
    }
    config.validate()
}

fn annulus_phase(config: &CorrelatorConfig, form: &HarmonicForm, family: &SeparatingFamily, base: Complex64) -> Result<f64> {
    let r = config.params.radius;
    let prim = Primitive::new(form, family, base)?;
    let mut phase = 0.0;
    for (j, c) in config.charges.bulk.iter().enumerate() {
        phase += c.alpha * TAU * r * prim.at_tangent(j)?;
    }
    for c in &config.charges.boundary {
        phase += 0.5 * c.eta * TAU * r * prim.eval(pull_in(c.position))?;
    }
    let k = curvature_term(form, family, base, &ConformalFactor::Flat)?;
    Ok(phase - config.params.q_charge * r * k)
}

/// Total topological sum for each family, with a common base point.
///
/// Norms are quadratic in k; they are fitted from k = −1, 0, 1 and the sum
/// keeps every k whose weight is within e^{−60} of the largest.
pub fn annulus_topological_sum(
    config: &CorrelatorConfig,
    families: &[SeparatingFamily],
) -> Result<Vec<(Complex64, Vec<(i64, Complex64)>)>> {
    annulus_check(config)?;
    let m: Vec<i64> = config.charges.bulk.iter().map(|c| c.m).collect();
    let flat = ConformalFactor::Flat;
    let norm_at = |k: i64| -> Result<f64> { regularized_norm(&HarmonicForm::neumann(&config.surface, &m, k)?, &flat) };
    let (n0, n1, nm) = (norm_at(0)?, norm_at(1)?, norm_at(-1)?);
    let qa = (n1 + nm - 2.0 * n0) / 2.0;
    let qb = (n1 - nm) / 2.0;
    if !(qa > 0.0) {
        return Err(Error::NonConvergence("lattice norm is not positive definite".into()));
    }
    let a = PI * config.params.radius.powi(2);
    let e = |k: f64| a * (qa * k * k + qb * k + n0);
    let kc = (-qb / (2.0 * qa)).round() as i64;
    let span = ((60.0 / (a * qa)).sqrt().ceil() as i64) + 1;
    let ks: Vec<i64> = (kc - span..=kc + span).collect();
    let form0 = HarmonicForm::neumann(&config.surface, &m, ks[0])?;
    let refs: Vec<&SeparatingFamily> = families.iter().collect();
    let base = pick_base(config, &form0, &refs)?;
    let mut out = Vec::new();
    for fam in families {
        let mut terms = Vec::new();
        for &k in &ks {
            let form = HarmonicForm::neumann(&config.surface, &m, k)?;
            let w = Complex64::from_polar((-e(k as f64)).exp(), annulus_phase(config, &form, fam, base)?);
            terms.push((k, w));
        }
        let total = terms.iter().fold(ZERO, |acc, (_, w)| acc + w);
        out.push((total, terms));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{validate_params, BulkCharge};

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn params(mu: f64, mu_b: f64) -> ParamSet {
        validate_params(1.0, 4.0, c(mu, 0.0), c(mu_b, 0.0), false).unwrap()
    }

    fn bulk(alpha: f64, z: Complex64, m: i64) -> BulkCharge {
        BulkCharge { position: z, alpha, m, tangent_angle: 0.0 }
    }

    #[test]
    fn single_bulk_charge_at_origin_is_a_beta_integral() {
        // p = 1 at α = 1/2 with β = 1: π B(1 + αβ/2, 1 + β²/2)
        let ch = ChargeConfig { bulk: vec![bulk(0.5, c(0.0, 0.0), 0)], ..Default::default() };
        let cfg = CorrelatorConfig::disk(params(1.0, 0.0), ch);
        let (v, _, _) = moment_coulomb_gas(&cfg, 1, 0).unwrap();
        let lg = |x: f64| crate::coulomb::log_gamma(x).unwrap();
        let beta_fn = (lg(1.25) + lg(1.5) - lg(2.75)).exp();
        assert!((v.re - PI * beta_fn).abs() < 1e-8, "{v} vs {}", PI * beta_fn);
        assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn minus_one_pair_has_the_single_boundary_term() {
        let ch = ChargeConfig {
            bulk: vec![bulk(-1.0, c(0.3, 0.0), 0), bulk(-1.0, c(-0.4, 0.0), 0)],
            ..Default::default()
        };
        let cfg = CorrelatorConfig::disk(params(0.7, 1.0), ch);
        let res = disk_correlator(&cfg).unwrap();
        assert_eq!(res.neutrality_set, vec![(0, 1)]);
        let (i01, _, _) = coulomb_gas_term(&cfg, 0, 1).unwrap();
        assert!((res.value + i01).norm() < 1e-15);
        assert!(coulomb_gas_term(&cfg, 1, 0).is_err());
    }

    #[test]
    fn spin_examples() {
        let p = params(1.0, 0.0);
        let ch = ChargeConfig { bulk: vec![bulk(-1.0, c(0.2, 0.1), 1)], ..Default::default() };
        assert_eq!(spin_phase(&ch, &p, &[PI]).unwrap(), c(1.0, 0.0));
        assert_eq!(spin_phase(&ch, &p, &[TAU]).unwrap(), c(1.0, 0.0));
        let ch0 = ChargeConfig { bulk: vec![bulk(-1.0, c(0.2, 0.1), 0)], ..Default::default() };
        assert_eq!(spin_phase(&ch0, &p, &[0.7]).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn weyl_residual_vanishes_for_the_minus_one_pair() {
        let ch = ChargeConfig {
            bulk: vec![bulk(-1.0, c(0.3, 0.0), 0), bulk(-1.0, c(-0.4, 0.0), 0)],
            ..Default::default()
        };
        let cfg = CorrelatorConfig::disk(params(1.0, 1.0), ch);
        assert!(weyl_constant_rho_check(&cfg, 0.3).unwrap() < 1e-10);
        assert_eq!(weyl_constant_rho_check(&cfg, 0.0).unwrap(), 0.0);
    }
}
