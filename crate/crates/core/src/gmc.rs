//! Imaginary multiplicative chaos on the unit disk and on its boundary
//! circle.
//!
//! Monte Carlo estimators draw the circle-average field jointly at a set of
//! nodes, either fresh uniform nodes per sample (unbiased for the
//! ε-regularized integral) or a fixed polar grid. Deterministic oracles
//! reduce moments to double integrals of covariance exponentials. These are
//! evaluated in polar coordinates around the first point, with a
//! Gauss–Jacobi rule absorbing the |x−y|^{−γ} singularity.

use crate::error::{Error, Result};
use crate::geometry::{BoundaryLabel, ConformalFactor, SurfaceKind, SurfaceSpec};
use crate::gff::{double_log_average, CovarianceKernel, FieldSampler, Site, MAX_EPS};
use crate::mc::{estimate_many, McEstimate, Moments};
use crate::quad::{
    gauss_jacobi_unit, gauss_legendre_on, guarded, integrate_with_breaks, take, trapezoid_periodic,
};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use std::cell::RefCell;
use std::f64::consts::{PI, TAU};
use std::sync::{Arc, Mutex};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    Bulk,
    Boundary,
}

type WeightFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// Test function f, supported in the centered disk of radius `support`.
#[derive(Clone)]
pub struct Weight {
    support: f64,
    radial: bool,
    zero: bool,
    label: String,
    f: WeightFn,
}

impl std::fmt::Debug for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Weight({}, support {})", self.label, self.support)
    }
}

impl Weight {
    /// Indicator of {|z| ≤ radius}.
    pub fn indicator(radius: f64) -> Self {
        Weight {
            support: radius,
            radial: true,
            zero: radius <= 0.0,
            label: format!("indicator(|z|<={radius})"),
            f: Arc::new(|_| ONE),
        }
    }

    pub fn constant(c: Complex64) -> Self {
        Weight {
            support: 1.0,
            radial: true,
            zero: c == Complex64::new(0.0, 0.0),
            label: format!("constant({c})"),
            f: Arc::new(move |_| c),
        }
    }

    pub fn zero() -> Self {
        let mut w = Self::constant(Complex64::new(0.0, 0.0));
        w.label = "zero".into();
        w
    }

    /// f(z) = g(|z|) on {|z| ≤ support}.
    pub fn radial<G>(support: f64, label: &str, g: G) -> Self
    where
        G: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        Weight {
            support,
            radial: true,
            zero: false,
            label: label.into(),
            f: Arc::new(move |z| g(z.norm())),
        }
    }

    /// Arbitrary bounded f on {|z| ≤ support}, smooth inside the support.
    pub fn custom<F>(support: f64, label: &str, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        Weight { support, radial: false, zero: false, label: label.into(), f: Arc::new(f) }
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn is_radial(&self) -> bool {
        self.radial
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        if self.zero || z.norm() > self.support + 1e-12 {
            Complex64::new(0.0, 0.0)
        } else {
            (self.f)(z)
        }
    }

    /// The same weight multiplied by a real function of z.
    fn times(&self, label: &str, radial: bool, h: Arc<dyn Fn(Complex64) -> f64 + Send + Sync>) -> Self {
        let f = self.f.clone();
        Weight {
            support: self.support,
            radial: self.radial && radial,
            zero: self.zero,
            label: format!("{}*{label}", self.label),
            f: Arc::new(move |z| f(z) * h(z)),
        }
    }
}

/// A regularized chaos integral ∫ f dM_ε.
#[derive(Debug, Clone)]
pub struct GmcSpec {
    pub region: Region,
    pub beta: f64,
    pub epsilon: f64,
    pub weight: Weight,
    pub surface: SurfaceSpec,
}

impl GmcSpec {
    pub fn bulk(beta: f64, epsilon: f64, weight: Weight) -> Self {
        GmcSpec { region: Region::Bulk, beta, epsilon, weight, surface: SurfaceSpec::disk(vec![]) }
    }

    pub fn boundary(beta: f64, epsilon: f64, weight: Weight) -> Self {
        GmcSpec {
            region: Region::Boundary,
            beta,
            epsilon,
            weight,
            surface: SurfaceSpec::disk(vec![]),
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        GmcSpec { epsilon, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Domain(format!("β = {} must be finite and ≥ 0", self.beta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= MAX_EPS) {
            return Err(Error::Domain(format!(
                "ε = {} must lie in (0, {MAX_EPS}]",
                self.epsilon
            )));
        }
        if !(self.weight.support > 0.0 && self.weight.support <= 1.0) && !self.weight.zero {
            return Err(Error::Domain(format!(
                "weight support {} must lie in (0, 1]",
                self.weight.support
            )));
        }
        neumann_disk(&self.surface)
    }

    /// Coefficient of X_ε in the exponent: β (bulk) or β/2 (boundary).
    pub fn exponent(&self) -> f64 {
        match self.region {
            Region::Bulk => self.beta,
            Region::Boundary => 0.5 * self.beta,
        }
    }

    /// ε^{−β²/2} (bulk) or ε^{−β²/4} (boundary).
    pub fn normalizer(&self) -> f64 {
        let b2 = self.beta * self.beta;
        match self.region {
            Region::Bulk => self.epsilon.powf(-0.5 * b2),
            Region::Boundary => self.epsilon.powf(-0.25 * b2),
        }
    }

    /// Area of the node region (length of the circle for the boundary).
    fn measure(&self) -> f64 {
        match self.region {
            Region::Bulk => PI * self.weight.support.powi(2),
            Region::Boundary => TAU,
        }
    }
}

fn neumann_disk(surface: &SurfaceSpec) -> Result<()> {
    if surface.kind != SurfaceKind::Disk {
        return Err(Error::UnsupportedSurface(format!(
            "chaos estimators need the flat disk, got {:?}",
            surface.kind
        )));
    }
    if surface.boundary_labels.iter().any(|l| *l != BoundaryLabel::Neumann) {
        return Err(Error::UnsupportedSurface(
            "chaos estimators use the Neumann kernel".into(),
        ));
    }
    Ok(())
}

/// Node placement for the Monte Carlo estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeScheme {
    /// Fresh uniform nodes in the support for every sample.
    Random,
    /// A fixed polar grid (bulk) or equispaced nodes (boundary); the
    /// spacing must be at most ε/2.
    Grid,
}

struct Grid {
    sampler: FieldSampler,
    weights: Vec<Complex64>,
}

fn grid_nodes(spec: &GmcSpec, n: usize) -> Result<(Vec<Complex64>, Vec<f64>, f64)> {
    match spec.region {
        Region::Boundary => {
            let h = TAU / n as f64;
            let z = (0..n).map(|k| Complex64::from_polar(1.0, (k as f64 + 0.5) * h)).collect();
            Ok((z, vec![h; n], h))
        }
        Region::Bulk => {
            let r0 = spec.weight.support;
            let nr = ((n as f64 / TAU).sqrt().round() as usize).max(1);
            let nt = (n / nr).max(3);
            let (x, w) = gauss_legendre_on(nr, 0.0, r0);
            let mut z = Vec::with_capacity(nr * nt);
            let mut wt = Vec::with_capacity(nr * nt);
            let mut h: f64 = 0.0;
            for (r, wr) in x.iter().zip(&w) {
                for k in 0..nt {
                    let t = (k as f64 + 0.5) * TAU / nt as f64;
                    z.push(Complex64::from_polar(*r, t));
                    wt.push(wr * r * TAU / nt as f64);
                }
                h = h.max(TAU * r / nt as f64);
            }
            // largest radial gap, including the ends of [0, r0]
            let mut prev = 0.0;
            for r in x.iter().chain(std::iter::once(&r0)) {
                h = h.max(r - prev);
                prev = *r;
            }
            Ok((z, wt, h))
        }
    }
}

fn build_grid(spec: &GmcSpec, n: usize) -> Result<Grid> {
    let (z, w, h) = grid_nodes(spec, n)?;
    if spec.epsilon < 2.0 * h {
        return Err(Error::Resolution(format!(
            "ε = {} is below twice the node spacing {h:.3e}; use more nodes or random nodes",
            spec.epsilon
        )));
    }
    let kernel = CovarianceKernel::NEUMANN;
    let sites = z.iter().map(|p| kernel.site(*p, spec.epsilon)).collect::<Result<Vec<_>>>()?;
    let weights = z.iter().zip(&w).map(|(p, w)| spec.weight.eval(*p) * *w).collect();
    Ok(Grid { sampler: FieldSampler::from_sites(kernel, sites)?, weights })
}

/// One sample: (Re, Im) of the first-moment estimator and an unbiased
/// estimator of 𝔼|M_ε|².
fn random_sample<R: Rng + ?Sized>(spec: &GmcSpec, k: usize, rng: &mut R) -> Result<(Complex64, f64)> {
    let kernel = CovarianceKernel::NEUMANN;
    let mut sites: Vec<Site> = Vec::with_capacity(k);
    let mut fw = Vec::with_capacity(k);
    let r0 = spec.weight.support;
    for _ in 0..k {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        let z = match spec.region {
            Region::Bulk => Complex64::from_polar(r0 * u.sqrt(), TAU * v),
            Region::Boundary => Complex64::from_polar(1.0, TAU * u),
        };
        fw.push(spec.weight.eval(z));
        sites.push(kernel.site(z, spec.epsilon)?);
    }
    let sampler = FieldSampler::from_sites(kernel, sites)?;
    let mut x = vec![0.0; k];
    sampler.draw_into(rng, &mut x);
    let (a, norm) = (spec.exponent(), spec.normalizer());
    let mut sum = Complex64::new(0.0, 0.0);
    let mut diag = 0.0;
    for i in 0..k {
        let g = fw[i] * Complex64::from_polar(norm, a * x[i]);
        sum += g;
        diag += g.norm_sqr();
    }
    let m = spec.measure();
    let first = sum * (m / k as f64);
    let second = if k >= 2 {
        (sum.norm_sqr() - diag) * m * m / (k * (k - 1)) as f64
    } else {
        f64::NAN
    };
    Ok((first, second))
}

fn to_estimate(re: &Moments, im: &Moments, n: u64, seed: u64, eps: f64) -> McEstimate {
    McEstimate {
        value: Complex64::new(re.mean, im.mean),
        stderr: re.stderr().hypot(im.stderr()),
        n_samples: n,
        seed,
        epsilon: Some(eps),
    }
}

/// Monte Carlo estimates of 𝔼 M_ε(f) and 𝔼|M_ε(f)|² from the same draws.
///
/// With random nodes the second estimate is the U-statistic over distinct
/// node pairs; on a grid it is the mean of |M|² for the grid sum.
pub fn gmc_moments_mc(
    spec: &GmcSpec,
    scheme: NodeScheme,
    quad_nodes: usize,
    n_samples: u64,
    seed: u64,
) -> Result<(McEstimate, McEstimate)> {
    spec.validate()?;
    if quad_nodes < 2 {
        return Err(Error::Domain("at least two nodes per sample are needed".into()));
    }
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let record = |e: Error| {
        failure.lock().expect("poisoned").get_or_insert(e);
    };
    let moments = match scheme {
        NodeScheme::Random => estimate_many(n_samples, seed, 3, |rng, _i, out| {
            match random_sample(spec, quad_nodes, rng) {
                Ok((f, s)) => {
                    out[0] = f.re;
                    out[1] = f.im;
                    out[2] = s;
                }
                Err(e) => {
                    record(e);
                    out.fill(0.0);
                }
            }
        }),
        NodeScheme::Grid => {
            let grid = build_grid(spec, quad_nodes)?;
            let (a, norm) = (spec.exponent(), spec.normalizer());
            let dim = grid.sampler.dim();
            estimate_many(n_samples, seed, 3, |rng, _i, out| {
                let mut x = vec![0.0; dim];
                grid.sampler.draw_into(rng, &mut x);
                let mut m = Complex64::new(0.0, 0.0);
                for (w, xi) in grid.weights.iter().zip(&x) {
                    m += w * Complex64::from_polar(norm, a * xi);
                }
                out[0] = m.re;
                out[1] = m.im;
                out[2] = m.norm_sqr();
            })
        }
    };
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    let eps = spec.epsilon;
    let first = to_estimate(&moments[0], &moments[1], n_samples, seed, eps);
    let second = to_estimate(&moments[2], &Moments::default(), n_samples, seed, eps);
    Ok((first, second))
}

/// Monte Carlo estimate of ∫ f ε^{−β²/2} e^{iβX_ε} dv (bulk) or
/// ∫ f ε^{−β²/4} e^{i(β/2)X_ε} dℓ (boundary) with random nodes.
pub fn gmc_estimate(spec: &GmcSpec, quad_nodes: usize, n_samples: u64, seed: u64) -> Result<McEstimate> {
    gmc_estimate_with(spec, NodeScheme::Random, quad_nodes, n_samples, seed)
}

pub fn gmc_estimate_with(
    spec: &GmcSpec,
    scheme: NodeScheme,
    quad_nodes: usize,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    Ok(gmc_moments_mc(spec, scheme, quad_nodes, n_samples, seed)?.0)
}

/// Fractions of samples with |M_ε| above each level (tail monitor).
pub fn modulus_tail(
    spec: &GmcSpec,
    quad_nodes: usize,
    n_samples: u64,
    seed: u64,
    levels: &[f64],
) -> Result<Vec<f64>> {
    spec.validate()?;
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let m = estimate_many(n_samples, seed, levels.len(), |rng, _i, out| {
        match random_sample(spec, quad_nodes.max(2), rng) {
            Ok((f, _)) => {
                for (o, l) in out.iter_mut().zip(levels) {
                    *o = if f.norm() > *l { 1.0 } else { 0.0 };
                }
            }
            Err(e) => {
                failure.lock().expect("poisoned").get_or_insert(e);
                out.fill(0.0);
            }
        }
    });
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(m.iter().map(|x| x.mean).collect())
}

fn integrate_c<F: Fn(f64) -> Result<Complex64>>(f: F, pts: &[f64], abs: f64, rel: f64) -> Result<Complex64> {
    let err = RefCell::new(None);
    let re = integrate_with_breaks(&guarded(&err, |t| Ok(f(t)?.re)), pts, abs, rel)?;
    take(&err)?;
    let im = integrate_with_breaks(&guarded(&err, |t| Ok(f(t)?.im)), pts, abs, rel)?;
    take(&err)?;
    Ok(Complex64::new(re, im))
}

/// Periodic trapezoid in θ, doubled until successive values agree.
fn periodic_converged<F: Fn(f64) -> Result<f64>>(f: F, rel: f64) -> Result<f64> {
    let err = RefCell::new(None);
    let g = guarded(&err, f);
    let mut n = 16;
    let mut prev = trapezoid_periodic(&g, n);
    take(&err)?;
    while n < 1024 {
        n *= 2;
        let cur = trapezoid_periodic(&g, n);
        take(&err)?;
        if (cur - prev).abs() <= rel * cur.abs().max(1e-300) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::NonConvergence(format!("angular trapezoid rule did not settle ({prev:e})")))
}

/// Characteristic-function value of 𝔼 M_ε(f): ∫ f ε^{−β²/2} e^{−β²C_ε(x,x)/2} dv
/// (bulk) or ∫ f ε^{−β²/4} e^{−β²C_ε(x,x)/8} dℓ (boundary).
pub fn gmc_first_moment(spec: &GmcSpec) -> Result<Complex64> {
    spec.validate()?;
    if spec.weight.zero {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let kernel = CovarianceKernel::NEUMANN;
    let (a, norm, eps) = (spec.exponent(), spec.normalizer(), spec.epsilon);
    let density = |z: Complex64| -> Result<f64> {
        let c = kernel.regularized(z, eps, z, eps)?;
        Ok(norm * (-0.5 * a * a * c).exp())
    };
    match spec.region {
        Region::Boundary => {
            // the variance is rotation invariant on the circle
            let d = density(ONE)?;
            let w = &spec.weight;
            let re = trapezoid_periodic(|t| w.eval(Complex64::from_polar(1.0, t)).re, 512);
            let im = trapezoid_periodic(|t| w.eval(Complex64::from_polar(1.0, t)).im, 512);
            Ok(Complex64::new(re, im) * d)
        }
        Region::Bulk => {
            let r0 = spec.weight.support;
            let mut pts = vec![0.0, r0];
            if 1.0 - eps < r0 {
                pts.insert(1, 1.0 - eps);
            }
            if spec.weight.radial {
                let f = |r: f64| -> Result<Complex64> {
                    let z = Complex64::new(r, 0.0);
                    Ok(spec.weight.eval(z) * density(z)? * (TAU * r))
                };
                integrate_c(f, &pts, 1e-13, 1e-11)
            } else {
                let ring = |r: f64| -> Result<Complex64> {
                    let d = density(Complex64::new(r, 0.0))?;
                    let w = &spec.weight;
                    let re = trapezoid_periodic(|t| w.eval(Complex64::from_polar(r, t)).re, 256);
                    let im = trapezoid_periodic(|t| w.eval(Complex64::from_polar(r, t)).im, 256);
                    Ok(Complex64::new(re, im) * d * r)
                };
                integrate_c(ring, &pts, 1e-13, 1e-11)
            }
        }
    }
}

/// Double integral ∬_{|x|,|y| ≤ R0, |x−y| < cap} |x−y|^{−γ} S(x, y, |x−y|).
///
/// The inner integral runs over polar coordinates (φ, ρ) around x. The first
/// ρ-piece uses Gauss–Jacobi with weight ρ^{1−γ}; later pieces are
/// Gauss–Legendre. S must be smooth between the ρ-breaks.
struct PairIntegral<'a> {
    support: f64,
    gamma: f64,
    cap: f64,
    rho_breaks: Vec<f64>,
    radial: bool,
    s: &'a dyn Fn(Complex64, Complex64, f64) -> f64,
}

const RHO_NODES: usize = 24;

impl PairIntegral<'_> {
    fn rho_max(&self, x: Complex64, phi: f64) -> f64 {
        let b = x.re * phi.cos() + x.im * phi.sin();
        let disc = b * b + self.support * self.support - x.norm_sqr();
        (-b + disc.max(0.0).sqrt()).max(0.0)
    }

    /// ρ-breaks at x: the fixed breaks plus a geometric ladder towards the
    /// reflected point when x is near the unit circle.
    fn breaks_at(&self, x: Complex64) -> Vec<f64> {
        let mut b = self.rho_breaks.clone();
        let d0 = 1.0 - x.norm();
        if d0 < 0.1 {
            let mut t = 0.25 * d0.max(1e-12);
            while t < 2.0 {
                b.push(t);
                t *= 2.0;
            }
        }
        b.retain(|t| *t > 0.0 && *t < self.cap);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    fn ray(&self, x: Complex64, phi: f64, breaks: &[f64], gj: &(Vec<f64>, Vec<f64>), gl: &(Vec<f64>, Vec<f64>)) -> f64 {
        let top = self.cap.min(self.rho_max(x, phi));
        if top <= 0.0 {
            return 0.0;
        }
        let dir = Complex64::from_polar(1.0, phi);
        let mut ends: Vec<f64> = breaks.iter().copied().filter(|t| *t < top).collect();
        ends.push(top);
        let p = 1.0 - self.gamma;
        let b1 = ends[0];
        let mut total = 0.0;
        for (t, w) in gj.0.iter().zip(&gj.1) {
            let r = b1 * t;
            total += w * (self.s)(x, x + dir * r, r);
        }
        total *= b1.powf(p + 1.0);
        for win in ends.windows(2) {
            let (a, b) = (win[0], win[1]);
            for (t, w) in gl.0.iter().zip(&gl.1) {
                let r = a + (b - a) * t;
                total += w * (b - a) * r.powf(p) * (self.s)(x, x + dir * r, r);
            }
        }
        total
    }

    /// ∫ dφ ∫ ρ^{1−γ} S dρ at a fixed x.
    fn inner(&self, x: Complex64) -> Result<f64> {
        let gj = gauss_jacobi_unit(RHO_NODES, 1.0 - self.gamma, 0.0)?;
        let gl = gauss_legendre_on(RHO_NODES, 0.0, 1.0);
        let breaks = self.breaks_at(x);
        let (r, th) = (x.norm(), x.arg());
        let mut phis = vec![th, th + PI];
        // directions where ρmax crosses a ρ-break
        let r0 = self.support;
        for t in breaks.iter().chain(std::iter::once(&self.cap)) {
            if r > 0.0 {
                let c = (r0 * r0 - r * r - t * t) / (2.0 * r * t);
                if c.abs() < 1.0 {
                    phis.push(th + c.acos());
                    phis.push(th - c.acos());
                }
            }
        }
        let mut pts: Vec<f64> = phis.iter().map(|p| p.rem_euclid(TAU)).collect();
        pts.push(0.0);
        pts.push(TAU);
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        integrate_with_breaks(&|phi: f64| self.ray(x, phi, &breaks, &gj, &gl), &pts, 1e-15, 1e-10)
    }

    fn eval(&self) -> Result<f64> {
        let err = RefCell::new(None);
        let r0 = self.support;
        let mut pts = vec![0.0, r0];
        let mut cand = vec![r0 - self.cap, r0 - 0.5 * self.cap, 1.0 - 0.01, 1.0 - 1e-4];
        cand.extend(self.rho_breaks.iter().map(|t| r0 - t));
        for t in cand {
            if t > 0.0 && t < r0 {
                pts.push(t);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let v = if self.radial {
            let f = guarded(&err, |r: f64| Ok(TAU * r * self.inner(Complex64::new(r, 0.0))?));
            integrate_with_breaks(&f, &pts, 1e-14, 1e-9)?
        } else {
            let f = guarded(&err, |r: f64| {
                Ok(r * periodic_converged(|t| self.inner(Complex64::from_polar(r, t)), 1e-9)?)
            });
            integrate_with_breaks(&f, &pts, 1e-14, 1e-8)?
        };
        take(&err)?;
        Ok(v)
    }
}

fn is_radial(rho: &ConformalFactor) -> bool {
    match rho {
        ConformalFactor::Flat | ConformalFactor::Constant(_) | ConformalFactor::Hemisphere => true,
        ConformalFactor::Bump { center, .. } => center.norm() == 0.0,
        ConformalFactor::Quadratic(c) => c[1] == 0.0 && c[2] == 0.0,
        ConformalFactor::Custom(_) => false,
    }
}

/// Smooth part of the bulk second-moment kernel:
/// ((1−|x|²)(1−|y|²))^{β²/2} |1 − x ȳ|^{−β²}.
fn bulk_envelope(b2: f64, x: Complex64, y: Complex64) -> f64 {
    let d = ((1.0 - x.norm_sqr()) * (1.0 - y.norm_sqr())).max(0.0);
    d.powf(0.5 * b2) * (ONE - x * y.conj()).norm().powf(-b2)
}

/// Limit second moment 𝔼|M(f)|² as ε → 0.
///
/// Bulk: ∬ f(x) f̄(y) |x−y|^{−β²} |1−xȳ|^{−β²} (1−|x|²)^{β²/2}(1−|y|²)^{β²/2} dv dv.
/// Boundary: ∬ f(x) f̄(y) |x−y|^{−β²/2} dℓ dℓ.
pub fn gmc_second_moment(spec: &GmcSpec) -> Result<f64> {
    spec.validate()?;
    second_moment_weighted(spec, &spec.weight)
}

fn second_moment_weighted(spec: &GmcSpec, w: &Weight) -> Result<f64> {
    if w.zero {
        return Ok(0.0);
    }
    let b2 = spec.beta * spec.beta;
    match spec.region {
        Region::Bulk => {
            if b2 >= 2.0 {
                return Err(Error::Divergence(format!("bulk second moment needs β² < 2 (β² = {b2})")));
            }
            let s = |x: Complex64, y: Complex64, _r: f64| {
                (w.eval(x) * w.eval(y).conj()).re * bulk_envelope(b2, x, y)
            };
            PairIntegral {
                support: w.support,
                gamma: b2,
                cap: 2.0 * w.support,
                rho_breaks: vec![],
                radial: w.radial,
                s: &s,
            }
            .eval()
        }
        Region::Boundary => {
            let f = |z: Complex64| w.eval(z);
            boundary_pair(&f, 0.5 * b2, w.radial)
        }
    }
}

/// ∬_{circle²} Re(f(x) f̄(y)) |x−y|^{−γ} dℓ dℓ.
fn boundary_pair(f: &dyn Fn(Complex64) -> Complex64, gamma: f64, radial: bool) -> Result<f64> {
    if gamma >= 1.0 {
        return Err(Error::Divergence(format!(
            "boundary kernel |x−y|^(−{gamma}) is not integrable on the circle"
        )));
    }
    // y = x e^{2πiu}; |x−y| = 2 sin(πu) = [u(1−u)]·smooth
    let (u, w) = gauss_jacobi_unit(64, -gamma, -gamma)?;
    let smooth: Vec<f64> = u
        .iter()
        .map(|u| {
            let s = 2.0 * (PI * u).sin() / (u * (1.0 - u));
            s.powf(-gamma) * TAU
        })
        .collect();
    let at = |t: f64| -> Result<f64> {
        let x = Complex64::from_polar(1.0, t);
        let fx = f(x);
        let mut acc = 0.0;
        for k in 0..u.len() {
            let y = x * Complex64::from_polar(1.0, TAU * u[k]);
            acc += w[k] * smooth[k] * (fx * f(y).conj()).re;
        }
        Ok(acc)
    };
    if radial {
        Ok(TAU * at(0.0)?)
    } else {
        periodic_converged(at, 1e-12)
    }
}

/// Closed form ∬_{circle²} |x−y|^{−β²/2} dℓ dℓ = (2π)² Γ(1−β²/2)/Γ(1−β²/4)².
pub fn boundary_second_moment_closed_form(beta: f64) -> Result<f64> {
    use crate::coulomb::gamma;
    let b2 = beta * beta;
    Ok(TAU * TAU * gamma(1.0 - 0.5 * b2)? / gamma(1.0 - 0.25 * b2)?.powi(2))
}

/// Piecewise Chebyshev interpolant of the circle-pair log average
/// D(d; a, b) on [|a−b|, a+b], split where one center crosses the other
/// circle. D is constant below |a−b| and equals −log d above a+b.
struct DTable {
    a: f64,
    b: f64,
    pieces: Vec<(f64, f64, Vec<f64>)>,
}

const D_NODES: usize = 64;

fn lobatto(j: usize) -> f64 {
    (PI * j as f64 / D_NODES as f64).cos()
}

impl DTable {
    fn new(a: f64, b: f64) -> Self {
        let mut cuts = vec![(a - b).abs(), a, b, a + b];
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let pieces = cuts
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let (lo, hi) = (w[0], w[1]);
                let v = (0..=D_NODES)
                    .map(|j| double_log_average(lo + 0.5 * (hi - lo) * (1.0 - lobatto(j)), a, b))
                    .collect();
                (lo, hi, v)
            })
            .collect();
        DTable { a, b, pieces }
    }

    fn eval(&self, d: f64) -> f64 {
        if d >= self.a + self.b {
            return -d.ln();
        }
        if d <= (self.a - self.b).abs() {
            return -self.a.max(self.b).ln();
        }
        let (lo, hi, values) = self
            .pieces
            .iter()
            .find(|p| d <= p.1)
            .unwrap_or_else(|| self.pieces.last().expect("non-empty"));
        // barycentric form on Chebyshev–Lobatto nodes
        let t = 1.0 - 2.0 * (d - lo) / (hi - lo);
        let (mut num, mut den) = (0.0, 0.0);
        for (j, v) in values.iter().enumerate() {
            let x = lobatto(j);
            if t == x {
                return *v;
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == D_NODES {
                w *= 0.5;
            }
            let c = w / (t - x);
            num += c * v;
            den += c;
        }
        num / den
    }
}

fn fixed_eps_support_check(spec: &GmcSpec, eps: f64) -> Result<()> {
    if spec.region != Region::Bulk {
        return Err(Error::UnsupportedSurface(
            "fixed-ε moment oracles are implemented for the bulk only".into(),
        ));
    }
    if spec.weight.support > 1.0 - 4.0 * eps {
        return Err(Error::Domain(format!(
            "fixed-ε oracle needs the support radius {} ≤ 1 − 4ε",
            spec.weight.support
        )));
    }
    Ok(())
}

/// Exact 𝔼|M_ε(f)|² at the spec's ε (bulk, support ≤ 1 − 4ε).
///
/// For |x−y| ≥ 2ε the ε-integrand coincides with the limit kernel, so the
/// value is the limit plus a correction supported on |x−y| < 2ε.
pub fn gmc_second_moment_fixed_eps(spec: &GmcSpec) -> Result<f64> {
    spec.validate()?;
    let eps = spec.epsilon;
    fixed_eps_support_check(spec, eps)?;
    let limit = gmc_second_moment(spec)?;
    if spec.weight.zero {
        return Ok(0.0);
    }
    let w = &spec.weight;
    let b2 = spec.beta * spec.beta;
    let table = DTable::new(eps, eps);
    let sa = |x: Complex64, y: Complex64, r: f64| {
        let e = (b2 * table.eval(r)).exp();
        (w.eval(x) * w.eval(y).conj()).re * bulk_envelope(b2, x, y) * e
    };
    let sb = |x: Complex64, y: Complex64, _r: f64| {
        (w.eval(x) * w.eval(y).conj()).re * bulk_envelope(b2, x, y)
    };
    let a = PairIntegral {
        support: w.support,
        gamma: 0.0,
        cap: 2.0 * eps,
        rho_breaks: vec![eps],
        radial: w.radial,
        s: &sa,
    }
    .eval()?;
    let b = PairIntegral {
        support: w.support,
        gamma: b2,
        cap: 2.0 * eps,
        rho_breaks: vec![eps],
        radial: w.radial,
        s: &sb,
    }
    .eval()?;
    Ok(limit + a - b)
}

/// 𝔼|M_{ε_a}(f) − M_{ε_b}(f)|² by quadrature (bulk).
pub fn l2_gap(spec: &GmcSpec, eps_a: f64, eps_b: f64) -> Result<f64> {
    spec.with_epsilon(eps_a).validate()?;
    spec.with_epsilon(eps_b).validate()?;
    let hi = eps_a.max(eps_b);
    fixed_eps_support_check(spec, hi)?;
    if eps_a == eps_b || spec.weight.zero {
        return Ok(0.0);
    }
    let w = &spec.weight;
    let b2 = spec.beta * spec.beta;
    let (taa, tbb, tab) = (DTable::new(eps_a, eps_a), DTable::new(eps_b, eps_b), DTable::new(eps_a, eps_b));
    let s = |x: Complex64, y: Complex64, r: f64| {
        let (daa, dbb, dab) = (taa.eval(r), tbb.eval(r), tab.eval(r));
        let k = (b2 * daa).exp() + (b2 * dbb).exp() - 2.0 * (b2 * dab).exp();
        (w.eval(x) * w.eval(y).conj()).re * bulk_envelope(b2, x, y) * k
    };
    let lo = eps_a.min(eps_b);
    PairIntegral {
        support: w.support,
        gamma: 0.0,
        cap: 2.0 * hi,
        rho_breaks: vec![lo, hi, 2.0 * lo, hi - lo, hi + lo],
        radial: w.radial,
        s: &s,
    }
    .eval()
}

/// Limit second moment in the metric e^ρ|dz|²: the flat computation with
/// f(x) f̄(y) multiplied by e^{(2−β²/2)(ρ(x)+ρ(y))/2}.
pub fn gmc_second_moment_metric(spec: &GmcSpec, rho: &ConformalFactor) -> Result<f64> {
    spec.validate()?;
    let c = match spec.region {
        Region::Bulk => 1.0 - 0.25 * spec.beta * spec.beta,
        // boundary: e^{ρ/2} dℓ and the ε-shift of the boundary variance
        Region::Boundary => 0.5 - 0.125 * spec.beta * spec.beta,
    };
    let r = rho.clone();
    let h: Arc<dyn Fn(Complex64) -> f64 + Send + Sync> = Arc::new(move |z| (c * r.value(z)).exp());
    let w = spec.weight.times("metric", is_radial(rho), h);
    second_moment_weighted(spec, &w)
}

/// The quantities U1, U2, V bounding the exponential moments of M(f).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentBounds {
    pub u1: f64,
    pub u2: f64,
    pub v: f64,
}

/// U1 = ∬|f(x) f(y)|(|x−y|^{−β²} + |1−xȳ|^{−β²}) dv dv, with |1 − x ȳ| as
/// the distance to the reflected point; U2 = ∬_{∂²}|f f||x−y|^{−β²/2} dℓ dℓ;
/// V = ∫|f| (1−|x|)^{−β²/2} dv (the boundary term vanishes for Neumann
/// boundaries).
pub fn moment_bound_quantities(f: &Weight, beta: f64, surface: &SurfaceSpec) -> Result<MomentBounds> {
    if f.zero {
        return Ok(MomentBounds { u1: 0.0, u2: 0.0, v: 0.0 });
    }
    if surface.kind != SurfaceKind::Disk {
        return Err(Error::UnsupportedSurface(format!("{:?}", surface.kind)));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain(format!("β = {beta} must be positive")));
    }
    let b2 = beta * beta;
    if b2 >= 2.0 {
        return Err(Error::Divergence(format!(
            "|x−y|^(−{b2}) is not integrable in two dimensions"
        )));
    }
    let touches = f.support >= 1.0 - 1e-12;
    let dirichlet = surface.boundary_labels.iter().any(|l| *l != BoundaryLabel::Neumann);
    let abs = |z: Complex64| f.eval(z).norm();
    let s1 = |x: Complex64, y: Complex64, _r: f64| abs(x) * abs(y);
    let u1a = PairIntegral {
        support: f.support,
        gamma: b2,
        cap: 2.0 * f.support,
        rho_breaks: vec![],
        radial: f.radial,
        s: &s1,
    }
    .eval()?;
    let s2 = |x: Complex64, y: Complex64, _r: f64| abs(x) * abs(y) * (ONE - x * y.conj()).norm().powf(-b2);
    let u1b = PairIntegral {
        support: f.support,
        gamma: 0.0,
        cap: 2.0 * f.support,
        rho_breaks: vec![],
        radial: f.radial,
        s: &s2,
    }
    .eval()?;
    let u2 = if touches {
        boundary_pair(&|z| Complex64::new(abs(z), 0.0), 0.5 * b2, f.radial)?
    } else {
        0.0
    };
    // r = 1 − w^{1/(1−a)} absorbs (1−r)^{−a}
    let a = 0.5 * b2;
    let w0 = (1.0 - f.support).max(0.0).powf(1.0 - a);
    let ring = |r: f64| -> Result<f64> {
        if f.radial {
            Ok(TAU * abs(Complex64::new(r, 0.0)))
        } else {
            periodic_converged(|t| Ok(abs(Complex64::from_polar(r, t))), 1e-10)
        }
    };
    let err = RefCell::new(None);
    let g = guarded(&err, |w: f64| {
        let r = 1.0 - w.powf(1.0 / (1.0 - a));
        Ok(r * ring(r)? / (1.0 - a))
    });
    let v = integrate_with_breaks(&g, &[w0, 1.0], 1e-14, 1e-10)?;
    take(&err)?;
    if dirichlet && touches && a >= 1.0 {
        return Err(Error::Divergence(format!("d(x,∂)^(−{a}) near a Dirichlet boundary")));
    }
    Ok(MomentBounds { u1: u1a + u1b, u2, v })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_moment_of_the_half_disk_indicator() {
        let spec = GmcSpec::bulk(1.0, 0.01, Weight::indicator(0.5));
        let m = gmc_first_moment(&spec).unwrap();
        // ∫_{|z|≤½} (1−|z|²)^{1/2} dv
        let exact = TAU / 3.0 * (1.0 - 0.75f64.powf(1.5));
        assert!((m.re - exact).abs() < 1e-9, "{m} vs {exact}");
        assert!(m.im.abs() < 1e-15);
    }

    #[test]
    fn boundary_second_moment_matches_gamma_ratio() {
        for beta in [0.5, 1.0, 1.2] {
            let spec = GmcSpec::boundary(beta, 0.01, Weight::constant(ONE));
            let v = gmc_second_moment(&spec).unwrap();
            let c = boundary_second_moment_closed_form(beta).unwrap();
            assert!((v / c - 1.0).abs() < 1e-8, "β={beta}: {v} vs {c}");
        }
    }

    #[test]
    fn beta_zero_second_moment_is_square_of_area() {
        let spec = GmcSpec::bulk(0.0, 0.01, Weight::indicator(0.5));
        let v = gmc_second_moment(&spec).unwrap();
        let a = PI * 0.25;
        assert!((v - a * a).abs() < 1e-9 * a * a, "{v}");
    }

    #[test]
    fn grid_scheme_rejects_under_resolved_eps() {
        let spec = GmcSpec::bulk(1.0, 0.01, Weight::indicator(0.5));
        let e = gmc_estimate_with(&spec, NodeScheme::Grid, 64, 10, 1).unwrap_err();
        assert!(matches!(e, Error::Resolution(_)));
    }

    #[test]
    fn gap_vanishes_on_the_diagonal() {
        let spec = GmcSpec::bulk(1.0, 0.01, Weight::indicator(0.5));
        assert_eq!(l2_gap(&spec, 0.01, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn zero_weight_bounds() {
        let b = moment_bound_quantities(&Weight::zero(), 1.0, &SurfaceSpec::disk(vec![])).unwrap();
        assert_eq!((b.u1, b.u2, b.v), (0.0, 0.0, 0.0));
    }
}

#[cfg(test)]
mod table_tests {
    use super::*;

    #[test]
    fn chebyshev_table_matches_direct_average() {
        for (a, b) in [(0.005, 0.005), (0.01, 0.005), (0.02, 0.01)] {
            let t = DTable::new(a, b);
            let mut worst: f64 = 0.0;
            for k in 0..=997 {
                let d = 1.2 * (a + b) * k as f64 / 997.0;
                worst = worst.max((t.eval(d) - double_log_average(d, a, b)).abs());
            }
            assert!(worst < 1e-6, "({a}, {b}): {worst:e}");
        }
    }
}
