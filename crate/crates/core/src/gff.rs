//! Covariance kernels of the free field on the disk and its boundary,
//! circle-average regularization, Gaussian samplers, harmonic extension
//! and the Dirichlet-to-Neumann map.
//!
//! Disk kernels are normalized as C = 2πG, so that the Neumann kernel is
//! C(x, y) = −log|x−y| − log|1 − x ȳ|. Circle averages around points near
//! the boundary use the field doubled across the unit circle,
//! X(z) := X(1/z̄) for |z| > 1, whose covariance is
//! C(z, z') + 2 log⁺|z| + 2 log⁺|z'| with the same analytic formula.

use crate::error::{Error, Result};
use crate::mc::{estimate, substream, McEstimate};
use crate::quad::{gauss_legendre_on, integrate, integrate_with_breaks, trapezoid_periodic};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::f64::consts::{PI, TAU};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest averaging radius accepted for the reflection chart.
pub const MAX_EPS: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KernelKind {
    /// Free field on the unit circle, covariance −log|x−y|.
    CircleGff,
    /// Even field on the half circle, covariance −log|x−y| − log|x−ȳ|.
    HalfCircleGff,
    NeumannDisk,
    DirichletDisk,
}

/// A covariance kernel with its regularized evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceKernel {
    pub kind: KernelKind,
}

impl CovarianceKernel {
    pub const NEUMANN: Self = CovarianceKernel { kind: KernelKind::NeumannDisk };
    pub const DIRICHLET: Self = CovarianceKernel { kind: KernelKind::DirichletDisk };

    pub fn new(kind: KernelKind) -> Self {
        CovarianceKernel { kind }
    }

    /// Unregularized covariance C(x, y).
    pub fn eval(&self, x: Complex64, y: Complex64) -> Result<f64> {
        if (x - y).norm() == 0.0 {
            return Err(Error::Singularity);
        }
        let d = (x - y).norm().ln();
        Ok(match self.kind {
            KernelKind::CircleGff => -d,
            KernelKind::HalfCircleGff => -d - (x - y.conj()).norm().ln(),
            KernelKind::NeumannDisk => -d - (ONE - x * y.conj()).norm().ln(),
            KernelKind::DirichletDisk => -d + (ONE - x * y.conj()).norm().ln(),
        })
    }

    /// Counterterm W(x) = lim C_ε(x,x) + log ε (interior points).
    /// For boundary points of the Neumann disk the limit of
    /// C_ε(x,x) + 2 log ε is returned, which is 0.
    pub fn counterterm(&self, x: Complex64) -> f64 {
        let r2 = x.norm_sqr();
        match self.kind {
            KernelKind::NeumannDisk if r2 >= 1.0 - 1e-15 => 0.0,
            KernelKind::NeumannDisk => -(1.0 - r2).ln(),
            KernelKind::DirichletDisk => (1.0 - r2).ln(),
            KernelKind::CircleGff | KernelKind::HalfCircleGff => 0.0,
        }
    }

    /// Prepares a regularized site (center and averaging radius).
    pub fn site(&self, x: Complex64, eps: f64) -> Result<Site> {
        if !(eps >= 0.0) {
            return Err(Error::Domain(format!("negative averaging radius {eps}")));
        }
        match self.kind {
            KernelKind::CircleGff | KernelKind::HalfCircleGff => {
                if eps > 0.0 {
                    return Err(Error::Geometry(
                        "circle kernels are evaluated pointwise only".into(),
                    ));
                }
                Ok(Site { z: x, eps, log_plus: 0.0 })
            }
            KernelKind::NeumannDisk => {
                if x.norm() > 1.0 + 1e-12 {
                    return Err(Error::Geometry(format!("site {x} lies outside the disk")));
                }
                if eps > MAX_EPS {
                    return Err(Error::Geometry(format!(
                        "averaging radius {eps} exceeds the reflection chart ({MAX_EPS})"
                    )));
                }
                Ok(Site { z: x, eps, log_plus: circle_log_plus(x, eps) })
            }
            KernelKind::DirichletDisk => {
                if x.norm() + eps >= 1.0 {
                    return Err(Error::Geometry(format!(
                        "averaging circle of radius {eps} around {x} exits the disk"
                    )));
                }
                Ok(Site { z: x, eps, log_plus: 0.0 })
            }
        }
    }

    /// Covariance of the circle averages at two prepared sites.
    pub fn cov_sites(&self, a: &Site, b: &Site) -> Result<f64> {
        if a.eps == 0.0 && b.eps == 0.0 {
            return self.eval(a.z, b.z);
        }
        let t1 = double_log_average((a.z - b.z).norm(), a.eps, b.eps);
        match self.kind {
            KernelKind::NeumannDisk => {
                let t2 = reflected_average(a, b)?;
                Ok(t1 + t2 + 2.0 * a.log_plus + 2.0 * b.log_plus)
            }
            KernelKind::DirichletDisk => Ok(t1 + (ONE - a.z.conj() * b.z).norm().ln()),
            _ => Err(Error::Geometry("circle kernels are evaluated pointwise only".into())),
        }
    }

    /// Covariance of circle averages of radii `ex` at x and `ey` at y.
    pub fn regularized(&self, x: Complex64, ex: f64, y: Complex64, ey: f64) -> Result<f64> {
        self.cov_sites(&self.site(x, ex)?, &self.site(y, ey)?)
    }
}

/// A regularization site: center, radius and the cached average of log⁺|z|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Site {
    pub z: Complex64,
    pub eps: f64,
    log_plus: f64,
}

/// Green function G = C/2π.
pub fn green_kernel(kind: KernelKind, x: Complex64, y: Complex64) -> Result<f64> {
    Ok(CovarianceKernel::new(kind).eval(x, y)? / TAU)
}

/// Covariance of circle averages at x (radius `ex`) and y (radius `ey`).
pub fn regularized_covariance(kind: KernelKind, x: Complex64, ex: f64, y: Complex64, ey: f64) -> Result<f64> {
    CovarianceKernel::new(kind).regularized(x, ex, y, ey)
}

/// Average over the circle |z − x| = r of log⁺|z|.
pub fn circle_log_plus(x: Complex64, r: f64) -> f64 {
    let m = x.norm();
    if m + r <= 1.0 || r == 0.0 {
        return (m.max(1.0)).ln().max(0.0);
    }
    if m == 0.0 {
        return r.ln().max(0.0);
    }
    let c = (1.0 - m * m - r * r) / (2.0 * r * m);
    if c <= -1.0 {
        return m.max(r).ln();
    }
    let t0 = c.min(1.0).acos();
    let f = |t: f64| 0.5 * (m * m + r * r + 2.0 * r * m * t.cos()).ln().max(0.0);
    integrate(f, 0.0, t0, 1e-15, 1e-13).unwrap_or(f64::NAN) / PI
}

/// Average of −log|z − z'| over circles of radii a, b whose centers are a
/// distance d apart.
pub fn double_log_average(d: f64, a: f64, b: f64) -> f64 {
    // inner circle b in closed form: −log max(b, |z − y|)
    if a == 0.0 {
        return -(d.max(b)).ln();
    }
    if d == 0.0 {
        return -(a.max(b)).ln();
    }
    if b == 0.0 {
        return -(d.max(a)).ln();
    }
    let base = -(a.max(d)).ln();
    let c = (b * b - d * d - a * a) / (2.0 * a * d);
    if c <= -1.0 {
        return base;
    }
    if c >= 1.0 {
        return -b.ln();
    }
    // arc where |d + a e^{is}| < b, symmetric about s = π
    let s0 = c.acos();
    let len = PI - s0;
    let g = |v: f64| {
        let s = PI - len * v * v;
        let q = (d * d + a * a + 2.0 * a * d * s.cos()).max(1e-300);
        (b * b / q).ln().max(0.0) * 0.5 * 2.0 * len * v
    };
    // d = a puts the center y on the x-circle: a log singularity at v = 0
    let corr = integrate(&g, 0.0, 1.0, 1e-15, 1e-13)
        .or_else(|_| integrate(&g, 0.0, 1.0, 1e-13, 1e-10))
        .unwrap_or(f64::NAN);
    base - corr / PI
}

/// Average over both circles of −log|1 − z z̄'| (Neumann reflection term).
fn reflected_average(a: &Site, b: &Site) -> Result<f64> {
    let (x, ex, y, ey) = (a.z, a.eps, b.z, b.eps);
    if fast_reflection(x, ex, y, ey) {
        return Ok(-(ONE - x.conj() * y).norm().ln());
    }
    if fast_reflection(y, ey, x, ex) {
        return Ok(-(ONE - y.conj() * x).norm().ln());
    }
    // T(z) = average over the y-circle, closed form in z
    let t = |z: Complex64| -> f64 {
        if z.norm() == 0.0 {
            return 0.0;
        }
        let tz = ONE / z.conj();
        -z.norm().ln() - (ey.max((y - tz).norm())).ln()
    };
    if ex == 0.0 {
        return Ok(t(x));
    }
    let f = |s: f64| t(x + Complex64::from_polar(ex, s));
    let pts: Vec<f64> = (0..=8).map(|k| k as f64 * TAU / 8.0).collect();
    let v = integrate_with_breaks(&f, &pts, 1e-13, 1e-12)?;
    Ok(v / TAU)
}

/// Whether −log|1 − z̄ y| may be averaged by its center values: the
/// reflected x-disk misses the y-disk and 1/ȳ lies outside the x-disk.
fn fast_reflection(x: Complex64, ex: f64, y: Complex64, ey: f64) -> bool {
    let m = x.norm();
    let cond_a = if m > ex {
        let den = m * m - ex * ex;
        let c = x / den;
        let r = ex / den;
        (y - c).norm() >= ey + r
    } else {
        // reflected x-disk lies outside radius 1/(|x|+ex)
        y.norm() + ey <= 1.0 / (m + ex)
    };
    if !cond_a {
        return false;
    }
    let n = y.norm();
    n == 0.0 || (x - ONE / y.conj()).norm() > ex
}

/// Real trigonometric data a0 + Σ a_n cos nθ + b_n sin nθ (n ≥ 1).
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrigSeries {
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TrigSeries {
    pub fn eval(&self, theta: f64) -> f64 {
        let mut v = self.a0;
        for (k, c) in self.a.iter().enumerate() {
            v += c * ((k + 1) as f64 * theta).cos();
        }
        for (k, c) in self.b.iter().enumerate() {
            v += c * ((k + 1) as f64 * theta).sin();
        }
        v
    }

    fn order(&self) -> usize {
        self.a.len().max(self.b.len())
    }
}

/// Harmonic extension of a boundary trigonometric polynomial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicExtension {
    pub boundary: TrigSeries,
    /// Coefficients of the Dirichlet-to-Neumann image (multiplier |n|).
    pub dtn_modes: TrigSeries,
    /// ⟨φ, Dφ⟩ from the mode sum.
    pub energy_modes: f64,
    /// ∫|∇u|² by polar quadrature.
    pub energy_quadrature: f64,
}

impl HarmonicExtension {
    /// Interior value at z (|z| ≤ 1).
    pub fn eval(&self, z: Complex64) -> f64 {
        let (r, th) = z.to_polar();
        let s = &self.boundary;
        let mut v = s.a0;
        for (k, c) in s.a.iter().enumerate() {
            let n = (k + 1) as f64;
            v += c * r.powf(n) * (n * th).cos();
        }
        for (k, c) in s.b.iter().enumerate() {
            let n = (k + 1) as f64;
            v += c * r.powf(n) * (n * th).sin();
        }
        v
    }

    /// Polar gradient components (∂_r u, r⁻¹∂_θ u).
    pub fn gradient(&self, r: f64, th: f64) -> (f64, f64) {
        let s = &self.boundary;
        let (mut ur, mut ut) = (0.0, 0.0);
        for (k, c) in s.a.iter().enumerate() {
            let n = (k + 1) as f64;
            let rn1 = r.powf(n - 1.0);
            ur += c * n * rn1 * (n * th).cos();
            ut -= c * n * rn1 * (n * th).sin();
        }
        for (k, c) in s.b.iter().enumerate() {
            let n = (k + 1) as f64;
            let rn1 = r.powf(n - 1.0);
            ur += c * n * rn1 * (n * th).sin();
            ut += c * n * rn1 * (n * th).cos();
        }
        (ur, ut)
    }
}

/// Harmonic extension, its Dirichlet-to-Neumann image and the Dirichlet
/// energy computed from modes and from quadrature.
pub fn harmonic_extension_dtn(boundary: &TrigSeries) -> HarmonicExtension {
    let scale = |v: &[f64]| v.iter().enumerate().map(|(k, c)| (k + 1) as f64 * c).collect::<Vec<_>>();
    let dtn_modes = TrigSeries { a0: 0.0, a: scale(&boundary.a), b: scale(&boundary.b) };
    let energy_modes = PI
        * (boundary.a.iter().enumerate().map(|(k, c)| (k + 1) as f64 * c * c).sum::<f64>()
            + boundary.b.iter().enumerate().map(|(k, c)| (k + 1) as f64 * c * c).sum::<f64>());
    let mut ext = HarmonicExtension {
        boundary: boundary.clone(),
        dtn_modes,
        energy_modes,
        energy_quadrature: 0.0,
    };
    // |∇u|² r is a polynomial of degree 2N−1 in r and a trig polynomial of
    // degree 2N in θ; both rules below are exact for it.
    let nmax = boundary.order();
    let (rs, ws) = gauss_legendre_on(nmax + 2, 0.0, 1.0);
    let nth = 4 * nmax + 4;
    let e: Vec<f64> = rs
        .iter()
        .zip(&ws)
        .map(|(r, w)| {
            w * r * trapezoid_periodic(
                |th| {
                    let (a, b) = ext.gradient(*r, th);
                    a * a + b * b
                },
                nth,
            )
        })
        .collect();
    ext.energy_quadrature = crate::mc::pairwise_sum(&e);
    ext
}

/// Truncated series sample of the boundary free field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryGff {
    pub kind: KernelKind,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub seed: u64,
}

impl BoundaryGff {
    pub fn eval(&self, theta: f64) -> f64 {
        let mut v = 0.0;
        match self.kind {
            KernelKind::HalfCircleGff => {
                for (k, x) in self.x.iter().enumerate() {
                    let n = (k + 1) as f64;
                    v += (2.0 / n).sqrt() * x * (n * theta).cos();
                }
            }
            _ => {
                for (k, (x, y)) in self.x.iter().zip(&self.y).enumerate() {
                    let n = (k + 1) as f64;
                    v += (x * (n * theta).cos() - y * (n * theta).sin()) / n.sqrt();
                }
            }
        }
        v
    }

    /// Truncated covariance of the series at angles θ, θ'.
    pub fn truncated_covariance(kind: KernelKind, n_modes: usize, t1: f64, t2: f64) -> f64 {
        (1..=n_modes)
            .map(|n| {
                let n = n as f64;
                match kind {
                    KernelKind::HalfCircleGff => 2.0 * (n * t1).cos() * (n * t2).cos() / n,
                    _ => (n * (t1 - t2)).cos() / n,
                }
            })
            .sum()
    }
}

/// Draws the Gaussian mode vector of the circle or half-circle field.
pub fn boundary_gff_sample_rng<R: Rng + ?Sized>(kind: KernelKind, n_modes: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..n_modes).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = match kind {
        KernelKind::HalfCircleGff => Vec::new(),
        _ => (0..n_modes).map(|_| rng.sample(StandardNormal)).collect(),
    };
    (x, y)
}

/// Boundary field sample with `n_modes` modes from the given seed.
pub fn boundary_gff_sample(kind: KernelKind, n_modes: usize, seed: u64) -> Result<BoundaryGff> {
    if n_modes == 0 {
        return Err(Error::Domain("at least one mode is required".into()));
    }
    if !matches!(kind, KernelKind::CircleGff | KernelKind::HalfCircleGff) {
        return Err(Error::Domain("boundary samples need a circle kernel".into()));
    }
    let mut rng = substream(seed, 0);
    let (x, y) = boundary_gff_sample_rng(kind, n_modes, &mut rng);
    Ok(BoundaryGff { kind, x, y, seed })
}

/// Monte Carlo estimate of 𝔼[X(θ₁)X(θ₂)] for the truncated boundary series.
pub fn two_point_mc(
    kind: KernelKind,
    n_modes: usize,
    t1: f64,
    t2: f64,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if n_modes == 0 {
        return Err(Error::Domain("at least one mode is required".into()));
    }
    if !matches!(kind, KernelKind::CircleGff | KernelKind::HalfCircleGff) {
        return Err(Error::Domain("boundary samples need a circle kernel".into()));
    }
    // basis values at both angles, reused by every sample
    let table = |t: f64| -> (Vec<f64>, Vec<f64>) {
        (1..=n_modes)
            .map(|n| {
                let n = n as f64;
                match kind {
                    KernelKind::HalfCircleGff => ((2.0 / n).sqrt() * (n * t).cos(), 0.0),
                    _ => ((n * t).cos() / n.sqrt(), -(n * t).sin() / n.sqrt()),
                }
            })
            .unzip()
    };
    let (c1, s1) = table(t1);
    let (c2, s2) = table(t2);
    let half = kind == KernelKind::HalfCircleGff;
    Ok(estimate(n_samples, seed, |rng, _| {
        let (mut a, mut b) = (0.0, 0.0);
        for k in 0..n_modes {
            let x: f64 = rng.sample(StandardNormal);
            a += c1[k] * x;
            b += c2[k] * x;
            if !half {
                let y: f64 = rng.sample(StandardNormal);
                a += s1[k] * y;
                b += s2[k] * y;
            }
        }
        Complex64::new(a * b, 0.0)
    }))
}

/// Joint Gaussian sampler for circle averages at a fixed list of sites.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    pub kernel: CovarianceKernel,
    pub sites: Vec<Site>,
    pub covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
    /// Diagonal jitter that was needed for the factorization.
    pub jitter: f64,
}

/// One sample of the regularized field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSample {
    pub points: Vec<(Complex64, f64)>,
    pub values: Vec<f64>,
    pub seed: u64,
    pub index: u64,
}

impl FieldSampler {
    pub fn new(kernel: CovarianceKernel, points: &[(Complex64, f64)]) -> Result<Self> {
        let sites = points
            .iter()
            .map(|(z, e)| kernel.site(*z, *e))
            .collect::<Result<Vec<_>>>()?;
        Self::from_sites(kernel, sites)
    }

    pub fn from_sites(kernel: CovarianceKernel, sites: Vec<Site>) -> Result<Self> {
        let n = sites.len();
        let mut c = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = kernel.cov_sites(&sites[i], &sites[j])?;
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        let (factor, jitter) = factorize(&c)?;
        Ok(FieldSampler { kernel, sites, covariance: c, factor, jitter })
    }

    pub fn dim(&self) -> usize {
        self.sites.len()
    }

    /// Fills `out` with one centered Gaussian vector.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.dim();
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                let l = self.factor[(i, j)];
                if l != 0.0 {
                    s += l * g[j];
                }
            }
            out[i] = s;
        }
    }

    /// Sample number `index` of the stream determined by `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> FieldSample {
        let mut rng = substream(seed, index);
        let mut values = vec![0.0; self.dim()];
        self.draw_into(&mut rng, &mut values);
        FieldSample {
            points: self.sites.iter().map(|s| (s.z, s.eps)).collect(),
            values,
            seed,
            index,
        }
    }
}

/// Symmetric square root L with L Lᵀ = C.
///
/// Cholesky first; on failure jitter 1e−12·trace, then an eigenvalue
/// factorization that rejects eigenvalues below −1e−9·trace.
pub fn factorize(c: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(ch) = c.clone().cholesky() {
        return Ok((ch.l(), 0.0));
    }
    let n = c.nrows();
    let tr = c.trace().abs().max(f64::MIN_POSITIVE);
    let jitter = 1e-12 * tr;
    let cj = c + DMatrix::<f64>::identity(n, n) * jitter;
    if let Some(ch) = cj.clone().cholesky() {
        log::debug!("covariance needed jitter {jitter:e}");
        return Ok((ch.l(), jitter));
    }
    let eig = SymmetricEigen::new(c.clone());
    let min = eig.eigenvalues.min();
    if min < -1e-9 * tr {
        // most correlated pair
        let (mut bi, mut bj, mut best) = (0, 0, -1.0);
        for i in 0..n {
            for j in 0..i {
                let r = c[(i, j)].abs() / (c[(i, i)] * c[(j, j)]).abs().sqrt().max(1e-300);
                if r > best {
                    best = r;
                    bi = i;
                    bj = j;
                }
            }
        }
        return Err(Error::Factorization(format!(
            "eigenvalue {min:e} below -1e-9*trace; most correlated pair ({bj}, {bi})"
        )));
    }
    let d = DVector::from_iterator(n, eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()));
    Ok((&eig.eigenvectors * DMatrix::from_diagonal(&d), jitter))
}

/// Samples `n_samples` regularized field vectors at `points`.
pub fn sample_field_at(
    kernel: CovarianceKernel,
    points: &[(Complex64, f64)],
    n_samples: u64,
    seed: u64,
) -> Result<Vec<FieldSample>> {
    let s = FieldSampler::new(kernel, points)?;
    Ok((0..n_samples).map(|i| s.sample(seed, i)).collect())
}

/// Linear functional Σ w_j X_{ε_j}(y_j) defining a Girsanov shift.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LinearFunctional {
    pub sites: Vec<(Complex64, f64, f64)>,
    /// Include the curvature integrals with this background charge.
    pub curvature_charge: Option<f64>,
}

/// Shift u(x) = Cov(X_{ε_x}(x), functional).
#[derive(Debug, Clone)]
pub struct GirsanovShift {
    kernel: CovarianceKernel,
    functional: LinearFunctional,
}

impl GirsanovShift {
    pub fn eval(&self, x: Complex64, eps: f64) -> Result<f64> {
        let mut u = 0.0;
        for (y, ey, w) in &self.functional.sites {
            u += w * self.kernel.regularized(x, eps, *y, *ey)?;
        }
        if let Some(q) = self.functional.curvature_charge {
            // flat disk: K = 0 and k = 1 on the unit circle
            u -= q / TAU * self.boundary_curvature_integral(x, eps)?;
        }
        Ok(u)
    }

    /// ∫_{∂𝔻} k C(x, y) dℓ(y) for the flat disk (k = 1).
    pub fn boundary_curvature_integral(&self, x: Complex64, eps: f64) -> Result<f64> {
        let k = self.kernel;
        let arg = x.arg().rem_euclid(TAU);
        let f = |t: f64| {
            let y = Complex64::from_polar(1.0, t);
            if (y - x).norm() < 1e-14 {
                return 0.0;
            }
            k.regularized(x, eps, y, 0.0).unwrap_or(f64::NAN)
        };
        let mut pts = vec![0.0, arg, TAU];
        pts.sort_by(f64::total_cmp);
        integrate_with_breaks(&f, &pts, 1e-12, 1e-12)
    }
}

pub fn girsanov_shift(kernel: CovarianceKernel, functional: LinearFunctional) -> GirsanovShift {
    GirsanovShift { kernel, functional }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn green_examples() {
        let g = green_kernel(KernelKind::NeumannDisk, c(0.0, 0.0), c(0.5, 0.0)).unwrap();
        assert!((g - 2f64.ln() / TAU).abs() < 1e-15);
        let g = green_kernel(KernelKind::DirichletDisk, c(0.2, 0.1), c(1.0 - 1e-12, 0.0)).unwrap();
        assert!(g.abs() < 1e-10);
        let g = green_kernel(KernelKind::NeumannDisk, c(1.0, 0.0), c(-1.0, 0.0)).unwrap();
        assert!((TAU * g + 2.0 * 2f64.ln()).abs() < 1e-14);
        assert_eq!(green_kernel(KernelKind::NeumannDisk, c(0.1, 0.0), c(0.1, 0.0)), Err(Error::Singularity));
    }

    #[test]
    fn diagonal_against_angular_quadrature() {
        let x = c(0.3, 0.0);
        let eps = 0.01;
        let v = regularized_covariance(KernelKind::NeumannDisk, x, eps, x, eps).unwrap();
        assert!((v - (-(eps.ln()) - (1.0f64 - 0.09).ln())).abs() < 1e-12);
        // direct double angular quadrature of the unregularized kernel
        let (ts, ws) = gauss_legendre_on(200, 0.0, TAU);
        let mut acc = 0.0;
        for (s, ws_) in ts.iter().zip(&ws) {
            let z = x + Complex64::from_polar(eps, *s);
            // inner average by the adaptive rule with the kink at s
            let f = |t: f64| {
                let w = x + Complex64::from_polar(eps, t);
                let d = (z - w).norm().max(1e-300);
                -d.ln() - (ONE - z * w.conj()).norm().ln()
            };
            let inner = integrate_with_breaks(&f, &[0.0, *s, TAU], 1e-13, 1e-12).unwrap() / TAU;
            acc += ws_ * inner;
        }
        assert!((acc / TAU - v).abs() < 1e-6, "{} {}", acc / TAU, v);
    }

    #[test]
    fn one_sided_far_is_exact() {
        let (x, y) = (c(0.1, 0.0), c(0.1, 0.5));
        let a = regularized_covariance(KernelKind::NeumannDisk, x, 0.01, y, 0.0).unwrap();
        let b = CovarianceKernel::NEUMANN.eval(x, y).unwrap();
        assert!((a - b).abs() < 1e-14);
        let a = regularized_covariance(KernelKind::NeumannDisk, x, 0.0, y, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn boundary_diagonal_tends_to_minus_two_log_eps() {
        let x = c(0.6, 0.8);
        for eps in [0.02, 0.01, 0.005] {
            let v = regularized_covariance(KernelKind::NeumannDisk, x, eps, x, eps).unwrap();
            let lam = circle_log_plus(x, eps);
            assert!((v + 2.0 * eps.ln() - 3.0 * lam).abs() < 1e-9, "{v}");
            assert!(lam < eps / PI * 1.1 && lam > eps / PI * 0.9);
        }
    }

    #[test]
    fn double_average_limits() {
        assert!((double_log_average(0.5, 0.01, 0.02) + 0.5f64.ln()).abs() < 1e-15);
        assert!((double_log_average(0.0, 0.01, 0.02) + 0.02f64.ln()).abs() < 1e-15);
        // continuity across the overlap threshold
        let a = double_log_average(0.03 - 1e-9, 0.01, 0.02);
        assert!((a + 0.03f64.ln()).abs() < 1e-6);
        // brute force at an overlapping configuration
        let (d, a, b) = (0.012, 0.01, 0.008);
        let n = 2000;
        let mut s = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) * TAU / n as f64;
            let z = c(d, 0.0) + Complex64::from_polar(a, t);
            s += -(z.norm().max(b)).ln();
        }
        assert!((s / n as f64 - double_log_average(d, a, b)).abs() < 1e-6);
    }

    #[test]
    fn dtn_examples() {
        let e = harmonic_extension_dtn(&TrigSeries { a0: 2.0, ..Default::default() });
        assert_eq!(e.energy_modes, 0.0);
        assert!(e.energy_quadrature.abs() < 1e-14);
        assert!((e.eval(c(0.3, 0.2)) - 2.0).abs() < 1e-15);
        let e = harmonic_extension_dtn(&TrigSeries { a0: 0.0, a: vec![1.5], b: vec![0.0, 0.0, -0.7] });
        let want = PI * (1.5 * 1.5 + 3.0 * 0.49);
        assert!((e.energy_modes - want).abs() < 1e-12);
        assert!((e.energy_quadrature - want).abs() < 1e-10);
        assert!((e.dtn_modes.b[2] + 2.1).abs() < 1e-14 && e.dtn_modes.b[0] == 0.0);
    }

    #[test]
    fn circle_sample_has_zero_mean() {
        let s = boundary_gff_sample(KernelKind::CircleGff, 64, 5).unwrap();
        let m = trapezoid_periodic(|t| s.eval(t), 256) / TAU;
        assert!(m.abs() < 1e-13);
    }

    #[test]
    fn girsanov_shift_examples() {
        let k = CovarianceKernel::NEUMANN;
        let u = girsanov_shift(k, LinearFunctional::default());
        assert_eq!(u.eval(c(0.3, 0.1), 0.0).unwrap(), 0.0);
        let f = LinearFunctional { sites: vec![(c(0.0, 0.0), 0.0, -1.0)], curvature_charge: None };
        let u = girsanov_shift(k, f);
        let x = c(0.4, 0.0);
        assert!((u.eval(x, 0.0).unwrap() - 0.4f64.ln()).abs() < 1e-14);
        let f = LinearFunctional { sites: vec![], curvature_charge: Some(-1.5) };
        let u = girsanov_shift(k, f);
        assert!(u.eval(c(0.3, -0.2), 0.0).unwrap().abs() < 1e-8);
    }

    #[test]
    fn sampler_rejects_indefinite_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(factorize(&m), Err(Error::Factorization(_))));
    }
}
