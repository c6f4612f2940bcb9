//! Surfaces of the lab (circle, half circle, disk, half disk, annulus),
//! conformal factors e^ρ|dz|² and their curvature data.
//!
//! Sign conventions: `K` is the scalar curvature, twice the Gaussian
//! curvature, so that ½∫K dv + ∫k dℓ + Σ(turning angles) = 2πχ. The normal
//! ν points out of the surface; the unit circle bounding the disk has k = 1.

use crate::error::{Error, Result};
use crate::quad::gauss_legendre_on;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurfaceKind {
    Circle,
    HalfCircle,
    Disk,
    HalfDisk,
    Annulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryLabel {
    Neumann,
    Dirichlet,
    Mixed,
}

/// A concrete surface with interior punctures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    /// Inner radius of the annulus (0 otherwise).
    pub inner_radius: f64,
    pub punctures: Vec<Complex64>,
    pub boundary_labels: Vec<BoundaryLabel>,
    pub euler_char: i64,
    pub corner_count: u32,
}

impl SurfaceSpec {
    pub fn disk(punctures: Vec<Complex64>) -> Self {
        SurfaceSpec {
            kind: SurfaceKind::Disk,
            inner_radius: 0.0,
            punctures,
            boundary_labels: vec![BoundaryLabel::Neumann],
            euler_char: 1,
            corner_count: 0,
        }
    }

    pub fn annulus(inner_radius: f64, punctures: Vec<Complex64>) -> Self {
        SurfaceSpec {
            kind: SurfaceKind::Annulus,
            inner_radius,
            punctures,
            boundary_labels: vec![BoundaryLabel::Neumann, BoundaryLabel::Neumann],
            euler_char: 0,
            corner_count: 0,
        }
    }

    /// Upper half disk; its two corners sit at ±1.
    pub fn half_disk() -> Self {
        SurfaceSpec {
            kind: SurfaceKind::HalfDisk,
            inner_radius: 0.0,
            punctures: Vec::new(),
            boundary_labels: vec![BoundaryLabel::Mixed],
            euler_char: 1,
            corner_count: 2,
        }
    }

    pub fn circle() -> Self {
        SurfaceSpec {
            kind: SurfaceKind::Circle,
            inner_radius: 0.0,
            punctures: Vec::new(),
            boundary_labels: Vec::new(),
            euler_char: 0,
            corner_count: 0,
        }
    }

    pub fn half_circle() -> Self {
        SurfaceSpec {
            kind: SurfaceKind::HalfCircle,
            inner_radius: 0.0,
            punctures: Vec::new(),
            boundary_labels: Vec::new(),
            euler_char: 1,
            corner_count: 0,
        }
    }

    pub fn with_label(mut self, label: BoundaryLabel) -> Self {
        for l in &mut self.boundary_labels {
            *l = label;
        }
        self
    }

    /// Checks χ, boundary count and the punctures.
    pub fn validate(&self) -> Result<()> {
        let (chi, nb) = match self.kind {
            SurfaceKind::Disk => (1, 1),
            SurfaceKind::Annulus => (0, 2),
            SurfaceKind::HalfDisk => (1, 1),
            SurfaceKind::Circle => (0, 0),
            SurfaceKind::HalfCircle => (1, 0),
        };
        if self.euler_char != chi {
            return Err(Error::Domain(format!("{:?} has Euler characteristic {chi}", self.kind)));
        }
        if self.boundary_labels.len() != nb {
            return Err(Error::Domain(format!("{:?} has {nb} boundary components", self.kind)));
        }
        if self.kind == SurfaceKind::Annulus && !(self.inner_radius > 0.0 && self.inner_radius < 1.0) {
            return Err(Error::Domain(format!("annulus inner radius {} not in (0,1)", self.inner_radius)));
        }
        for (i, z) in self.punctures.iter().enumerate() {
            if !self.is_interior(*z, 1e-9) {
                return Err(Error::Domain(format!("puncture {z} is not interior")));
            }
            if self.punctures[..i].iter().any(|w| (w - z).norm() < 1e-12) {
                return Err(Error::Domain("punctures must be distinct".into()));
            }
        }
        Ok(())
    }

    /// Whether z lies in the open surface, at distance > tol from ∂Σ.
    pub fn is_interior(&self, z: Complex64, tol: f64) -> bool {
        let r = z.norm();
        match self.kind {
            SurfaceKind::Disk => r < 1.0 - tol,
            SurfaceKind::Annulus => r < 1.0 - tol && r > self.inner_radius + tol,
            SurfaceKind::HalfDisk => r < 1.0 - tol && z.im > tol,
            SurfaceKind::Circle | SurfaceKind::HalfCircle => false,
        }
    }

    /// Flat geodesic curvature at a boundary point, w.r.t. the outward normal,
    /// together with that normal.
    pub fn flat_boundary(&self, z: Complex64, tol: f64) -> Option<(f64, Complex64)> {
        let r = z.norm();
        match self.kind {
            SurfaceKind::Disk if (r - 1.0).abs() < tol => Some((1.0, z / r)),
            SurfaceKind::Annulus if (r - 1.0).abs() < tol => Some((1.0, z / r)),
            SurfaceKind::Annulus if (r - self.inner_radius).abs() < tol => {
                Some((-1.0 / self.inner_radius, -z / r))
            }
            SurfaceKind::HalfDisk if (r - 1.0).abs() < tol && z.im >= -tol => Some((1.0, z / r)),
            SurfaceKind::HalfDisk if z.im.abs() < tol && z.re.abs() <= 1.0 + tol => {
                Some((0.0, Complex64::new(0.0, -1.0)))
            }
            _ => None,
        }
    }
}

/// ρ with analytic derivatives where available.
#[derive(Clone)]
pub enum ConformalFactor {
    Flat,
    Constant(f64),
    /// ρ = log(4/(1+|z|²)²), the round hemisphere on the unit disk.
    Hemisphere,
    /// ρ = a·exp(−|z−c|²/w²).
    Bump { amplitude: f64, center: Complex64, width: f64 },
    /// ρ = c0 + c1·x + c2·y + c3·(x² + y²).
    Quadratic([f64; 4]),
    /// Arbitrary smooth ρ; derivatives by central differences (step 1e-5).
    Custom(Arc<dyn Fn(Complex64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for ConformalFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConformalFactor::Flat => write!(f, "Flat"),
            ConformalFactor::Constant(c) => write!(f, "Constant({c})"),
            ConformalFactor::Hemisphere => write!(f, "Hemisphere"),
            ConformalFactor::Bump { amplitude, center, width } => {
                write!(f, "Bump({amplitude}, {center}, {width})")
            }
            ConformalFactor::Quadratic(c) => write!(f, "Quadratic({c:?})"),
            ConformalFactor::Custom(_) => write!(f, "Custom"),
        }
    }
}

const FD_STEP: f64 = 1e-5;

impl ConformalFactor {
    pub fn value(&self, z: Complex64) -> f64 {
        match self {
            ConformalFactor::Flat => 0.0,
            ConformalFactor::Constant(c) => *c,
            ConformalFactor::Hemisphere => 4f64.ln() - 2.0 * (1.0 + z.norm_sqr()).ln(),
            ConformalFactor::Bump { amplitude, center, width } => {
                amplitude * (-(z - center).norm_sqr() / (width * width)).exp()
            }
            ConformalFactor::Quadratic(c) => c[0] + c[1] * z.re + c[2] * z.im + c[3] * z.norm_sqr(),
            ConformalFactor::Custom(f) => f(z),
        }
    }

    /// Gradient (∂_x ρ, ∂_y ρ) packed as a complex number.
    pub fn gradient(&self, z: Complex64) -> Complex64 {
        match self {
            ConformalFactor::Flat | ConformalFactor::Constant(_) => Complex64::new(0.0, 0.0),
            ConformalFactor::Hemisphere => -4.0 * z / (1.0 + z.norm_sqr()),
            ConformalFactor::Bump { center, width, .. } => {
                let v = self.value(z);
                -2.0 * (z - center) / (width * width) * v
            }
            ConformalFactor::Quadratic(c) => Complex64::new(c[1] + 2.0 * c[3] * z.re, c[2] + 2.0 * c[3] * z.im),
            ConformalFactor::Custom(f) => {
                let h = FD_STEP;
                let dx = (f(z + h) - f(z - h)) / (2.0 * h);
                let iy = Complex64::new(0.0, h);
                let dy = (f(z + iy) - f(z - iy)) / (2.0 * h);
                Complex64::new(dx, dy)
            }
        }
    }

    /// Analyst's Laplacian ∂²_x ρ + ∂²_y ρ.
    pub fn laplacian(&self, z: Complex64) -> f64 {
        match self {
            ConformalFactor::Flat | ConformalFactor::Constant(_) => 0.0,
            ConformalFactor::Hemisphere => -8.0 / (1.0 + z.norm_sqr()).powi(2),
            ConformalFactor::Bump { center, width, .. } => {
                let w2 = width * width;
                let d2 = (z - center).norm_sqr();
                self.value(z) * (4.0 * d2 / (w2 * w2) - 4.0 / w2)
            }
            ConformalFactor::Quadratic(c) => 4.0 * c[3],
            ConformalFactor::Custom(f) => {
                let h = FD_STEP;
                let iy = Complex64::new(0.0, h);
                (f(z + h) + f(z - h) + f(z + iy) + f(z - iy) - 4.0 * f(z)) / (h * h)
            }
        }
    }

    /// Derivative of ρ along the unit vector `dir`.
    pub fn directional(&self, z: Complex64, dir: Complex64) -> f64 {
        let g = self.gradient(z);
        g.re * dir.re + g.im * dir.im
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, ConformalFactor::Flat) || matches!(self, ConformalFactor::Constant(_))
    }
}

/// Scalar curvature K = −e^{−ρ}Δρ at an interior point.
pub fn scalar_curvature(rho: &ConformalFactor, z: Complex64) -> f64 {
    -(-rho.value(z)).exp() * rho.laplacian(z)
}

/// Curvature data at a point: K, and k when `boundary` is set.
pub fn curvature_fields(
    surface: &SurfaceSpec,
    rho: &ConformalFactor,
    point: Complex64,
    boundary: bool,
) -> Result<(f64, Option<f64>)> {
    if matches!(surface.kind, SurfaceKind::Circle | SurfaceKind::HalfCircle) {
        return Err(Error::UnsupportedSurface(format!("{:?} has no curvature fields", surface.kind)));
    }
    let k_bulk = scalar_curvature(rho, point);
    if !boundary {
        let tol = 1e-12;
        if !surface.is_interior(point, -tol) {
            return Err(Error::Domain(format!("{point} is not on the surface")));
        }
        return Ok((k_bulk, None));
    }
    let (k0, nu) = surface
        .flat_boundary(point, 1e-9)
        .ok_or_else(|| Error::Domain(format!("{point} is not a boundary point")))?;
    let k = (-rho.value(point) / 2.0).exp() * (k0 + 0.5 * rho.directional(point, nu));
    Ok((k_bulk, Some(k)))
}

/// ½∫K dv + ∫k dℓ + Σ(corner turning) − 2πχ by Gauss–Legendre rules of
/// order `quad_order` (per panel).
pub fn gauss_bonnet_defect(surface: &SurfaceSpec, rho: &ConformalFactor, quad_order: usize) -> Result<f64> {
    if quad_order < 4 {
        return Err(Error::Domain("quad_order must be at least 4".into()));
    }
    surface.validate()?;
    let n = quad_order;
    let check = |v: f64| -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Quadrature("non-finite curvature value".into()))
        }
    };
    // K dv = −Δρ dA
    let bulk = |r0: f64, t0: f64, t1: f64| -> Result<f64> {
        let (rs, wr) = gauss_legendre_on(n, r0, 1.0);
        let (ts, wt) = gauss_legendre_on(2 * n, t0, t1);
        let mut s = 0.0;
        for (r, a) in rs.iter().zip(&wr) {
            for (t, b) in ts.iter().zip(&wt) {
                let z = Complex64::from_polar(*r, *t);
                s += a * b * r * check(-rho.laplacian(z))?;
            }
        }
        Ok(s)
    };
    // ∫k dℓ on an origin-centered circle of radius R, outward normal `sign`·r̂
    let circle = |rad: f64, sign: f64, t0: f64, t1: f64| -> Result<f64> {
        let (ts, wt) = gauss_legendre_on(2 * n, t0, t1);
        let mut s = 0.0;
        for (t, b) in ts.iter().zip(&wt) {
            let z = Complex64::from_polar(rad, *t);
            let nu = sign * z / rad;
            let k0 = sign / rad;
            s += b * rad * check(k0 + 0.5 * rho.directional(z, nu))?;
        }
        Ok(s)
    };
    let chi = surface.euler_char as f64;
    match surface.kind {
        SurfaceKind::Disk => Ok(0.5 * bulk(0.0, 0.0, TAU)? + circle(1.0, 1.0, 0.0, TAU)? - TAU * chi),
        SurfaceKind::Annulus => {
            let r = surface.inner_radius;
            Ok(0.5 * bulk(r, 0.0, TAU)? + circle(1.0, 1.0, 0.0, TAU)? + circle(r, -1.0, 0.0, TAU)? - TAU * chi)
        }
        SurfaceKind::HalfDisk => {
            let arc = circle(1.0, 1.0, 0.0, PI)?;
            // diameter y = 0, outward normal −ŷ, flat k = 0
            let (xs, wx) = gauss_legendre_on(2 * n, -1.0, 1.0);
            let mut seg = 0.0;
            for (x, w) in xs.iter().zip(&wx) {
                let z = Complex64::new(*x, 0.0);
                seg += w * check(0.5 * rho.directional(z, Complex64::new(0.0, -1.0)))?;
            }
            let corners = PI / 2.0 * surface.corner_count as f64;
            Ok(0.5 * bulk(0.0, 0.0, PI)? + arc + seg + corners - TAU * chi)
        }
        _ => Err(Error::UnsupportedSurface(format!("{:?}", surface.kind))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_examples() {
        let d = SurfaceSpec::disk(vec![]);
        let (k, kb) = curvature_fields(&d, &ConformalFactor::Flat, Complex64::new(0.2, 0.1), false).unwrap();
        assert_eq!((k, kb), (0.0, None));
        let (_, kb) = curvature_fields(&d, &ConformalFactor::Flat, Complex64::new(0.0, 1.0), true).unwrap();
        assert_eq!(kb, Some(1.0));
        let a = SurfaceSpec::annulus(0.5, vec![]);
        let (_, kb) = curvature_fields(&a, &ConformalFactor::Flat, Complex64::new(0.5, 0.0), true).unwrap();
        assert_eq!(kb, Some(-2.0));
        assert!(curvature_fields(&d, &ConformalFactor::Flat, Complex64::new(2.0, 0.0), false).is_err());
        assert!(curvature_fields(&d, &ConformalFactor::Flat, Complex64::new(0.5, 0.0), true).is_err());
    }

    #[test]
    fn hemisphere_curvature() {
        let d = SurfaceSpec::disk(vec![]);
        let h = ConformalFactor::Hemisphere;
        for z in [Complex64::new(0.0, 0.0), Complex64::new(0.3, -0.4), Complex64::new(-0.7, 0.1)] {
            let (k, _) = curvature_fields(&d, &h, z, false).unwrap();
            // scalar curvature of the unit sphere
            assert!((k - 2.0).abs() < 1e-13);
        }
        let (_, kb) = curvature_fields(&d, &h, Complex64::new(0.6, 0.8), true).unwrap();
        assert!(kb.unwrap().abs() < 1e-14);
    }

    #[test]
    fn defects_vanish() {
        let flat = ConformalFactor::Flat;
        assert!(gauss_bonnet_defect(&SurfaceSpec::disk(vec![]), &flat, 8).unwrap().abs() < 1e-13);
        assert!(gauss_bonnet_defect(&SurfaceSpec::half_disk(), &flat, 8).unwrap().abs() < 1e-13);
        assert!(gauss_bonnet_defect(&SurfaceSpec::annulus(0.5, vec![]), &flat, 8).unwrap().abs() < 1e-13);
        let h = ConformalFactor::Hemisphere;
        assert!(gauss_bonnet_defect(&SurfaceSpec::disk(vec![]), &h, 16).unwrap().abs() < 1e-10);
    }

    #[test]
    fn finite_difference_laplacian_agrees() {
        let h = ConformalFactor::Hemisphere;
        let c = ConformalFactor::Custom(Arc::new(|z: Complex64| 4f64.ln() - 2.0 * (1.0 + z.norm_sqr()).ln()));
        let z = Complex64::new(0.2, 0.35);
        assert!((h.laplacian(z) - c.laplacian(z)).abs() < 1e-4);
        assert!((h.gradient(z) - c.gradient(z)).norm() < 1e-8);
    }
}
