//! Closed 1-forms built from point vortices, ω = Σ c_j d arg(z − a_j)/2π.
//!
//! Harmonic Neumann representatives on the disk and the annulus use image
//! vortices. Every line integral is evaluated exactly through complex
//! arguments, so paths need no quadrature.

use crate::error::{Error, Result};
use crate::geometry::{SurfaceKind, SurfaceSpec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub center: Complex64,
    pub strength: f64,
}

/// Image truncation for the annulus: r^{2K} below this.
const IMAGE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarmonicForm {
    pub surface: SurfaceSpec,
    /// Winding around each puncture.
    pub winding: Vec<i64>,
    /// Annulus: cycle around the inner boundary, counterclockwise.
    pub boundary_cycle: Option<i64>,
    vortices: Vec<Vortex>,
}

fn tol_eq(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() < 1e-12
}

/// Lifted argument of z − a along the circle |z| = radius, continuous in t.
fn lifted_arg(a: Complex64, radius: f64, t: f64) -> f64 {
    let e = Complex64::from_polar(1.0, t);
    if a.norm() < radius {
        t + (1.0 - a * e.conj() / radius).arg()
    } else {
        (1.0 - radius * e / a).arg()
    }
}

impl HarmonicForm {
    /// Neumann harmonic representative with windings `m` around the punctures
    /// and, on the annulus, inner cycle `k`.
    pub fn neumann(surface: &SurfaceSpec, m: &[i64], k: i64) -> Result<Self> {
        surface.validate()?;
        if m.len() != surface.punctures.len() {
            return Err(Error::Domain(format!(
                "{} windings for {} punctures",
                m.len(),
                surface.punctures.len()
            )));
        }
        let mut v = Vec::new();
        match surface.kind {
            SurfaceKind::Disk => {
                if k != 0 {
                    return Err(Error::Domain("the disk has no inner cycle".into()));
                }
                for (z, &mi) in surface.punctures.iter().zip(m) {
                    let s = mi as f64;
                    v.push(Vortex { center: *z, strength: s });
                    if z.norm() > 0.0 {
                        v.push(Vortex { center: 1.0 / z.conj(), strength: -s });
                    }
                }
            }
            SurfaceKind::Annulus => {
                let r = surface.inner_radius;
                let r2 = r * r;
                let kmax = (IMAGE_TOL.ln() / (2.0 * r.ln())).ceil() as i32;
                for (z, &mi) in surface.punctures.iter().zip(m) {
                    let s = mi as f64;
                    if s == 0.0 {
                        continue;
                    }
                    for j in -kmax..=kmax {
                        let f = r2.powi(j);
                        v.push(Vortex { center: f * z, strength: s });
                        v.push(Vortex { center: f / z.conj(), strength: -s });
                    }
                }
                if k != 0 {
                    v.push(Vortex { center: Complex64::new(0.0, 0.0), strength: k as f64 });
                }
            }
            _ => return Err(Error::UnsupportedSurface(format!("{:?}", surface.kind))),
        }
        Ok(HarmonicForm {
            surface: surface.clone(),
            winding: m.to_vec(),
            boundary_cycle: (surface.kind == SurfaceKind::Annulus).then_some(k),
            vortices: v,
        })
    }

    /// A closed form from arbitrary vortices placed at punctures or off the
    /// closed surface. Neumann conditions are not imposed.
    pub fn from_vortices(surface: &SurfaceSpec, vortices: Vec<Vortex>) -> Result<Self> {
        surface.validate()?;
        let mut winding = vec![0i64; surface.punctures.len()];
        let mut wind_f = vec![0.0; surface.punctures.len()];
        let mut hole = 0.0;
        for vx in &vortices {
            if let Some(i) = surface.punctures.iter().position(|z| tol_eq(*z, vx.center)) {
                wind_f[i] += vx.strength;
                continue;
            }
            if surface.is_interior(vx.center, -1e-9) || surface.flat_boundary(vx.center, 1e-9).is_some() {
                return Err(Error::Domain(format!("vortex at {} lies on the surface", vx.center)));
            }
            if surface.kind == SurfaceKind::Annulus && vx.center.norm() < surface.inner_radius {
                hole += vx.strength;
            }
        }
        for (w, f) in winding.iter_mut().zip(&wind_f) {
            *w = f.round() as i64;
        }
        Ok(HarmonicForm {
            surface: surface.clone(),
            winding,
            boundary_cycle: (surface.kind == SurfaceKind::Annulus).then_some(hole.round() as i64),
            vortices,
        })
    }

    pub fn vortices(&self) -> &[Vortex] {
        &self.vortices
    }

    /// Multiplies ω by s.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vortices {
            v.strength *= s;
        }
        out
    }

    /// Components (ω_x, ω_y) packed as a complex number.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for v in &self.vortices {
            let w = 1.0 / (z - v.center);
            s += v.strength * Complex64::new(w.im, w.re);
        }
        s / TAU
    }

    /// ∫ω along the straight segment p → q.
    pub fn segment_integral(&self, p: Complex64, q: Complex64) -> f64 {
        let mut s = 0.0;
        for v in &self.vortices {
            s += v.strength * ((q - v.center) / (p - v.center)).arg();
        }
        s / TAU
    }

    /// ∫ω along |z| = radius from angle t0 to t1 (any sign, any length).
    pub fn arc_integral(&self, radius: f64, t0: f64, t1: f64) -> f64 {
        let mut s = 0.0;
        for v in &self.vortices {
            if v.center.norm() == 0.0 {
                s += v.strength * (t1 - t0);
                continue;
            }
            s += v.strength * (lifted_arg(v.center, radius, t1) - lifted_arg(v.center, radius, t0));
        }
        s / TAU
    }

    /// Conjugate potential L with ω = ⋆dL, i.e. (ω_x, ω_y) = (−∂_y L, ∂_x L).
    pub fn potential(&self, z: Complex64) -> f64 {
        let mut s = 0.0;
        for v in &self.vortices {
            s += v.strength * if v.center.norm() > 1.0 { (1.0 - z / v.center).norm().ln() } else { (z - v.center).norm().ln() };
        }
        s / TAU
    }

    /// ∇L packed as a complex number.
    pub fn potential_gradient(&self, z: Complex64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for v in &self.vortices {
            let d = z - v.center;
            s += v.strength * d / d.norm_sqr();
        }
        s / TAU
    }

    /// L with the vortex at puncture `i` removed, evaluated at z.
    pub fn potential_without(&self, i: usize, z: Complex64) -> f64 {
        let zi = self.surface.punctures[i];
        let mut s = 0.0;
        for v in &self.vortices {
            if tol_eq(v.center, zi) {
                continue;
            }
            s += v.strength * if v.center.norm() > 1.0 { (1.0 - z / v.center).norm().ln() } else { (z - v.center).norm().ln() };
        }
        s / TAU
    }

    /// Total strength of vortices strictly inside |z| < radius.
    pub fn enclosed(&self, radius: f64) -> f64 {
        self.vortices.iter().filter(|v| v.center.norm() < radius).map(|v| v.strength).sum()
    }

    /// Strength at puncture i (the winding, for closed forms built here).
    pub fn puncture_strength(&self, i: usize) -> f64 {
        let zi = self.surface.punctures[i];
        self.vortices.iter().filter(|v| tol_eq(v.center, zi)).map(|v| v.strength).sum()
    }

    /// Named cycle integrals: punctures, and the boundary circles taken
    /// counterclockwise.
    pub fn cycles(&self) -> Vec<(String, i64)> {
        let mut out: Vec<(String, i64)> =
            self.winding.iter().enumerate().map(|(i, m)| (format!("z{i}"), *m)).collect();
        let outer = self.enclosed(1.0 + 1e-12).round() as i64;
        if let Some(k) = self.boundary_cycle {
            out.push(("inner".into(), k));
        }
        out.push(("outer".into(), outer));
        out
    }
}

/// The lattice of harmonic classes with prescribed windings.
#[derive(Debug, Clone)]
pub struct CohomologyLattice {
    pub surface: SurfaceSpec,
    pub m: Vec<i64>,
    pub rank: usize,
}

impl CohomologyLattice {
    /// Representative for integer coordinates (empty on the disk, [k] on
    /// the annulus).
    pub fn representative(&self, coords: &[i64]) -> Result<HarmonicForm> {
        if coords.len() != self.rank {
            return Err(Error::Domain(format!("expected {} coordinates", self.rank)));
        }
        HarmonicForm::neumann(&self.surface, &self.m, coords.first().copied().unwrap_or(0))
    }
}

pub fn cohomology_lattice(surface: &SurfaceSpec, m: &[i64]) -> Result<CohomologyLattice> {
    let rank = match surface.kind {
        SurfaceKind::Disk => 0,
        SurfaceKind::Annulus => 1,
        k => return Err(Error::UnsupportedSurface(format!("{k:?}"))),
    };
    surface.validate()?;
    if m.len() != surface.punctures.len() {
        return Err(Error::Domain("one winding per puncture".into()));
    }
    Ok(CohomologyLattice { surface: surface.clone(), m: m.to_vec(), rank })
}
