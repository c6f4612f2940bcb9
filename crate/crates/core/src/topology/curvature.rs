//! The cut primitive I^δ, the curvature term K^δ, its anomaly, regularized
//! norms and lattice theta sums.

use super::family::{intersections, Piece, SeparatingFamily, Vertex};
use super::form::HarmonicForm;
use crate::error::{Error, Result};
use crate::geometry::{ConformalFactor, SurfaceKind, SurfaceSpec};
use crate::quad::{gauss_legendre_on, guarded, integrate, integrate_with_breaks, take};
use num_complex::Complex64;
use std::cell::RefCell;
use std::f64::consts::{PI, TAU};

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI { y + TAU } else { y }
}

/// Single-valued primitive of ω on Σ∖δ with I(base) = 0.
pub struct Primitive<'a> {
    form: &'a HarmonicForm,
    family: &'a SeparatingFamily,
    base: Complex64,
    /// I(left of d_i) − I(right of d_i).
    jumps: Vec<f64>,
}

impl<'a> Primitive<'a> {
    pub fn new(form: &'a HarmonicForm, family: &'a SeparatingFamily, base: Complex64) -> Result<Self> {
        let surface = &form.surface;
        family.validate(surface)?;
        if !surface.is_interior(base, 1e-12) {
            return Err(Error::Path(format!("base point {base} is not interior")));
        }
        let jumps = (0..family.curves.len())
            .map(|i| {
                family
                    .start_side(surface, i)
                    .into_iter()
                    .map(|v| match v {
                        Vertex::Outer => form.enclosed(1.0),
                        Vertex::Inner => -form.enclosed(surface.inner_radius),
                        Vertex::Puncture(j) => -form.puncture_strength(j),
                    })
                    .sum()
            })
            .collect();
        let p = Primitive { form, family, base, jumps };
        p.check_off_cuts(base)?;
        Ok(p)
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    fn check_off_cuts(&self, z: Complex64) -> Result<()> {
        for c in &self.family.curves {
            for p in &c.pieces {
                if p.distance(z) < 1e-12 {
                    return Err(Error::Path(format!("{z} lies on a cut")));
                }
            }
        }
        Ok(())
    }

    /// Candidate paths from the base point to z: 0 is the default; later
    /// attempts go radially to another radius, around, and radially again.
    fn path(&self, z: Complex64, attempt: usize) -> Vec<Piece> {
        let b = self.base;
        let o = Complex64::new(0.0, 0.0);
        let surface = &self.form.surface;
        if surface.kind == SurfaceKind::Disk && attempt == 0 {
            return vec![Piece::Segment { a: b, b: z }];
        }
        let (lo, hi) = if surface.kind == SurfaceKind::Annulus {
            (surface.inner_radius + 1e-3, 1.0 - 1e-3)
        } else {
            (1e-2, 1.0 - 1e-3)
        };
        let rb = b.norm();
        let step = [0.0, 0.07, -0.07, 0.15, -0.15, 0.25, -0.25, 0.35, -0.35][(attempt / 2) % 9];
        let rho = (if rb < lo { 0.5 * (lo + hi) } else { rb } + step).clamp(lo, hi);
        let t0 = b.arg();
        let mut d = wrap_pi(z.arg() - t0);
        if attempt % 2 == 1 {
            d -= TAU * d.signum();
        }
        let mut out = Vec::new();
        let p0 = Complex64::from_polar(rho, t0);
        if (p0 - b).norm() > 1e-15 {
            out.push(Piece::Segment { a: b, b: p0 });
        }
        if d.abs() > 1e-15 {
            out.push(Piece::Arc { center: o, radius: rho, start: t0, sweep: d });
        }
        let m = Complex64::from_polar(rho, t0 + d);
        if (z - m).norm() > 1e-15 {
            out.push(Piece::Segment { a: m, b: z });
        }
        out
    }

    fn path_is_clear(&self, path: &[Piece], z: Complex64) -> bool {
        self.form
            .surface
            .punctures
            .iter()
            .all(|p| {
                let d = (p - z).norm();
                // z itself may sit a hair away from a puncture
                d < 1e-12 || path.iter().all(|q| q.distance(*p) > 1e-9f64.min(0.5 * d))
            })
    }

    /// I^δ_{base}(ω)(z).
    pub fn eval(&self, z: Complex64) -> Result<f64> {
        let surface = &self.form.surface;
        if !(surface.is_interior(z, -1e-12)) {
            return Err(Error::Path(format!("{z} is off the surface")));
        }
        self.check_off_cuts(z)?;
        let path = (0..18)
            .map(|k| self.path(z, k))
            .find(|p| self.path_is_clear(p, z))
            .ok_or_else(|| Error::Path(format!("no clear path to {z}")))?;
        let mut total = 0.0;
        for p in &path {
            total += match *p {
                Piece::Segment { a, b } => self.form.segment_integral(a, b),
                Piece::Arc { radius, start, sweep, .. } => self.form.arc_integral(radius, start, start + sweep),
            };
            for (i, c) in self.family.curves.iter().enumerate() {
                for q in &c.pieces {
                    for h in intersections(p, q) {
                        if !(h.s >= -1e-12 && h.s < 1.0 - 1e-12 && h.t >= -1e-12 && h.t < 1.0 - 1e-12) {
                            continue;
                        }
                        let x = cross(q.tangent(h.s.clamp(0.0, 1.0)), p.tangent(h.t.clamp(0.0, 1.0)));
                        if x.abs() < 1e-12 {
                            continue;
                        }
                        total += self.jumps[i] * x.signum();
                    }
                }
            }
        }
        Ok(total)
    }

    /// Value at puncture j seen along its tangent direction.
    pub fn at_tangent(&self, j: usize) -> Result<f64> {
        let z = self.form.surface.punctures[j];
        let off = 0.3;
        let v = self.family.tangent_angles[j] + off;
        let s = 1e-9;
        let val = self.eval(z + Complex64::from_polar(s, v))?;
        Ok(val - self.form.puncture_strength(j) * off / TAU)
    }
}

/// Runs `f` inside a quadrature, collecting the first error.
/// Boundary circles of the surface: (radius, flat k, outward sign).
fn circles(surface: &SurfaceSpec) -> Vec<(f64, f64, f64)> {
    let mut v = vec![(1.0, 1.0, 1.0)];
    if surface.kind == SurfaceKind::Annulus {
        let r = surface.inner_radius;
        v.push((r, -1.0 / r, -1.0));
    }
    v
}

const TOL: f64 = 1e-11;

/// ∫_{d} k dℓ in the metric e^ρ|dz|², d oriented from its start.
pub fn curve_curvature_integral(curve: &super::family::Curve, rho: &ConformalFactor) -> Result<f64> {
    let mut s = curve.turning();
    if rho.is_flat() {
        return Ok(s);
    }
    for p in &curve.pieces {
        let len = p.length();
        let f = |t: f64| {
            let z = p.point(t);
            let nl = Complex64::i() * p.tangent(t);
            rho.directional(z, nl) * len
        };
        s -= 0.5 * integrate(f, 0.0, 1.0, TOL, TOL)?;
    }
    Ok(s)
}

/// ∫_{∂Σ} k I dℓ.
fn boundary_term(prim: &Primitive, surface: &SurfaceSpec, rho: &ConformalFactor) -> Result<f64> {
    let mut total = 0.0;
    for (rad, k0, sign) in circles(surface) {
        let mut brk: Vec<f64> = Vec::new();
        for c in &prim.family.curves {
            for z in [c.start(), c.end()] {
                if (z.norm() - rad).abs() < 1e-9 {
                    brk.push(z.arg().rem_euclid(TAU));
                }
            }
        }
        for z in &surface.punctures {
            brk.push(z.arg().rem_euclid(TAU));
        }
        brk.sort_by(f64::total_cmp);
        let a0 = brk.first().copied().unwrap_or(0.0);
        let mut pts = brk.clone();
        pts.push(a0 + TAU);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let err = RefCell::new(None);
        let f = guarded(&err, |t: f64| {
            let z = Complex64::from_polar(rad, t);
            let nu = sign * z / rad;
            let k = k0 + 0.5 * rho.directional(z, nu);
            Ok(prim.eval(z)? * k * rad)
        });
        let v = integrate_with_breaks(&f, &pts, TOL, TOL)?;
        take(&err)?;
        total += v;
    }
    Ok(total)
}

/// ∫ (−Δρ) I dA over the surface, nested adaptive in polar coordinates.
fn bulk_term(prim: &Primitive, surface: &SurfaceSpec, rho: &ConformalFactor) -> Result<f64> {
    let r_in = if surface.kind == SurfaceKind::Annulus { surface.inner_radius } else { 0.0 };
    let mut rb = vec![r_in, 1.0];
    for z in &surface.punctures {
        rb.push(z.norm());
    }
    for c in &prim.family.curves {
        for p in &c.pieces {
            let (lo, hi) = p.radial_range();
            rb.push(lo);
            rb.push(hi);
        }
    }
    rb.retain(|r| *r >= r_in && *r <= 1.0);
    rb.sort_by(f64::total_cmp);
    rb.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let err = RefCell::new(None);
    let inner = |r: f64| -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        let circle = Piece::Arc { center: Complex64::new(0.0, 0.0), radius: r, start: 0.0, sweep: TAU };
        let mut tb = vec![0.0, TAU];
        for c in &prim.family.curves {
            for p in &c.pieces {
                for h in intersections(&circle, p) {
                    tb.push(h.point.arg().rem_euclid(TAU));
                }
            }
        }
        for z in &surface.punctures {
            tb.push(z.arg().rem_euclid(TAU));
        }
        tb.sort_by(f64::total_cmp);
        tb.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        let e2 = RefCell::new(None);
        let g = guarded(&e2, |t: f64| {
            let z = Complex64::from_polar(r, t);
            Ok(-rho.laplacian(z) * prim.eval(z)? * r)
        });
        let v = integrate_with_breaks(&g, &tb, 1e-10, 1e-10)?;
        take(&e2)?;
        Ok(v)
    };
    let f = guarded(&err, inner);
    let v = integrate_with_breaks(&f, &rb, 1e-9, 1e-10)?;
    take(&err)?;
    Ok(v)
}

/// Σ_i (∮_{a_i}ω ∫_{b_i}k − ∮_{b_i}ω ∫_{a_i}k) for an interior homology
/// basis given as (∮_a ω, ∫_b k, ∮_b ω, ∫_a k). Empty in genus zero.
pub fn genus_correction(cycles: &[(f64, f64, f64, f64)]) -> f64 {
    cycles.iter().map(|(wa, kb, wb, ka)| wa * kb - wb * ka).sum()
}

/// K^δ_{Σ,e^ρ,x₀}(ω).
pub fn curvature_term(
    form: &HarmonicForm,
    family: &SeparatingFamily,
    base: Complex64,
    rho: &ConformalFactor,
) -> Result<f64> {
    let surface = &form.surface;
    if !matches!(surface.kind, SurfaceKind::Disk | SurfaceKind::Annulus) {
        return Err(Error::UnsupportedSurface(format!("{:?}", surface.kind)));
    }
    if form.vortices().iter().all(|v| v.strength == 0.0) {
        return Ok(0.0);
    }
    let prim = Primitive::new(form, family, base)?;
    let mut k = boundary_term(&prim, surface, rho)?;
    for (i, c) in family.curves.iter().enumerate() {
        if prim.jumps[i] != 0.0 {
            k += prim.jumps[i] * curve_curvature_integral(c, rho)?;
        }
    }
    if !rho.is_flat() {
        k += 0.5 * bulk_term(&prim, surface, rho)?;
    }
    Ok(k + genus_correction(&[]))
}

/// K^{δ_b} − K^{δ_a}.
pub fn anomaly(
    form: &HarmonicForm,
    family_a: &SeparatingFamily,
    family_b: &SeparatingFamily,
    base: Complex64,
) -> Result<f64> {
    let flat = ConformalFactor::Flat;
    Ok(curvature_term(form, family_b, base, &flat)? - curvature_term(form, family_a, base, &flat)?)
}

/// Distance of x to the lattice step·ℤ.
pub fn lattice_distance(x: f64, step: f64) -> f64 {
    (x / step - (x / step).round()).abs() * step
}

/// Predicted K(x₀′) − K(x₀): −(2πχ − π b_MD) ∫ω along a path from x₀ to x₀′
/// in the cut surface.
pub fn base_point_change(form: &HarmonicForm, family: &SeparatingFamily, x0: Complex64, x1: Complex64) -> Result<f64> {
    let prim = Primitive::new(form, family, x0)?;
    let chi = form.surface.euler_char as f64;
    let b = form.surface.corner_count as f64;
    Ok(-(TAU * chi - PI * b) * prim.eval(x1)?)
}

/// Periodic trapezoid rule, doubled until stable.
fn periodic<F: Fn(f64) -> f64>(f: F, what: &str) -> Result<f64> {
    let mut n = 256usize;
    let mut prev = f64::NAN;
    while n <= 1 << 20 {
        let h = TAU / n as f64;
        let parts: Vec<f64> = (0..n).map(|i| f(i as f64 * h)).collect();
        let v = crate::mc::pairwise_sum(&parts) * h;
        if (v - prev).abs() <= 1e-13 * v.abs().max(1.0) {
            return Ok(v);
        }
        prev = v;
        n *= 2;
    }
    Err(Error::NonConvergence(format!("trapezoid rule for {what}")))
}

fn dot(a: Complex64, b: Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

/// ½∫⟨dρ, ω⟩ dv = −½∮_{∂Σ} ρ dL over the boundary with its induced
/// orientation.
pub fn metric_change(form: &HarmonicForm, rho: &ConformalFactor) -> Result<f64> {
    let mut s = 0.0;
    for (rad, _, sign) in circles(&form.surface) {
        // induced orientation: counterclockwise on the outer circle
        let v = periodic(
            |t| {
                let z = Complex64::from_polar(rad, t);
                let tau = Complex64::i() * z / rad * sign;
                rho.value(z) * dot(form.potential_gradient(z), tau) * rad
            },
            "metric change",
        )?;
        s += v;
    }
    Ok(-0.5 * s)
}

/// Geodesic radius ε around z measured along straight rays: flat radius r(θ).
fn geodesic_radius(rho: &ConformalFactor, z: Complex64, eps: f64, theta: f64) -> f64 {
    if rho.is_flat() {
        return eps * (-rho.value(z) / 2.0).exp();
    }
    let e = Complex64::from_polar(1.0, theta);
    let mut r = eps * (-rho.value(z) / 2.0).exp();
    for _ in 0..50 {
        let (x, w) = gauss_legendre_on(8, 0.0, r);
        let len: f64 = x.iter().zip(&w).map(|(s, wt)| wt * (rho.value(z + e * *s) / 2.0).exp()).sum();
        let d = (len - eps) / (rho.value(z + e * r) / 2.0).exp();
        r -= d;
        if d.abs() < 1e-16 * r {
            break;
        }
    }
    r
}

/// Excised energy for one ε: boundary circles, small puncture loops and
/// the counterterm.
fn excised_energy(form: &HarmonicForm, rho: &ConformalFactor, eps: f64) -> Result<f64> {
    let mut s = 0.0;
    for (rad, _, sign) in circles(&form.surface) {
        s += periodic(
            |t| {
                let z = Complex64::from_polar(rad, t);
                let nu = sign * z / rad;
                form.potential(z) * dot(form.potential_gradient(z), nu) * rad
            },
            "boundary energy",
        )?;
    }
    for (i, zi) in form.surface.punctures.iter().enumerate() {
        let m = form.puncture_strength(i);
        if m == 0.0 {
            continue;
        }
        let h = 1e-4;
        let v = periodic(
            |t| {
                let r = geodesic_radius(rho, *zi, eps, t);
                let dr = if rho.is_flat() {
                    0.0
                } else {
                    (geodesic_radius(rho, *zi, eps, t + h) - geodesic_radius(rho, *zi, eps, t - h)) / (2.0 * h)
                };
                let e = Complex64::from_polar(1.0, t);
                let z = zi + r * e;
                let dz = dr * e + Complex64::i() * r * e;
                // normal out of the excised surface points into the small disk
                let n = Complex64::i() * dz;
                form.potential(z) * dot(form.potential_gradient(z), n)
            },
            "puncture energy",
        )?;
        s += v + m * m * eps.ln() / TAU;
    }
    Ok(s)
}

/// ∫^reg |ω|² in the metric e^ρ|dz|², by geodesic excision and Richardson
/// extrapolation in ε².
pub fn regularized_norm(form: &HarmonicForm, rho: &ConformalFactor) -> Result<f64> {
    let surface = &form.surface;
    let mut dmin = f64::INFINITY;
    for (i, z) in surface.punctures.iter().enumerate() {
        dmin = dmin.min(1.0 - z.norm());
        if surface.kind == SurfaceKind::Annulus {
            dmin = dmin.min(z.norm() - surface.inner_radius);
        }
        for w in &surface.punctures[..i] {
            dmin = dmin.min((z - w).norm() / 2.0);
        }
    }
    let e0 = 1e-2f64.min(0.2 * dmin);
    let v: Vec<f64> = [e0, e0 / 2.0, e0 / 4.0]
        .iter()
        .map(|e| excised_energy(form, rho, *e))
        .collect::<Result<_>>()?;
    let r1 = (4.0 * v[1] - v[0]) / 3.0;
    let r2 = (4.0 * v[2] - v[1]) / 3.0;
    if (r1 - r2).abs() > 1e-7 * r2.abs().max(1.0) {
        return Err(Error::NonConvergence(format!("excision ladder: {r1} vs {r2}")));
    }
    Ok((16.0 * r2 - r1) / 15.0)
}

/// Σ over the cohomology lattice of e^{−a ∫^reg|ω|²}.
pub fn theta_sum(surface: &SurfaceSpec, m: &[i64], a: f64, rho: &ConformalFactor) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain("a must be positive".into()));
    }
    let lat = super::form::cohomology_lattice(surface, m)?;
    if lat.rank == 0 {
        return Ok((-a * regularized_norm(&lat.representative(&[])?, rho)?).exp());
    }
    let n0 = regularized_norm(&lat.representative(&[0])?, rho)?;
    let n1 = regularized_norm(&lat.representative(&[1])?, rho)?;
    let nm = regularized_norm(&lat.representative(&[-1])?, rho)?;
    let qa = (n1 + nm - 2.0 * n0) / 2.0;
    let qb = (n1 - nm) / 2.0;
    if !(qa > 0.0) {
        return Err(Error::NonConvergence("lattice norm is not positive definite".into()));
    }
    let q = |k: f64| qa * k * k + qb * k + n0;
    let kc = (-qb / (2.0 * qa)).round();
    let qmin = q(kc);
    // terms beyond e^{-40} relative to the largest are dropped
    let span = (40.0 / (a * qa)).sqrt().ceil() + 2.0;
    let ks: Vec<f64> = (-(span as i64)..=span as i64).map(|j| kc + j as f64).collect();
    let terms: Vec<f64> = ks.iter().map(|k| (-a * (q(*k) - qmin)).exp()).collect();
    Ok((-a * qmin).exp() * crate::mc::pairwise_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::super::family::{build, Curve};
    use super::super::form::Vortex;
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn disk_family(z: Complex64, v: f64, len: f64) -> SeparatingFamily {
        let s = SurfaceSpec::disk(vec![z]);
        SeparatingFamily {
            curves: vec![build::puncture_to_circle(&s, &[v], 0, 0.0, len, &[], true)],
            tangent_angles: vec![v],
        }
    }

    #[test]
    fn jump_matches_direct_limits() {
        let d = SurfaceSpec::disk(vec![c(0.0, 0.0)]);
        let f = HarmonicForm::neumann(&d, &[3], 0).unwrap();
        let fam = disk_family(c(0.0, 0.0), 0.0, 0.5);
        let p = Primitive::new(&f, &fam, c(0.3, 0.2)).unwrap();
        let above = p.eval(c(0.6, 1e-9)).unwrap();
        let below = p.eval(c(0.6, -1e-9)).unwrap();
        assert!((above - below - p.jumps()[0]).abs() < 1e-7);
        assert!((p.jumps()[0] + 3.0).abs() < 1e-15);
    }

    #[test]
    fn primitive_is_path_independent() {
        let a = SurfaceSpec::annulus(0.3, vec![c(0.5, 0.2), c(-0.6, -0.1)]);
        let f = HarmonicForm::neumann(&a, &[2, -1], 1).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        let fam = super::super::family::random_family(&a, &[0.4, 2.5], &mut rng).unwrap();
        let base = c(0.0, 0.7);
        let p = Primitive::new(&f, &fam, base).unwrap();
        for z in [c(0.8, 0.0), c(-0.4, -0.5), c(0.1, -0.9), c(-0.35, 0.1)] {
            let short = p.eval(z).unwrap();
            let long = {
                let path = p.path(z, 1);
                let mut t = 0.0;
                for q in &path {
                    t += match *q {
                        Piece::Segment { a, b } => f.segment_integral(a, b),
                        Piece::Arc { radius, start, sweep, .. } => f.arc_integral(radius, start, start + sweep),
                    };
                    for (i, cv) in fam.curves.iter().enumerate() {
                        for pc in &cv.pieces {
                            for h in intersections(q, pc) {
                                if h.s >= -1e-12 && h.s < 1.0 - 1e-12 && h.t >= -1e-12 && h.t < 1.0 - 1e-12 {
                                    t += p.jumps()[i] * cross(pc.tangent(h.s.clamp(0.0, 1.0)), q.tangent(h.t.clamp(0.0, 1.0))).signum();
                                }
                            }
                        }
                    }
                }
                t
            };
            assert!((short - long).abs() < 1e-9, "{short} {long}");
        }
    }

    #[test]
    fn zero_form_has_zero_term() {
        let d = SurfaceSpec::disk(vec![c(0.2, 0.0)]);
        let f = HarmonicForm::neumann(&d, &[0], 0).unwrap();
        let fam = disk_family(c(0.2, 0.0), 0.5, 0.2);
        assert_eq!(curvature_term(&f, &fam, c(-0.5, 0.0), &ConformalFactor::Flat).unwrap(), 0.0);
    }

    #[test]
    fn exact_form_on_flat_disk() {
        // ω = df with all vortices outside the disk
        let d = SurfaceSpec::disk(vec![c(0.1, 0.3)]);
        let vs = vec![
            Vortex { center: c(1.5, 0.4), strength: 1.3 },
            Vortex { center: c(-0.3, -2.0), strength: -0.7 },
        ];
        let f = HarmonicForm::from_vortices(&d, vs.clone()).unwrap();
        let fam = disk_family(c(0.1, 0.3), 1.0, 0.2);
        let x0 = c(-0.4, -0.2);
        let k = curvature_term(&f, &fam, x0, &ConformalFactor::Flat).unwrap();
        let pot = |z: Complex64| -> f64 { vs.iter().map(|v| v.strength * (1.0 - z / v.center).arg()).sum::<f64>() / TAU };
        let (ts, ws) = gauss_legendre_on(400, 0.0, TAU);
        let circ: f64 = ts.iter().zip(&ws).map(|(t, w)| w * pot(Complex64::from_polar(1.0, *t))).sum();
        assert!((k - (circ - TAU * pot(x0))).abs() < 1e-9);
    }

    #[test]
    fn rotating_the_tangent() {
        // anomaly θ·m under a rigid rotation of the cut at z
        let z = c(0.2, -0.1);
        let d = SurfaceSpec::disk(vec![z]);
        let f = HarmonicForm::neumann(&d, &[2], 0).unwrap();
        let x0 = c(-0.5, 0.3);
        let v = 0.3;
        let k0 = curvature_term(&f, &disk_family(z, v, 0.2), x0, &ConformalFactor::Flat).unwrap();
        for th in [0.4, -0.6, 1.1] {
            let k1 = curvature_term(&f, &disk_family(z, v + th, 0.2), x0, &ConformalFactor::Flat).unwrap();
            assert!((k1 - k0 - th * 2.0).abs() < 1e-8, "{th}: {}", k1 - k0);
        }
    }

    #[test]
    fn norm_examples() {
        let d = SurfaceSpec::disk(vec![c(0.0, 0.0)]);
        let f = HarmonicForm::neumann(&d, &[1], 0).unwrap();
        assert!(regularized_norm(&f, &ConformalFactor::Flat).unwrap().abs() < 1e-10);
        let r = (-1.0f64).exp();
        let a = SurfaceSpec::annulus(r, vec![]);
        let g = HarmonicForm::neumann(&a, &[], 3).unwrap();
        let want = 9.0 / TAU;
        assert!((regularized_norm(&g, &ConformalFactor::Flat).unwrap() - want).abs() < 1e-10);
        assert!((regularized_norm(&g, &ConformalFactor::Constant(0.7)).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn norm_matches_limit_formula() {
        // closed-form limit: Σ_circles L·flux − Σ m_i L̃_i(z_i)
        let a = SurfaceSpec::annulus(0.35, vec![c(0.5, 0.3), c(-0.2, -0.6)]);
        let f = HarmonicForm::neumann(&a, &[2, -1], 1).unwrap();
        let mut want = 0.0;
        for (rad, sign) in [(1.0, 1.0), (0.35, -1.0)] {
            let n = 4096;
            for i in 0..n {
                let z = Complex64::from_polar(rad, TAU * i as f64 / n as f64);
                want += f.potential(z) * dot(f.potential_gradient(z), sign * z / rad) * rad * TAU / n as f64;
            }
        }
        for (i, zi) in a.punctures.iter().enumerate() {
            want -= f.puncture_strength(i) * f.potential_without(i, *zi);
        }
        let got = regularized_norm(&f, &ConformalFactor::Flat).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} {want}");
    }

    #[test]
    fn theta_series() {
        let r = (-1.0f64).exp();
        let a = SurfaceSpec::annulus(r, vec![]);
        let s = theta_sum(&a, &[], PI * 4.0, &ConformalFactor::Flat).unwrap();
        let want: f64 = (-30i32..=30).map(|k| (-2.0 * (k * k) as f64).exp()).sum();
        assert!((s - want).abs() < 1e-10);
        let big = theta_sum(&a, &[], 400.0, &ConformalFactor::Flat).unwrap();
        assert!((big - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metric_change_matches_area_integral() {
        let d = SurfaceSpec::disk(vec![]);
        let f = HarmonicForm::from_vortices(&d, vec![Vortex { center: c(1.4, 0.5), strength: 1.0 }]).unwrap();
        let rho = ConformalFactor::Bump { amplitude: 0.8, center: c(0.2, -0.1), width: 0.5 };
        let (rs, wr) = gauss_legendre_on(80, 0.0, 1.0);
        let (ts, wt) = gauss_legendre_on(160, 0.0, TAU);
        let mut s = 0.0;
        for (r, a) in rs.iter().zip(&wr) {
            for (t, b) in ts.iter().zip(&wt) {
                let z = Complex64::from_polar(*r, *t);
                s += a * b * r * dot(rho.gradient(z), f.eval(z));
            }
        }
        assert!((metric_change(&f, &rho).unwrap() - 0.5 * s).abs() < 1e-10);
    }

    #[test]
    fn curve_text_names() {
        let c0 = Curve { from: Vertex::Inner, to: Vertex::Outer, pieces: vec![] };
        assert_eq!(c0.reversed().from, Vertex::Outer);
    }
}
