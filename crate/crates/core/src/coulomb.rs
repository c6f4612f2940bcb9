//! Gamma-product structure constants and Coulomb gas integrals on the
//! unit disk and its boundary circle.

use crate::error::{Error, Result};
use crate::mc::{estimate, McEstimate};
use crate::quad::gauss_jacobi_unit;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use std::f64::consts::{PI, TAU};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural logarithm of Γ(x) for x > 0 (Lanczos, g = 7).
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma needs x > 0, got {x}")));
    }
    if x < 0.5 {
        return Ok(lanczos(x + 1.0) - x.ln());
    }
    Ok(lanczos(x))
}

fn lanczos(x: f64) -> f64 {
    let z = x - 1.0;
    let mut a = LANCZOS[0];
    let t = z + LANCZOS_G + 0.5;
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (z + k as f64);
    }
    0.5 * TAU.ln() + (z + 0.5) * t.ln() - t + a.ln()
}

/// Γ(x) for x > 0.
pub fn gamma(x: f64) -> Result<f64> {
    log_gamma(x).map(f64::exp)
}

/// Exponents of the circular Morris integrand |1−y|^{2a} ∏|y−y'|^{2c}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MorrisParams {
    pub q: u32,
    pub a: f64,
    pub c: f64,
}

impl MorrisParams {
    /// From charges: a = ηβ/4, c = β²/4.
    pub fn from_charges(q: u32, eta: f64, beta: f64) -> Self {
        MorrisParams { q, a: eta * beta / 4.0, c: beta * beta / 4.0 }
    }

    /// Integrability on the circle.
    pub fn check(&self) -> Result<()> {
        if self.q >= 2 && 2.0 * self.c <= -1.0 {
            return Err(Error::Divergence(format!("pair exponent 2c = {} <= -1", 2.0 * self.c)));
        }
        if self.q >= 1 && 2.0 * self.a + (self.q as f64 - 1.0) * 2.0 * self.c <= -1.0 {
            return Err(Error::Divergence(format!(
                "point exponent 2a + (q-1)2c = {} <= -1",
                2.0 * self.a + (self.q as f64 - 1.0) * 2.0 * self.c
            )));
        }
        Ok(())
    }
}

/// Closed form of the normalized Morris integral.
pub fn morris_closed_form(p: &MorrisParams) -> Result<f64> {
    let (a, c) = (p.a, p.c);
    let mut l = 0.0;
    for j in 0..p.q {
        let j = j as f64;
        for (x, sgn) in [
            (1.0 + 2.0 * a + j * c, 1.0),
            (1.0 + (j + 1.0) * c, 1.0),
            (1.0 + a + j * c, -2.0),
            (1.0 + c, -1.0),
        ] {
            if x <= 0.0 {
                return Err(Error::Domain(format!("Gamma argument {x} is not positive")));
            }
            l += sgn * log_gamma(x)?;
        }
    }
    Ok(l.exp())
}

/// Γ(1+qβ²/4)/Γ(1+β²/4)^q.
pub fn fyodorov_bouchaud(q: u32, beta: f64) -> Result<f64> {
    let c = beta * beta / 4.0;
    Ok((log_gamma(1.0 + q as f64 * c)? - q as f64 * log_gamma(1.0 + c)?).exp())
}

/// Draws an angle in (−π, π) with density ∝ |φ|^γ (γ > −1).
/// Returns the angle and its weight relative to the uniform density 1/2π.
fn power_angle<R: Rng + ?Sized>(rng: &mut R, gamma: f64) -> (f64, f64) {
    let u: f64 = rng.random();
    let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
    if gamma == 0.0 {
        return (s * PI * u, 1.0);
    }
    let phi = PI * u.powf(1.0 / (1.0 + gamma));
    let w = PI.powf(gamma) / ((1.0 + gamma) * phi.powf(gamma));
    (s * phi, w)
}

fn chord(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm()
}

/// Monte Carlo estimate of the normalized circular integral
/// ∫ ∏|x−y_k|^{e} ∏_{k<l}|y_k−y_l|^{s} ∏ dθ_k/2π with insertion x.
///
/// For e < 0 the angles relative to x are drawn from |φ|^e.
pub fn selberg_mc(
    q: u32,
    eta_exponent: f64,
    pair_exponent: f64,
    insertion: Complex64,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    MorrisParams { q, a: eta_exponent / 2.0, c: pair_exponent / 2.0 }.check()?;
    let x = insertion / insertion.norm();
    let gamma = if eta_exponent < 0.0 { eta_exponent } else { 0.0 };
    let qn = q as usize;
    Ok(estimate(n_samples, seed, |rng, _| {
        let mut ys = [Complex64::new(0.0, 0.0); 16];
        let mut buf = Vec::new();
        let ys: &mut [Complex64] = if qn <= 16 {
            &mut ys[..qn]
        } else {
            buf.resize(qn, Complex64::new(0.0, 0.0));
            &mut buf
        };
        let mut w = 1.0;
        for y in ys.iter_mut() {
            let (phi, wi) = power_angle(rng, gamma);
            *y = x * Complex64::from_polar(1.0, phi);
            w *= wi;
        }
        let mut f = 1.0;
        if eta_exponent != 0.0 {
            for y in ys.iter() {
                f *= chord(x, *y).powf(eta_exponent);
            }
        }
        if pair_exponent != 0.0 {
            for k in 0..qn {
                for l in k + 1..qn {
                    f *= chord(ys[k], ys[l]).powf(pair_exponent);
                }
            }
        }
        Complex64::new(f * w, 0.0)
    }))
}

/// Deterministic Gauss–Jacobi evaluation of the normalized circular
/// integral for q ≤ 2 (insertion at 1).
pub fn selberg_quadrature(q: u32, eta_exponent: f64, pair_exponent: f64, n_nodes: usize) -> Result<f64> {
    MorrisParams { q, a: eta_exponent / 2.0, c: pair_exponent / 2.0 }.check()?;
    let (e, s) = (eta_exponent, pair_exponent);
    // |2 sin(πt)|^p / (t(1−t))^p with the removable endpoints filled in
    let reg = |t: f64, p: f64| -> f64 {
        if p == 0.0 {
            return 1.0;
        }
        let d = t * (1.0 - t);
        if d < 1e-300 {
            return TAU.powf(p);
        }
        ((2.0 * (PI * t).sin()).abs() / d).powf(p)
    };
    match q {
        0 => Ok(1.0),
        1 => {
            let (t, w) = gauss_jacobi_unit(n_nodes, e, e)?;
            Ok(t.iter().zip(&w).map(|(t, w)| w * reg(*t, e)).sum())
        }
        2 => {
            // ordered pair 0 < t2 < t1 < 1 with t2 = t1·u, doubled by symmetry
            let (u, wu) = gauss_jacobi_unit(n_nodes, e, s)?;
            let (t, wt) = gauss_jacobi_unit(n_nodes, 1.0 + 2.0 * e + s, e)?;
            let mut outer = Vec::with_capacity(n_nodes);
            for (t1, w1) in t.iter().zip(&wt) {
                let t1 = *t1;
                // |2 sin πt1|^e = t1^e (1−t1)^e reg(t1)
                let f1 = reg(t1, e);
                let mut inner = Vec::with_capacity(n_nodes);
                for (ui, wi) in u.iter().zip(&wu) {
                    let t2 = t1 * ui;
                    // |2 sin πt2|^e = (t1 u)^e · g, g = (|2 sin πt2|/(t2))^e
                    let g2 = if e == 0.0 {
                        1.0
                    } else {
                        ((2.0 * (PI * t2).sin()).abs() / t2).powf(e)
                    };
                    // |2 sin π(t1−t2)|^s = (t1(1−u))^s · h
                    let dt = t1 - t2;
                    let h = if s == 0.0 {
                        1.0
                    } else {
                        ((2.0 * (PI * dt).sin()).abs() / dt).powf(s)
                    };
                    inner.push(wi * g2 * h);
                }
                outer.push(w1 * f1 * crate::mc::pairwise_sum(&inner));
            }
            Ok(2.0 * crate::mc::pairwise_sum(&outer))
        }
        _ => Err(Error::Domain(format!("quadrature backend supports q <= 2, got {q}"))),
    }
}

/// Non-fatal diagnostic attached to a Monte Carlo result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceWarning {
    pub exponent: String,
    pub value: f64,
    pub boundary: f64,
}

/// Result of [`mixed_integral_mc`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedIntegral {
    pub estimate: McEstimate,
    pub warnings: Vec<DivergenceWarning>,
}

/// Fixed insertions and screening charges of a disk Coulomb gas.
///
/// The integrand over 𝔻^p × (∂𝔻)^q is
/// ∏_w e^{−β²W(w)/2} ∏_{pairs} (|u−v||1−u v̄|)^{s_u s_v}
/// with bulk screening charge β, boundary screening charge β/2 and the
/// fixed charges contributing only through their cross terms.
#[derive(Debug, Clone, PartialEq)]
pub struct CoulombGas {
    pub beta: f64,
    /// (position, charge) of fixed bulk insertions.
    pub bulk: Vec<(Complex64, f64)>,
    /// (position on the circle, charge) of fixed boundary insertions; the
    /// charge is η/2.
    pub boundary: Vec<(Complex64, f64)>,
}

/// Exponent of the pair factor (|u−v||1−u v̄|).
fn pair_factor(u: Complex64, v: Complex64, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    ((u - v).norm() * (Complex64::new(1.0, 0.0) - u * v.conj()).norm()).powf(s)
}

impl CoulombGas {
    /// Screening-point integrand at bulk points `ws` and boundary points `ys`.
    pub fn screening_integrand(&self, ws: &[Complex64], ys: &[Complex64]) -> f64 {
        let b = self.beta;
        let b2 = b * b;
        let mut f = 1.0;
        for (j, w) in ws.iter().enumerate() {
            f *= (1.0 - w.norm_sqr()).max(0.0).powf(b2 / 2.0);
            for (z, a) in &self.bulk {
                f *= pair_factor(*w, *z, a * b);
            }
            for (x, a) in &self.boundary {
                f *= pair_factor(*w, *x, a * b);
            }
            for w2 in &ws[j + 1..] {
                f *= pair_factor(*w, *w2, b2);
            }
            for y in ys {
                f *= pair_factor(*w, *y, b2 / 2.0);
            }
        }
        for (k, y) in ys.iter().enumerate() {
            for (z, a) in &self.bulk {
                f *= pair_factor(*y, *z, a * b / 2.0);
            }
            for (x, a) in &self.boundary {
                f *= pair_factor(*y, *x, a * b / 2.0);
            }
            for y2 in &ys[k + 1..] {
                f *= pair_factor(*y, *y2, b2 / 4.0);
            }
        }
        f
    }

    /// Deterministic factor from the fixed insertions alone.
    pub fn fixed_factor(&self) -> f64 {
        let mut f = 1.0;
        let all: Vec<(Complex64, f64, bool)> = self
            .bulk
            .iter()
            .map(|(z, a)| (*z, *a, true))
            .chain(self.boundary.iter().map(|(x, a)| (*x, *a, false)))
            .collect();
        for (i, (u, a, is_bulk)) in all.iter().enumerate() {
            if *is_bulk {
                // e^{−a²W/2} with W = −log(1−|u|²)
                f *= (1.0 - u.norm_sqr()).powf(a * a / 2.0);
            }
            for (v, b, _) in &all[i + 1..] {
                f *= pair_factor(*u, *v, a * b);
            }
        }
        f
    }
}

/// Exponent checks shared by the mixed integral.
fn mixed_checks(p: u32, q: u32, alpha: f64, eta: f64, beta: f64) -> Result<Vec<DivergenceWarning>> {
    let mut warn = Vec::new();
    let mut check = |name: &str, v: f64, bound: f64| -> Result<()> {
        if v <= bound {
            return Err(Error::Divergence(format!("{name} = {v} <= {bound}")));
        }
        if v - bound < 0.05 {
            log::warn!("{name} = {v} is within 0.05 of the integrability bound {bound}");
            warn.push(DivergenceWarning { exponent: name.to_string(), value: v, boundary: bound });
        }
        Ok(())
    };
    if beta * beta >= 2.0 {
        return Err(Error::Divergence(format!("beta^2 = {} >= 2", beta * beta)));
    }
    if p > 0 {
        check("alpha*beta", alpha * beta, -2.0)?;
        check("eta*beta (bulk)", eta * beta, -2.0)?;
    }
    if q > 0 {
        check("eta*beta/2", eta * beta / 2.0, -1.0)?;
        check(
            "eta*beta/2 + (q-1)*beta^2/2",
            eta * beta / 2.0 + (q as f64 - 1.0) * beta * beta / 2.0,
            -1.0,
        )?;
    }
    Ok(warn)
}

/// Monte Carlo estimate of the mixed disk/boundary integral with a bulk
/// charge α at 0 and a boundary charge η at 1; Lebesgue area per bulk
/// point and arc length per boundary point.
pub fn mixed_integral_mc(
    p: u32,
    q: u32,
    alpha: f64,
    eta: f64,
    beta: f64,
    n_samples: u64,
    seed: u64,
) -> Result<MixedIntegral> {
    let warnings = mixed_checks(p, q, alpha, eta, beta)?;
    let gas = CoulombGas {
        beta,
        bulk: vec![(Complex64::new(0.0, 0.0), alpha)],
        boundary: vec![(Complex64::new(1.0, 0.0), eta / 2.0)],
    };
    let estimate = screening_mc(&gas, p, q, n_samples, seed);
    Ok(MixedIntegral { estimate, warnings })
}

/// Importance-sampled Monte Carlo of the screening integral of `gas`
/// (area measure for bulk points, arc length for boundary points).
///
/// Bulk points are drawn with radial density ∝ r^{1+γ} where γ is the
/// negative part of the exponent at the first bulk insertion placed at
/// the origin; boundary points with angular density ∝ |φ|^{γ'} around the
/// first boundary insertion.
pub fn screening_mc(gas: &CoulombGas, p: u32, q: u32, n_samples: u64, seed: u64) -> McEstimate {
    let b = gas.beta;
    let origin = gas.bulk.iter().find(|(z, _)| z.norm() < 1e-14).map(|(_, a)| *a);
    let gamma_w = origin.map(|a| (a * b).min(0.0)).unwrap_or(0.0);
    let anchor = gas.boundary.first().copied();
    let gamma_y = anchor.map(|(_, a)| (a * b).min(0.0)).unwrap_or(0.0);
    let x0 = anchor.map(|(x, _)| x / x.norm()).unwrap_or(Complex64::new(1.0, 0.0));
    let (pn, qn) = (p as usize, q as usize);
    estimate(n_samples, seed, |rng, _| {
        let mut ws = Vec::with_capacity(pn);
        let mut ys = Vec::with_capacity(qn);
        let mut weight = 1.0;
        for _ in 0..pn {
            let u: f64 = rng.random();
            let r = u.powf(1.0 / (2.0 + gamma_w));
            let th = TAU * rng.random::<f64>();
            ws.push(Complex64::from_polar(r, th));
            // area density (2+γ) r^γ / 2π
            weight *= TAU / ((2.0 + gamma_w) * r.powf(gamma_w));
        }
        for _ in 0..qn {
            let (phi, wi) = power_angle(rng, gamma_y);
            ys.push(x0 * Complex64::from_polar(1.0, phi));
            weight *= TAU * wi;
        }
        Complex64::new(weight * gas.screening_integrand(&ws, &ys), 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_gamma_examples() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        assert!((log_gamma(0.5).unwrap() - 0.572_364_942_924_700_1).abs() < 1e-14);
        assert!((log_gamma(5.0).unwrap() - 24f64.ln()).abs() < 1e-13);
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.0).is_err());
    }

    #[test]
    fn morris_small_cases() {
        assert_eq!(morris_closed_form(&MorrisParams { q: 0, a: 0.3, c: 0.25 }).unwrap(), 1.0);
        let m = morris_closed_form(&MorrisParams::from_charges(1, 0.0, 1.0)).unwrap();
        assert!((m - 1.0).abs() < 1e-14);
        let m = morris_closed_form(&MorrisParams::from_charges(2, 0.0, 1.0)).unwrap();
        let want = gamma(1.5).unwrap() / gamma(1.25).unwrap().powi(2);
        assert!((m - want).abs() < 1e-13);
        // q = 1, η = 2, β = 1: (1/2π)∫2 sin(θ/2) dθ = 4/π
        let m = morris_closed_form(&MorrisParams::from_charges(1, 2.0, 1.0)).unwrap();
        assert!((m - 4.0 / PI).abs() < 1e-13);
    }

    #[test]
    fn quadrature_backend_matches_closed_forms() {
        let v = selberg_quadrature(1, 1.0, 0.5, 256).unwrap();
        assert!((v - 4.0 / PI).abs() < 1e-12);
        let v = selberg_quadrature(2, 0.0, 0.5, 256).unwrap();
        let want = fyodorov_bouchaud(2, 1.0).unwrap();
        assert!(((v - want) / want).abs() < 1e-9, "{v} {want}");
    }

    #[test]
    fn mixed_single_bulk_point() {
        let r = mixed_integral_mc(1, 0, -1.0, 0.0, 1.0, 200_000, 11).unwrap();
        assert!(r.estimate.within(Complex64::new(PI * PI / 2.0, 0.0), 4.0));
        let r = mixed_integral_mc(0, 1, 0.0, 0.0, 1.0, 10, 1).unwrap();
        assert!((r.estimate.value.re - TAU).abs() < 1e-12);
    }

    #[test]
    fn divergence_detected() {
        assert!(matches!(mixed_integral_mc(1, 0, -2.5, 0.0, 1.0, 10, 1), Err(Error::Divergence(_))));
        let r = mixed_integral_mc(1, 0, -1.97, 0.0, 1.0, 10, 1).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }
}
