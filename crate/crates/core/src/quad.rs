//! Quadrature rules: Gauss–Legendre, Gauss–Jacobi (Golub–Welsch) and
//! adaptive Gauss–Kronrod with breakpoints.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            let dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        // recompute derivative at the converged node
        let (mut p0, mut p1) = (1.0, z);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = if n > 1 { n as f64 * (z * p1 - p0) / (z * z - 1.0) } else { 1.0 };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (
        x.iter().map(|t| c + h * t).collect(),
        w.iter().map(|t| h * t).collect(),
    )
}

/// Gauss–Jacobi rule for the weight (1-x)^a (1+x)^b on [-1, 1].
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(a > -1.0 && b > -1.0) {
        return Err(Error::Domain(format!(
            "Jacobi exponents must exceed -1, got ({a}, {b})"
        )));
    }
    let ab = a + b;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for (k, d) in diag.iter_mut().enumerate() {
        let kf = k as f64;
        *d = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
    }
    for (j, o) in off.iter_mut().enumerate() {
        let k = (j + 1) as f64;
        let beta = if j == 0 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            4.0 * k * (k + a) * (k + b) * (k + ab)
                / ((2.0 * k + ab).powi(2) * (2.0 * k + ab + 1.0) * (2.0 * k + ab - 1.0))
        };
        *o = beta.sqrt();
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = off[i];
            m[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(m);
    let lmu0 = (ab + 1.0) * std::f64::consts::LN_2 + crate::coulomb::log_gamma(a + 1.0)?
        + crate::coulomb::log_gamma(b + 1.0)?
        - crate::coulomb::log_gamma(ab + 2.0)?;
    let mu0 = lmu0.exp();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(pairs.into_iter().unzip())
}

/// Gauss–Jacobi rule on [0, 1] for the weight t^p (1-t)^q.
pub fn gauss_jacobi_unit(n: usize, p: f64, q: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w) = gauss_jacobi(n, q, p)?;
    let scale = 0.5f64.powf(p + q + 1.0);
    Ok((
        x.iter().map(|t| 0.5 * (1.0 + t)).collect(),
        w.iter().map(|t| t * scale).collect(),
    ))
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over [a, b].
///
/// Subdivides until the summed error estimate is below
/// `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    integrate_with_breaks(&f, &[a, b], abs_tol, rel_tol)
}

struct Piece {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err.total_cmp(&o.err).is_eq()
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive integration over consecutive intervals given by sorted `pts`.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: &F,
    pts: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let mut heap = std::collections::BinaryHeap::new();
    let (mut total, mut err) = (0.0, 0.0);
    for w in pts.windows(2) {
        if w[1] > w[0] {
            let (val, e) = gk15(f, w[0], w[1]);
            total += val;
            err += e;
            heap.push(Piece { a: w[0], b: w[1], val, err: e });
        }
    }
    let max_intervals = 50_000;
    loop {
        if !total.is_finite() {
            return Err(Error::Quadrature("non-finite integrand".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        if heap.len() >= max_intervals {
            return Err(Error::Quadrature(format!(
                "adaptive rule exhausted {max_intervals} intervals (error {err:e})"
            )));
        }
        let p = heap.pop().expect("non-empty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            return Err(Error::Quadrature("interval underflow".into()));
        }
        let (v1, e1) = gk15(f, p.a, m);
        let (v2, e2) = gk15(f, m, p.b);
        total += v1 + v2 - p.val;
        err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, val: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, val: v2, err: e2 });
    }
    let mut pieces = heap.into_vec();
    pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
    let vals: Vec<f64> = pieces.iter().map(|p| p.val).collect();
    Ok(crate::mc::pairwise_sum(&vals))
}

/// Periodic trapezoid rule of `f` over [0, 2π) with `n` nodes.
pub fn trapezoid_periodic<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    let h = std::f64::consts::TAU / n as f64;
    let v: Vec<f64> = (0..n).map(|k| f(k as f64 * h)).collect();
    crate::mc::pairwise_sum(&v) * h
}

/// Wraps a fallible integrand: the first error is stored in `err` and the
/// point contributes 0.
pub(crate) fn guarded<'e, F: Fn(f64) -> Result<f64> + 'e>(
    err: &'e std::cell::RefCell<Option<Error>>,
    f: F,
) -> impl Fn(f64) -> f64 + 'e {
    move |x| match f(x) {
        Ok(v) => v,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            0.0
        }
    }
}

/// Returns the error stored by [`guarded`], if any.
pub(crate) fn take(err: &std::cell::RefCell<Option<Error>>) -> Result<()> {
    match err.borrow_mut().take() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_matches_beta_moments() {
        // ∫_0^1 t^p (1-t)^q t^2 dt = B(p+3, q+1)
        let (p, q) = (-0.5, 0.25);
        let (t, w) = gauss_jacobi_unit(40, p, q).unwrap();
        let s: f64 = t.iter().zip(&w).map(|(t, w)| w * t * t).sum();
        let lb = crate::coulomb::log_gamma(p + 3.0).unwrap() + crate::coulomb::log_gamma(q + 1.0).unwrap()
            - crate::coulomb::log_gamma(p + q + 4.0).unwrap();
        assert!((s - lb.exp()).abs() < 1e-13, "{s} vs {}", lb.exp());
    }

    #[test]
    fn jacobi_large_rule_sums_to_mass() {
        let (_, w) = gauss_jacobi(256, 0.5, 0.5).unwrap();
        let s: f64 = w.iter().sum();
        assert!((s - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn adaptive_handles_sqrt_singularity() {
        let v = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }
}
