//! Theory parameters, charge data and the exact spectral quantities
//! (background charge, central charge, conformal weights, neutrality).

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Tolerance on the distance of a real product to its lattice.
pub const LATTICE_TOL: f64 = 1e-9;

/// Distance of `x` to the lattice `step·ℤ`.
pub fn lattice_distance(x: f64, step: f64) -> f64 {
    let t = x / step;
    (t - t.round()).abs() * step
}

pub fn on_lattice(x: f64, step: f64) -> bool {
    lattice_distance(x, step) < LATTICE_TOL
}

/// Background charge Q = β/2 − 2/β.
pub fn background_charge(beta: f64) -> f64 {
    beta / 2.0 - 2.0 / beta
}

/// Central charge c_L = 1 − 6Q².
pub fn central_charge(q: f64) -> f64 {
    1.0 - 6.0 * q * q
}

/// Validated theory parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub beta: f64,
    pub q_charge: f64,
    pub radius: f64,
    pub mu: Complex64,
    pub mu_boundary: Complex64,
    pub has_corners: bool,
    pub has_boundary_potential: bool,
    /// Whether Q/β is rational (small denominators only); informational.
    pub rational_regime: bool,
}

/// Checks the coupling range and the compactification constraints.
pub fn validate_params(
    beta: f64,
    radius: f64,
    mu: Complex64,
    mu_boundary: Complex64,
    has_corners: bool,
) -> Result<ParamSet> {
    if !(beta > 0.0 && beta < std::f64::consts::SQRT_2) {
        return Err(Error::Domain(format!("beta = {beta} is outside (0, sqrt 2)")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!("radius = {radius} must be positive")));
    }
    let q = background_charge(beta);
    let has_boundary_potential = mu_boundary != Complex64::new(0.0, 0.0);
    let br = beta * radius;
    let br_step = if has_boundary_potential { 2.0 } else { 1.0 };
    if !on_lattice(br, br_step) {
        return Err(Error::Compactification(format!(
            "beta*R = {br} is not in {}Z",
            br_step as i64
        )));
    }
    let qr = q * radius;
    let qr_step = if has_corners { 4.0 } else { 2.0 };
    if !on_lattice(qr, qr_step) {
        return Err(Error::Compactification(format!(
            "Q*R = {qr} is not in {}Z",
            qr_step as i64
        )));
    }
    let rational_regime = is_small_rational(q / beta);
    if !rational_regime {
        log::warn!("Q/beta = {} does not look rational; outside the rational regime", q / beta);
    }
    Ok(ParamSet {
        beta,
        q_charge: q,
        radius,
        mu,
        mu_boundary,
        has_corners,
        has_boundary_potential,
        rational_regime,
    })
}

fn is_small_rational(x: f64) -> bool {
    (1..=10_000u32).any(|d| lattice_distance(x * d as f64, 1.0) < LATTICE_TOL * d as f64)
}

/// Bulk insertion: electric charge α, magnetic charge m and tangent angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkCharge {
    pub position: Complex64,
    pub alpha: f64,
    pub m: i64,
    pub tangent_angle: f64,
}

/// Boundary insertion of electric charge η.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCharge {
    pub position: Complex64,
    pub eta: f64,
}

/// Insertion data plus the pure degree n of the test functional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChargeConfig {
    pub bulk: Vec<BulkCharge>,
    pub boundary: Vec<BoundaryCharge>,
    pub extra_degree: i64,
}

impl ChargeConfig {
    pub fn alpha_sum(&self) -> f64 {
        self.bulk.iter().map(|c| c.alpha).sum()
    }

    pub fn eta_sum(&self) -> f64 {
        self.boundary.iter().map(|c| c.eta).sum()
    }

    /// Checks the charge hypotheses against `params`.
    pub fn validate(&self, params: &ParamSet) -> Result<()> {
        let (q, r) = (params.q_charge, params.radius);
        for c in &self.bulk {
            if c.alpha <= q {
                return Err(Error::Domain(format!("alpha = {} must exceed Q = {q}", c.alpha)));
            }
            if !on_lattice(c.alpha * r, 1.0) {
                return Err(Error::Compactification(format!("alpha*R = {} is not in Z", c.alpha * r)));
            }
        }
        for c in &self.boundary {
            if c.eta <= q {
                return Err(Error::Domain(format!("eta = {} must exceed Q = {q}", c.eta)));
            }
            if !on_lattice(c.eta * r, 2.0) {
                return Err(Error::Compactification(format!("eta*R = {} is not in 2Z", c.eta * r)));
            }
        }
        let total = (self.alpha_sum() + self.eta_sum() / 2.0) * r;
        if !on_lattice(total, 1.0) {
            return Err(Error::Compactification(format!(
                "sum alpha*R + sum eta*R/2 = {total} is not in Z"
            )));
        }
        for (i, a) in self.bulk.iter().enumerate() {
            if self.bulk[..i].iter().any(|b| (a.position - b.position).norm() < 1e-12) {
                return Err(Error::Domain("bulk positions must be distinct".into()));
            }
        }
        for (i, a) in self.boundary.iter().enumerate() {
            if self.boundary[..i].iter().any(|b| (a.position - b.position).norm() < 1e-12) {
                return Err(Error::Domain("boundary positions must be distinct".into()));
            }
        }
        Ok(())
    }
}

/// Conformal data of a pair of vertex operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Weights {
    pub delta_bulk: f64,
    pub delta_boundary: Option<f64>,
    pub c_l: f64,
}

pub fn delta_bulk(params: &ParamSet, alpha: f64, m: i64) -> f64 {
    let mr = m as f64 * params.radius;
    (alpha / 2.0) * (alpha / 2.0 - params.q_charge) + mr * mr / 4.0
}

pub fn delta_boundary(params: &ParamSet, eta: f64) -> f64 {
    (eta / 2.0) * (eta / 2.0 - params.q_charge)
}

pub fn conformal_weights(params: &ParamSet, alpha: f64, m: i64, eta: Option<f64>) -> Weights {
    Weights {
        delta_bulk: delta_bulk(params, alpha, m),
        delta_boundary: eta.map(|e| delta_boundary(params, e)),
        c_l: central_charge(params.q_charge),
    }
}

/// κ₀ = n/R + Σα + Ση/2 − Qχ, the charge imbalance before screening.
pub fn charge_imbalance(params: &ParamSet, charges: &ChargeConfig, euler_char: i64) -> f64 {
    charges.extra_degree as f64 / params.radius + charges.alpha_sum() + charges.eta_sum() / 2.0
        - params.q_charge * euler_char as f64
}

/// All (p, q) ≥ 0 with κ₀ + pβ + qβ/2 = 0, ordered by p.
pub fn neutrality_solutions(params: &ParamSet, charges: &ChargeConfig, euler_char: i64) -> Vec<(u32, u32)> {
    let kappa = charge_imbalance(params, charges, euler_char);
    // p + q/2 = t
    let t = -kappa / params.beta;
    let two_t = 2.0 * t;
    if two_t < -LATTICE_TOL || !on_lattice(two_t, 1.0) {
        return Vec::new();
    }
    let two_t = two_t.round().max(0.0) as u32;
    (0..=two_t / 2).map(|p| (p, two_t - 2 * p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c0() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn c1() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn bulk(alphas: &[f64]) -> ChargeConfig {
        ChargeConfig {
            bulk: alphas
                .iter()
                .enumerate()
                .map(|(i, a)| BulkCharge {
                    position: Complex64::new(0.1 * i as f64, 0.0),
                    alpha: *a,
                    m: 0,
                    tangent_angle: 0.0,
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn beta_one_radius_four() {
        let p = validate_params(1.0, 4.0, c0(), c1(), false).unwrap();
        assert_eq!(p.q_charge, -1.5);
        assert!(p.has_boundary_potential);
    }

    #[test]
    fn self_dual_point() {
        let b = 2.0 / 3f64.sqrt();
        let p = validate_params(b, 3f64.sqrt(), c0(), c1(), false).unwrap();
        assert!((p.q_charge + b).abs() < 1e-14);
        assert!((p.q_charge * p.radius + 2.0).abs() < 1e-12);
    }

    #[test]
    fn parity_violation() {
        let e = validate_params(1.0, 3.0, c0(), c1(), false).unwrap_err();
        assert!(matches!(e, Error::Compactification(ref s) if s.contains("beta*R")));
    }

    #[test]
    fn corners_need_qr_in_4z() {
        // QR = -6 is in 2Z but not 4Z
        assert!(validate_params(1.0, 4.0, c0(), c1(), true).is_err());
        assert!(validate_params(1.0, 8.0, c0(), c1(), true).is_ok());
    }

    #[test]
    fn beta_out_of_range() {
        assert!(matches!(validate_params(1.5, 4.0, c0(), c1(), false), Err(Error::Domain(_))));
        assert!(matches!(validate_params(0.0, 4.0, c0(), c1(), false), Err(Error::Domain(_))));
    }

    #[test]
    fn weights_examples() {
        let p = validate_params(1.0, 4.0, c0(), c1(), false).unwrap();
        let w = conformal_weights(&p, 0.0, 0, None);
        assert_eq!(w.delta_bulk, 0.0);
        let w = conformal_weights(&p, -1.0, 0, Some(0.0));
        assert!((w.delta_bulk + 0.5).abs() < 1e-15);
        assert!((w.c_l + 12.5).abs() < 1e-12);
        assert_eq!(w.delta_boundary, Some(0.0));
        let reflected = delta_bulk(&p, 2.0 * p.q_charge + 1.0, 0);
        assert!((reflected + 0.5).abs() < 1e-15);
    }

    #[test]
    fn neutrality_examples() {
        let p = validate_params(1.0, 4.0, c0(), c1(), false).unwrap();
        assert_eq!(neutrality_solutions(&p, &bulk(&[-1.0, -1.0]), 1), vec![(0, 1)]);
        assert_eq!(neutrality_solutions(&p, &bulk(&[-2.0]), 1), vec![(0, 1)]);
        assert!(neutrality_solutions(&p, &bulk(&[0.0]), 1).is_empty());
        // p + q/2 = 3/2 with three charges of -1
        assert_eq!(
            neutrality_solutions(&p, &bulk(&[-1.0, -1.0, -1.0]), 1),
            vec![(0, 3), (1, 1)]
        );
    }
}
