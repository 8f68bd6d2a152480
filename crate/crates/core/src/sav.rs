//! Scalar auxiliary variable: dissipation functional, the positive closed
//! form update of `r`, and the scaling factors `xi` and `eta`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SavParams {
    /// Relaxation rate.
    pub gamma: f64,
    /// Forcing weight.
    pub alpha: f64,
    /// Energy offset, at least 1.
    pub c_r: f64,
}

impl Default for SavParams {
    fn default() -> Self {
        Self { gamma: 0.01, alpha: 1e3, c_r: 1.0 }
    }
}

impl SavParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::ConfigValidation { field: "sav.gamma".into(), message: "must be positive".into() });
        }
        if !(self.alpha > 0.0) {
            return Err(Error::ConfigValidation { field: "sav.alpha".into(), message: "must be positive".into() });
        }
        if !(self.c_r >= 1.0) {
            return Err(Error::ConfigValidation { field: "sav.c_r".into(), message: "must be at least 1".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SavState {
    pub r: f64,
    pub xi: f64,
    pub eta: f64,
}

/// Quadratic quantities of one realization at the new level, already
/// integrated.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DissipationTerms {
    /// `nu ||grad u||^2`
    pub viscous: f64,
    /// `g ||sqrt(K) grad phi||^2`
    pub darcy: f64,
    /// `||sqrt(eta) u.tau||^2_Gamma`
    pub slip: f64,
    /// `(f_f, u) + (g f_p, phi)`
    pub work: f64,
    /// `||f_f||^2 + ||g f_p||^2`
    pub forcing_sq: f64,
    /// `||u||^2 + g S ||phi||^2`, i.e. twice the energy.
    pub mass: f64,
}

/// `D = viscous + darcy + slip - work + alpha/2 forcing_sq - gamma/2 mass`.
pub fn dissipation(t: &DissipationTerms, p: &SavParams) -> f64 {
    t.viscous + t.darcy + t.slip - t.work + 0.5 * p.alpha * t.forcing_sq - 0.5 * p.gamma * t.mass
}

/// Closed-form solution of the discrete auxiliary equation
///
/// `(r' - r) / dt + gamma r' = -r' D / (E + c_r) + alpha/2 F + gamma c_r + s`
///
/// where `F` is `forcing_sq` and `s` an optional extra source (zero for the
/// plain scheme).
pub fn update_r(r_n: f64, e_next: f64, d_next: f64, forcing_sq: f64, source: f64, p: &SavParams, dt: f64) -> Result<f64> {
    let denom = 1.0 + p.gamma * dt + dt * d_next / (e_next + p.c_r);
    if !(denom > 0.0) {
        return Err(Error::NonPositiveDenominator { denominator: denom, rho_max: None });
    }
    Ok((r_n + dt * (0.5 * p.alpha * forcing_sq + p.gamma * p.c_r + source)) / denom)
}

pub fn compute_xi(r: f64, e: f64, c_r: f64) -> f64 {
    r / (e + c_r)
}

pub fn compute_eta(xi: f64, k: usize) -> f64 {
    1.0 - (1.0 - xi).powi(k as i32 + 1)
}

/// `min(nu, g k_min) - (1/(2 alpha) + gamma/2 max(1, g S)) C_p^2`.
pub fn check_rho_max(p: &SavParams, nu: f64, g: f64, s_storage: f64, k_min: f64, poincare: f64) -> f64 {
    nu.min(g * k_min) - (0.5 / p.alpha + 0.5 * p.gamma * (g * s_storage).max(1.0)) * poincare * poincare
}
