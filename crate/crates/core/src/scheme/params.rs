use log::warn;

use crate::error::Result;
use crate::fem::{Conductivity, Discretization, Physics, SymTensor};
use crate::stochastic::mean_fields;
use crate::tableau::GbdfTableau;

/// Spread of the ensemble coefficients relative to their means, against
/// the bounds `2 tau / 3` (slip) and `tau / 3` (conductivity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterReport {
    pub eta_spread: f64,
    pub eta_mean_min: f64,
    pub eta_ratio: f64,
    pub eta_bound: f64,
    pub k_spread: f64,
    pub k_mean_min: f64,
    pub k_ratio: f64,
    pub k_bound: f64,
}

impl ParameterReport {
    pub fn eta_ok(&self) -> bool {
        self.eta_ratio < self.eta_bound
    }

    pub fn k_ok(&self) -> bool {
        self.k_ratio < self.k_bound
    }

    pub fn satisfied(&self) -> bool {
        self.eta_ok() && self.k_ok()
    }
}

fn spectral_radius(t: &SymTensor) -> f64 {
    t.min_eigenvalue().abs().max(t.scale(-1.0).min_eigenvalue().abs())
}

/// Evaluates both ratios over the quadrature points of the porous region and
/// the interface. Only warns; a violated condition does not stop a run.
pub fn check_parameter_condition(
    disc: &Discretization,
    ks: &[Conductivity],
    physics: &Physics,
    t: &GbdfTableau,
) -> Result<ParameterReport> {
    let means = mean_fields(ks, physics)?;
    let mut k_spread = 0.0f64;
    let mut k_mean_min = f64::INFINITY;
    for geom in &disc.porous_geom {
        for r in &disc.rule.points {
            let x = geom.map(*r);
            let kbar = means.kbar.at(x);
            k_mean_min = k_mean_min.min(kbar.min_eigenvalue());
            for k in ks {
                k_spread = k_spread.max(spectral_radius(&k.at(x).sub(&kbar)));
            }
        }
    }
    let mut eta_spread = 0.0f64;
    let mut eta_mean_min = f64::INFINITY;
    for q in &disc.interface {
        for &x in &q.points {
            let ebar = means.etabar.at(x, q.tangent);
            eta_mean_min = eta_mean_min.min(ebar);
            for e in &means.etas {
                eta_spread = eta_spread.max((e.at(x, q.tangent) - ebar).abs());
            }
        }
    }
    let report = ParameterReport {
        eta_spread,
        eta_mean_min,
        eta_ratio: eta_spread / eta_mean_min,
        eta_bound: 2.0 * t.tau / 3.0,
        k_spread,
        k_mean_min,
        k_ratio: k_spread / k_mean_min,
        k_bound: t.tau / 3.0,
    };
    if !report.eta_ok() {
        warn!("slip coefficient spread {:.4} exceeds {:.4}", report.eta_ratio, report.eta_bound);
    }
    if !report.k_ok() {
        warn!("conductivity spread {:.4} exceeds {:.4}", report.k_ratio, report.k_bound);
    }
    Ok(report)
}
