use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Physics;
use crate::sav::SavParams;

/// How the first `k - 1` levels after the initial data are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Startup {
    /// Interpolate the analytic solution at `t = dt, ..., (k-1) dt`.
    ExactStart,
    /// One implicit-explicit Euler substep followed by second-order
    /// substeps of size about `dt^(k/2)`.
    #[default]
    Bootstrap,
}

/// Ensemble mode shares one pair of matrices; individual mode factors a
/// pair per realization with its own coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    #[default]
    Ensemble,
    Individual,
}

impl std::str::FromStr for SolveMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ensemble" => Ok(Self::Ensemble),
            "individual" => Ok(Self::Individual),
            _ => Err(format!("unknown mode '{s}' (expected ensemble or individual)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub j: usize,
    pub k: usize,
    pub beta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub physics: Physics,
    pub sav: SavParams,
    pub deg_u: usize,
    pub deg_p: usize,
    pub deg_phi: usize,
    pub seed: u64,
    pub startup: Startup,
    pub mode: SolveMode,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            j: 1,
            k: 2,
            beta: 3.0,
            dt: 1.0 / 32.0,
            t_end: 1.0,
            physics: Physics::default(),
            sav: SavParams::default(),
            deg_u: 2,
            deg_p: 1,
            deg_phi: 2,
            seed: 0,
            startup: Startup::default(),
            mode: SolveMode::default(),
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::ConfigValidation { field: field.into(), message: message.into() }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.j == 0 {
            return Err(invalid("ensemble.j", "must be at least 1"));
        }
        if !(2..=4).contains(&self.k) {
            return Err(invalid("scheme.k", "must be 2, 3 or 4"));
        }
        if !(self.beta >= 1.0) || !self.beta.is_finite() {
            return Err(invalid("scheme.beta", "must be finite and at least 1"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("scheme.dt", "must be positive"));
        }
        if !(self.t_end >= self.dt) {
            return Err(invalid("scheme.t_end", "must be at least dt"));
        }
        let p = &self.physics;
        for (name, v) in [("physics.nu", p.nu), ("physics.g", p.g), ("physics.s", p.s_storage), ("physics.alpha_bj", p.alpha_bj)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, "must be positive"));
            }
        }
        self.sav.validate()?;
        if self.deg_u != self.deg_p + 1 {
            return Err(invalid("elements.deg_u", "must equal deg_p + 1"));
        }
        for (name, d) in [("elements.deg_u", self.deg_u), ("elements.deg_p", self.deg_p), ("elements.deg_phi", self.deg_phi)] {
            if !(1..=3).contains(&d) {
                return Err(invalid(name, "must be 1, 2 or 3"));
            }
        }
        Ok(())
    }

    /// Number of time levels after the initial one, `round(T / dt)`.
    pub fn n_levels(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}
