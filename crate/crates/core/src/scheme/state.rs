use crate::error::{Error, Result};
use crate::sav::SavState;
use crate::tableau::GbdfTableau;

/// Newest-first histories of one realization.
///
/// `ubar`/`phibar` are the unscaled solutions of the linear solves, `u`/`phi`
/// the scaled ones.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationState {
    pub ubar: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub phibar: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub sav: SavState,
    pub level: usize,
}

/// Fields produced at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub ubar: Vec<f64>,
    pub u: Vec<f64>,
    pub phibar: Vec<f64>,
    pub phi: Vec<f64>,
    pub p: Vec<f64>,
    pub sav: SavState,
}

impl RealizationState {
    pub fn from_level(level: Level) -> Self {
        Self {
            ubar: vec![level.ubar],
            u: vec![level.u],
            phibar: vec![level.phibar],
            phi: vec![level.phi],
            p: vec![level.p],
            sav: level.sav,
            level: 0,
        }
    }

    /// Pushes a new level, keeping at most `depth` entries.
    pub fn push(&mut self, level: Level, depth: usize) {
        fn rot(h: &mut Vec<Vec<f64>>, v: Vec<f64>, depth: usize) {
            h.insert(0, v);
            h.truncate(depth);
        }
        rot(&mut self.ubar, level.ubar, depth);
        rot(&mut self.u, level.u, depth);
        rot(&mut self.phibar, level.phibar, depth);
        rot(&mut self.phi, level.phi, depth);
        rot(&mut self.p, level.p, depth);
        self.sav = level.sav;
        self.level += 1;
    }

    pub fn depth(&self) -> usize {
        self.ubar.len()
    }

    pub fn velocity(&self) -> &[f64] {
        &self.u[0]
    }

    pub fn head(&self) -> &[f64] {
        &self.phi[0]
    }

    pub fn pressure(&self) -> &[f64] {
        &self.p[0]
    }
}

/// Pressure at the new level from the aggregate `X = B(p^{n+1})`:
/// `p^{n+1} = (X - sum_{i>=1} b_i p^{n+1-i}) / b_0`.
pub fn recover_pressure<V: AsRef<[f64]>>(x: &[f64], p_history: &[V], t: &GbdfTableau) -> Result<Vec<f64>> {
    let b0 = t.b0();
    if b0 == 0.0 || !b0.is_finite() {
        return Err(Error::ZeroLeadingCoefficient);
    }
    let tail = t.b_tail(p_history)?;
    let tail = if tail.is_empty() { vec![0.0; x.len()] } else { tail };
    if tail.len() != x.len() {
        return Err(Error::DimensionMismatch(format!("pressure aggregate {} vs history {}", x.len(), tail.len())));
    }
    Ok(x.iter().zip(&tail).map(|(a, b)| (a - b) / b0).collect())
}
