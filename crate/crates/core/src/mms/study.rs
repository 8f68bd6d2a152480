//! Spatial/temporal convergence drivers for the manufactured problem.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::system::l2_norm;
use crate::fem::{Conductivity, Discretization};
use crate::mesh::build_coupled_rect_mesh;
use crate::mms::{error_norms, exact_solution, mms_inputs};
use crate::scheme::{run, EnsembleConfig, RealizationState, StepReport};

/// One grid point of a study for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    /// `h` for spatial studies, `dt` for temporal ones.
    pub param: f64,
    pub realization: usize,
    pub err_u: f64,
    pub err_p: f64,
    pub err_phi: f64,
    pub rate_u: Option<f64>,
    pub rate_p: Option<f64>,
    pub rate_phi: Option<f64>,
    /// `max_n |1 - xi^n|` over the run.
    pub xi_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub param_name: &'static str,
    pub rows: Vec<ErrorRow>,
}

impl StudyTable {
    pub fn realizations(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.rows.iter().map(|r| r.realization).collect();
        r.sort_unstable();
        r.dedup();
        r
    }

    pub fn rows_for(&self, realization: usize) -> Vec<&ErrorRow> {
        self.rows.iter().filter(|r| r.realization == realization).collect()
    }

    /// All computed rates of one field (`"u"`, `"p"` or `"phi"`).
    pub fn rates(&self, field: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| match field {
                "u" => r.rate_u,
                "p" => r.rate_p,
                _ => r.rate_phi,
            })
            .collect()
    }
}

fn rate(prev: Option<(f64, f64)>, param: f64, err: f64) -> Option<f64> {
    prev.map(|(p0, e0)| (e0 / err).ln() / (p0 / param).ln())
}

fn fill_rates(rows: &mut [ErrorRow]) {
    let mut reals: Vec<usize> = rows.iter().map(|r| r.realization).collect();
    reals.sort_unstable();
    reals.dedup();
    for j in reals {
        let mut prev: Option<&ErrorRow> = None;
        let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].realization == j).collect();
        let mut updates = Vec::new();
        for &i in &idx {
            let r = &rows[i];
            let (ru, rp, rphi) = match prev {
                Some(p) => (
                    rate(Some((p.param, p.err_u)), r.param, r.err_u),
                    rate(Some((p.param, p.err_p)), r.param, r.err_p),
                    rate(Some((p.param, p.err_phi)), r.param, r.err_phi),
                ),
                None => (None, None, None),
            };
            updates.push((i, ru, rp, rphi));
            prev = Some(r);
        }
        for (i, ru, rp, rphi) in updates {
            rows[i].rate_u = ru;
            rows[i].rate_p = rp;
            rows[i].rate_phi = rphi;
        }
    }
}

fn check_monotone(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() || v.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidSpec(format!("{what} grid must be non-empty and strictly decreasing")));
    }
    Ok(())
}

struct RunResult {
    disc: Arc<Discretization>,
    states: Vec<RealizationState>,
    xi_dev: Vec<f64>,
    t_final: f64,
}

fn run_mms(cfg: &EnsembleConfig, n: usize, ks: &[Conductivity], energy_balance: bool) -> Result<RunResult> {
    let disc = Arc::new(Discretization::new(build_coupled_rect_mesh(n)?, cfg.deg_u, cfg.deg_p, cfg.deg_phi)?);
    let inputs = mms_inputs(&disc, &cfg.physics, ks, cfg.sav, energy_balance)?;
    let mut xi_dev = vec![0.0f64; ks.len()];
    let mut obs = |rep: &StepReport<'_>| {
        for (&j, d) in rep.members.iter().zip(rep.diagnostics) {
            xi_dev[j] = xi_dev[j].max((1.0 - d.xi).abs());
        }
    };
    let out = run(cfg, &disc, &inputs, Some(&mut obs))?;
    Ok(RunResult { disc, states: out.states, xi_dev, t_final: out.t_final })
}

/// Errors against the analytic solution with `dt = h = 1/n` for each `n`.
/// `cfg.j` is taken from `ks`.
pub fn convergence_study(cfg: &EnsembleConfig, ns: &[usize], ks: &[Conductivity], energy_balance: bool) -> Result<StudyTable> {
    let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    check_monotone(&hs, "mesh")?;
    let ex = exact_solution();
    let mut rows = Vec::new();
    for (&n, &h) in ns.iter().zip(&hs) {
        let cfg = EnsembleConfig { j: ks.len(), dt: h, ..cfg.clone() };
        let res = run_mms(&cfg, n, ks, energy_balance)?;
        for (j, st) in res.states.iter().enumerate() {
            let (eu, ep, ephi) = error_norms(&res.disc, &ex, st.velocity(), st.pressure(), st.head(), res.t_final);
            rows.push(ErrorRow {
                param: h,
                realization: j,
                err_u: eu,
                err_p: ep,
                err_phi: ephi,
                rate_u: None,
                rate_p: None,
                rate_phi: None,
                xi_deviation: res.xi_dev[j],
            });
        }
    }
    fill_rates(&mut rows);
    Ok(StudyTable { param_name: "h", rows })
}

/// Errors at a fixed mesh `1/n` against a reference run at `dt_ref`, so
/// the spatial error cancels.
pub fn temporal_refinement_study(
    cfg: &EnsembleConfig,
    n: usize,
    dts: &[f64],
    dt_ref: f64,
    ks: &[Conductivity],
    energy_balance: bool,
) -> Result<StudyTable> {
    check_monotone(dts, "time step")?;
    if !(dt_ref < *dts.last().expect("checked non-empty")) {
        return Err(Error::InvalidSpec("reference time step must be below the grid".into()));
    }
    let base = EnsembleConfig { j: ks.len(), ..cfg.clone() };
    let reference = run_mms(&EnsembleConfig { dt: dt_ref, ..base.clone() }, n, ks, energy_balance)?;
    let disc = &reference.disc;
    let (m_f, m_p, m_phi) = (disc.velocity_mass(), disc.pressure_mass(), disc.head_mass());
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
    let mut rows = Vec::new();
    for &dt in dts {
        let res = run_mms(&EnsembleConfig { dt, ..base.clone() }, n, ks, energy_balance)?;
        if (res.t_final - reference.t_final).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!("time step {dt} does not divide the final time")));
        }
        for (j, (st, rf)) in res.states.iter().zip(&reference.states).enumerate() {
            rows.push(ErrorRow {
                param: dt,
                realization: j,
                err_u: l2_norm(&m_f, &diff(st.velocity(), rf.velocity())),
                err_p: l2_norm(&m_p, &diff(st.pressure(), rf.pressure())),
                err_phi: l2_norm(&m_phi, &diff(st.head(), rf.head())),
                rate_u: None,
                rate_p: None,
                rate_phi: None,
                xi_deviation: res.xi_dev[j],
            });
        }
    }
    fill_rates(&mut rows);
    Ok(StudyTable { param_name: "dt", rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_from_halving() {
        let mk = |param: f64, e: f64| ErrorRow {
            param,
            realization: 0,
            err_u: e,
            err_p: e,
            err_phi: e,
            rate_u: None,
            rate_p: None,
            rate_phi: None,
            xi_deviation: 0.0,
        };
        let mut rows = vec![mk(0.5, 1.0), mk(0.25, 0.25), mk(0.125, 0.0625)];
        fill_rates(&mut rows);
        assert_eq!(rows[0].rate_u, None);
        assert!((rows[1].rate_u.unwrap() - 2.0).abs() < 1e-12);
        assert!((rows[2].rate_phi.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn grids_must_decrease() {
        assert!(check_monotone(&[0.1, 0.2], "x").is_err());
        assert!(check_monotone(&[], "x").is_err());
        assert!(check_monotone(&[0.2, 0.1], "x").is_ok());
    }
}
