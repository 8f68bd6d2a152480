use std::sync::Arc;
use std::time::Instant;

use log::{debug, info};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::system::{energy, l2_norm};
use crate::fem::{Conductivity, Discretization, Physics, SharedMatrices, SystemMatrices};
use crate::sav::{compute_eta, compute_xi, dissipation, update_r, DissipationTerms, SavState};
use crate::scheme::config::{EnsembleConfig, SolveMode, Startup};
use crate::scheme::input::{RealizationInput, ScalarTimeFn, VelocityBoundary};
use crate::scheme::operators::FactoredPair;
use crate::scheme::state::{recover_pressure, Level, RealizationState};
use crate::sparse::{factorization_count, CsrMatrix};
use crate::stochastic::mean_fields;
use crate::tableau::{make_tableau, GbdfTableau};

/// Seconds spent per phase, summed over the run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub assembly: f64,
    pub factorization: f64,
    pub startup: f64,
    pub rhs: f64,
    pub solve: f64,
    pub update: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunStats {
    /// Time levels computed by the scheme per realization, bootstrap levels
    /// included.
    pub steps: usize,
    /// Factorizations of the main step operators.
    pub factorizations: usize,
    /// Factorizations used only while bootstrapping.
    pub startup_factorizations: usize,
    pub timings: PhaseTimings,
    pub wall: f64,
}

/// Per-realization scalars at one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub energy: f64,
    pub u_norm: f64,
    pub phi_norm: f64,
    pub r: f64,
    pub xi: f64,
    pub eta: f64,
}

/// Snapshot handed to observers after every time level. `states` and
/// `diagnostics` are ordered like `members`.
#[derive(Debug)]
pub struct StepReport<'a> {
    pub level: usize,
    pub t: f64,
    pub members: &'a [usize],
    pub states: &'a [RealizationState],
    pub diagnostics: &'a [Diagnostics],
}

#[derive(Debug)]
pub struct RunOutput {
    /// Final states indexed by realization.
    pub states: Vec<RealizationState>,
    pub stats: RunStats,
    pub t_final: f64,
}

pub type Observer<'o> = &'o mut dyn FnMut(&StepReport<'_>);

/// Realizations sharing one pair of coefficient matrices.
struct Group {
    members: Vec<usize>,
    sm: SystemMatrices,
    fluct_k: Vec<Option<CsrMatrix>>,
    fluct_eta: Vec<Option<CsrMatrix>>,
}

fn build_group(
    disc: &Discretization,
    shared: &SharedMatrices,
    physics: &Physics,
    inputs: &[RealizationInput],
    members: Vec<usize>,
) -> Result<Group> {
    let ks: Vec<Conductivity> = members.iter().map(|&j| inputs[j].conductivity.clone()).collect();
    let means = mean_fields(&ks, physics)?;
    let sm = shared.with_means(disc, physics, &means.kbar, &means.etabar)?;
    let m = members.len();
    if m == 1 {
        return Ok(Group { members, sm, fluct_k: vec![None], fluct_eta: vec![None] });
    }
    let fluct_k = ks
        .par_iter()
        .map(|k| {
            let diff = k.minus(&means.kbar);
            match diff.as_constant() {
                Some(t) if t.is_zero() => None,
                _ => Some(shared.head_stiffness(disc, &diff, physics)),
            }
        })
        .collect();
    let fluct_eta = means
        .etas
        .par_iter()
        .map(|e| {
            let diff = e.minus(&means.etabar);
            match diff.as_constant() {
                Some(c) if c == 0.0 => Ok(None),
                _ => shared.tangential(disc, &diff).map(Some),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Group { members, sm, fluct_k, fluct_eta })
}

fn quad(m: &CsrMatrix, x: &[f64]) -> f64 {
    dot(x, &m.matvec(x))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub_assign(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x -= y;
    }
}

fn velocity_lift(disc: &Discretization, bc: &VelocityBoundary, t: f64) -> Vec<f64> {
    let n = disc.spaces.n_velocity();
    match bc {
        VelocityBoundary::Zero => vec![0.0; n],
        VelocityBoundary::Values(v) => v.to_vec(),
        VelocityBoundary::Function(f) => {
            let sp = &disc.spaces.velocity;
            let ns = sp.n_dofs();
            let mut out = vec![0.0; n];
            for i in (0..ns).filter(|&i| sp.constrained[i]) {
                let v = f(t, sp.dof_coords[i]);
                out[i] = v[0];
                out[ns + i] = v[1];
            }
            out
        }
    }
}

fn head_lift(disc: &Discretization, bc: &Option<ScalarTimeFn>, t: f64) -> Vec<f64> {
    let sp = &disc.spaces.head;
    let mut out = vec![0.0; sp.n_dofs()];
    if let Some(f) = bc {
        for i in (0..sp.n_dofs()).filter(|&i| sp.constrained[i]) {
            out[i] = f(t, sp.dof_coords[i]);
        }
    }
    out
}

fn diagnostics(sm: &SystemMatrices, physics: &Physics, st: &RealizationState) -> Diagnostics {
    let (u, phi) = (st.velocity(), st.head());
    let gs = physics.g * physics.s_storage;
    Diagnostics {
        energy: energy(sm, u, phi),
        u_norm: l2_norm(&sm.m_f, u),
        phi_norm: (quad(&sm.m_p, phi) / gs).max(0.0).sqrt(),
        r: st.sav.r,
        xi: st.sav.xi,
        eta: st.sav.eta,
    }
}

struct Prepared {
    ns_rhs: Vec<f64>,
    darcy_rhs: Vec<f64>,
    u_lift: Vec<f64>,
    phi_lift: Vec<f64>,
}

/// Momentum forcing load at `t_n + beta dt`, and load with squared norm at
/// `t_n + dt`.
struct SharedForcing {
    at_beta: Vec<f64>,
    at_next: (Vec<f64>, f64),
}

/// Everything one step needs besides the realization's own data.
struct Kernel<'a> {
    disc: &'a Discretization,
    sm: &'a SystemMatrices,
    tab: &'a GbdfTableau,
    pair: &'a FactoredPair,
    physics: Physics,
    dt: f64,
}

impl Kernel<'_> {
    fn prepare(
        &self,
        inp: &RealizationInput,
        fk: Option<&CsrMatrix>,
        feta: Option<&CsrMatrix>,
        shared: Option<&SharedForcing>,
        st: &RealizationState,
        t_n: f64,
    ) -> Result<Prepared> {
        let (d, sm, tab, dt) = (self.disc, self.sm, self.tab, self.dt);
        let k = tab.k;
        let g = self.physics.g;
        let tb = t_n + tab.beta * dt;
        let t1 = t_n + dt;
        let c_u = tab.eval_c(&st.ubar[..k])?;
        let c_phi = tab.eval_c(&st.phibar[..k])?;
        let abar_u = tab.eval_abar(&st.u[..k])?;
        let abar_phi = tab.eval_abar(&st.phi[..k])?;
        let n_u = d.spaces.n_velocity();
        let n_phi = d.spaces.n_head();
        let mut tail_u = tab.b_tail(&st.ubar)?;
        tail_u.resize(n_u, 0.0);
        let mut tail_phi = tab.b_tail(&st.phibar)?;
        tail_phi.resize(n_phi, 0.0);

        let mut mom = match (shared, &inp.f_f) {
            (Some(sf), _) => sf.at_beta.clone(),
            (None, Some(f)) => d.velocity_load(&|x| f(tb, x)),
            (None, None) => vec![0.0; n_u],
        };
        sm.m_f.matvec_add(-1.0 / dt, &abar_u, &mut mom);
        sm.a_f.matvec_add(-1.0, &tail_u, &mut mom);
        sm.s_bjs_mean.matvec_add(-1.0, &tail_u, &mut mom);
        sub_assign(&mut mom, &d.convection_rhs(&c_u));
        if let Some(f) = feta {
            f.matvec_add(-1.0, &c_u, &mut mom);
        }
        sm.c_gamma.matvec_add(-1.0, &c_phi, &mut mom);
        if let Some(src) = &inp.interface_sources {
            let l = d.interface_velocity_load(&|x, n, tau| [(src.normal_stress)(tb, x, n, tau), (src.slip)(tb, x, n, tau)]);
            sub_assign(&mut mom, &l);
        }
        let mut cont = vec![0.0; d.spaces.n_pressure()];
        sm.b_div.matvec_add(1.0 / tab.b0(), &tail_u, &mut cont);

        let mut darcy = match &inp.f_p {
            Some(f) => d.head_load(&|x| g * f(tb, x)),
            None => vec![0.0; n_phi],
        };
        sm.m_p.matvec_add(-1.0 / dt, &abar_phi, &mut darcy);
        sm.a_p_mean.matvec_add(-1.0, &tail_phi, &mut darcy);
        if let Some(f) = fk {
            f.matvec_add(-1.0, &c_phi, &mut darcy);
        }
        sm.c_gamma.matvec_transpose_add(1.0, &c_u, &mut darcy);
        if let Some(src) = &inp.interface_sources {
            let l = d.interface_head_load(&|x, n| g * (src.mass)(tb, x, n, [-n[1], n[0]]));
            sub_assign(&mut darcy, &l);
        }

        let u_lift = velocity_lift(d, &inp.velocity_bc, t1);
        let phi_lift = head_lift(d, &inp.head_bc, t1);
        Ok(Prepared {
            ns_rhs: self.pair.ns.reduce_rhs(&mom, &cont, &u_lift),
            darcy_rhs: self.pair.darcy.reduce_rhs(&darcy, &phi_lift),
            u_lift,
            phi_lift,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        inp: &RealizationInput,
        fk: Option<&CsrMatrix>,
        feta: Option<&CsrMatrix>,
        shared: Option<&SharedForcing>,
        st: &RealizationState,
        prep: &Prepared,
        ns_sol: &[f64],
        darcy_sol: &[f64],
        t_n: f64,
    ) -> Result<Level> {
        let (d, sm, dt) = (self.disc, self.sm, self.dt);
        let g = self.physics.g;
        let t1 = t_n + dt;
        let (ubar, x) = self.pair.ns.expand(ns_sol, &prep.u_lift);
        let p = recover_pressure(&x, &st.p, self.tab)?;
        let phibar = self.pair.darcy.expand(darcy_sol, &prep.phi_lift);

        let e = energy(sm, &ubar, &phibar);
        let mut terms = DissipationTerms {
            viscous: quad(&sm.a_f, &ubar),
            darcy: quad(&sm.a_p_mean, &phibar) + fk.map_or(0.0, |f| quad(f, &phibar)),
            slip: quad(&sm.s_bjs_mean, &ubar) + feta.map_or(0.0, |f| quad(f, &ubar)),
            mass: 2.0 * e,
            ..Default::default()
        };
        let own;
        let forcing = match (shared, &inp.f_f) {
            (Some(sf), _) => Some(&sf.at_next),
            (None, Some(f)) => {
                own = d.velocity_load_with_norm(&|x| f(t1, x));
                Some(&own)
            }
            (None, None) => None,
        };
        if let Some((l, n2)) = forcing {
            terms.work += dot(l, &ubar);
            terms.forcing_sq += n2;
        }
        if let Some(f) = &inp.f_p {
            let (l, n2) = d.head_load_with_norm(&|x| f(t1, x));
            terms.work += g * dot(&l, &phibar);
            terms.forcing_sq += g * g * n2;
        }
        let dis = dissipation(&terms, &inp.sav);
        let source = inp.sav_source.as_ref().map_or(0.0, |s| s(t1));
        let r = update_r(st.sav.r, e, dis, terms.forcing_sq, source, &inp.sav, dt)?;
        let xi = compute_xi(r, e, inp.sav.c_r);
        let eta = compute_eta(xi, self.tab.k);
        let u = ubar.iter().map(|v| eta * v).collect();
        let phi = phibar.iter().map(|v| eta * v).collect();
        Ok(Level { ubar, u, phibar, phi, p, sav: SavState { r, xi, eta } })
    }

    /// Momentum forcing loads computed once for the group when every member
    /// carries the same forcing.
    fn shared_forcing(&self, group: &Group, inputs: &[RealizationInput], t_n: f64) -> Option<SharedForcing> {
        let first = inputs[group.members[0]].f_f.as_ref()?;
        if !group.members.iter().all(|&m| inputs[m].f_f.as_ref().is_some_and(|f| Arc::ptr_eq(f, first))) {
            return None;
        }
        let (tb, t1) = (t_n + self.tab.beta * self.dt, t_n + self.dt);
        let (at_beta, at_next) = rayon::join(
            || self.disc.velocity_load(&|x| first(tb, x)),
            || self.disc.velocity_load_with_norm(&|x| first(t1, x)),
        );
        Some(SharedForcing { at_beta, at_next })
    }

    /// Advances every state of the group by one step from `t_n`.
    fn advance(
        &self,
        group: &Group,
        inputs: &[RealizationInput],
        states: &mut [RealizationState],
        t_n: f64,
        depth: usize,
        timings: &mut PhaseTimings,
    ) -> Result<()> {
        let t0 = Instant::now();
        let shared = self.shared_forcing(group, inputs, t_n);
        let prepared = (0..states.len())
            .into_par_iter()
            .map(|i| {
                let inp = &inputs[group.members[i]];
                let (fk, feta) = (group.fluct_k[i].as_ref(), group.fluct_eta[i].as_ref());
                self.prepare(inp, fk, feta, shared.as_ref(), &states[i], t_n)
            })
            .collect::<Result<Vec<_>>>()?;
        timings.rhs += t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let ns_rhs: Vec<&[f64]> = prepared.iter().map(|p| p.ns_rhs.as_slice()).collect();
        let darcy_rhs: Vec<&[f64]> = prepared.iter().map(|p| p.darcy_rhs.as_slice()).collect();
        let (ns_sol, darcy_sol) = rayon::join(
            || solve_batched(&self.pair.ns_fact, &ns_rhs),
            || solve_batched(&self.pair.darcy_fact, &darcy_rhs),
        );
        let (ns_sol, darcy_sol) = (ns_sol?, darcy_sol?);
        timings.solve += t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let levels = (0..states.len())
            .into_par_iter()
            .map(|i| {
                let inp = &inputs[group.members[i]];
                let (fk, feta) = (group.fluct_k[i].as_ref(), group.fluct_eta[i].as_ref());
                self.finish(inp, fk, feta, shared.as_ref(), &states[i], &prepared[i], &ns_sol[i], &darcy_sol[i], t_n)
            })
            .collect::<Result<Vec<_>>>()?;
        for (st, lv) in states.iter_mut().zip(levels) {
            st.push(lv, depth);
        }
        timings.update += t0.elapsed().as_secs_f64();
        Ok(())
    }
}

const SOLVE_CHUNK: usize = 8;

/// Multi right-hand-side solve, in parallel chunks of columns. Each column
/// is solved with the same arithmetic whatever its position.
fn solve_batched(fact: &crate::sparse::Factorization, rhs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let chunks = rhs
        .par_chunks(SOLVE_CHUNK)
        .map(|c| fact.solve_many(&c.iter().map(|r| r.to_vec()).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn emit(
    observer: &mut Option<Observer<'_>>,
    sm: &SystemMatrices,
    physics: &Physics,
    members: &[usize],
    states: &[RealizationState],
    level: usize,
    dt: f64,
) {
    if let Some(obs) = observer.as_mut() {
        let diags: Vec<Diagnostics> = states.par_iter().map(|s| diagnostics(sm, physics, s)).collect();
        obs(&StepReport { level, t: level as f64 * dt, members, states, diagnostics: &diags });
    }
}

fn initial_level(disc: &Discretization, sm: &SystemMatrices, inp: &RealizationInput) -> Level {
    let u = disc.interpolate_velocity(&|x| (inp.u0)(x));
    let phi = disc.interpolate_head(&|x| (inp.phi0)(x));
    let p = match &inp.exact {
        Some(ex) => disc.interpolate_pressure(&|x| ex.p(0.0, x)),
        None => vec![0.0; disc.spaces.n_pressure()],
    };
    let r = energy(sm, &u, &phi) + inp.sav.c_r;
    Level { ubar: u.clone(), u, phibar: phi.clone(), phi, p, sav: SavState { r, xi: 1.0, eta: 1.0 } }
}

fn exact_level(disc: &Discretization, sm: &SystemMatrices, inp: &RealizationInput, t: f64) -> Result<Level> {
    let ex = inp.exact.as_ref().ok_or(Error::MissingAnalyticSolution)?;
    let u = disc.interpolate_velocity(&|x| ex.u(t, x));
    let phi = disc.interpolate_head(&|x| ex.phi(t, x));
    let p = disc.interpolate_pressure(&|x| ex.p(t, x));
    let r = energy(sm, &u, &phi) + inp.sav.c_r;
    Ok(Level { ubar: u.clone(), u, phibar: phi.clone(), phi, p, sav: SavState { r, xi: 1.0, eta: 1.0 } })
}

fn latest(st: &RealizationState) -> Level {
    Level {
        ubar: st.ubar[0].clone(),
        u: st.u[0].clone(),
        phibar: st.phibar[0].clone(),
        phi: st.phi[0].clone(),
        p: st.p[0].clone(),
        sav: st.sav,
    }
}

/// Number of startup substeps per step: `ceil(dt^(1 - k/2))`.
pub fn bootstrap_substeps(dt: f64, k: usize) -> usize {
    (dt.powf(1.0 - 0.5 * k as f64) - 1e-9).ceil().max(1.0) as usize
}

struct Runner<'a> {
    cfg: &'a EnsembleConfig,
    disc: &'a Discretization,
    inputs: &'a [RealizationInput],
    tab: GbdfTableau,
    u_cons: Vec<bool>,
    phi_cons: Vec<bool>,
}

impl Runner<'_> {
    fn kernel<'k>(&'k self, group: &'k Group, tab: &'k GbdfTableau, pair: &'k FactoredPair, dt: f64) -> Kernel<'k> {
        Kernel { disc: self.disc, sm: &group.sm, tab, pair, physics: self.cfg.physics, dt }
    }

    fn factor(&self, sm: &SystemMatrices, tab: &GbdfTableau, dt: f64) -> Result<(FactoredPair, usize)> {
        let before = factorization_count();
        let pair = FactoredPair::new(sm, tab, dt, &self.u_cons, &self.phi_cons)?;
        Ok((pair, factorization_count() - before))
    }

    fn run_group(
        &self,
        group: &Group,
        observer: &mut Option<Observer<'_>>,
        stats: &mut RunStats,
    ) -> Result<(Vec<RealizationState>, usize)> {
        let (cfg, disc) = (self.cfg, self.disc);
        let (k, dt) = (cfg.k, cfg.dt);
        let physics = cfg.physics;
        let n_levels = cfg.n_levels();
        let members = &group.members;
        let mut states: Vec<RealizationState> = members
            .par_iter()
            .map(|&j| RealizationState::from_level(initial_level(disc, &group.sm, &self.inputs[j])))
            .collect();
        emit(observer, &group.sm, &physics, members, &states, 0, dt);

        let start_levels = (k - 1).min(n_levels);
        let mut steps = 0;
        let t0 = Instant::now();
        match cfg.startup {
            Startup::ExactStart => {
                for lvl in 1..=start_levels {
                    let levels = members
                        .par_iter()
                        .map(|&j| exact_level(disc, &group.sm, &self.inputs[j], lvl as f64 * dt))
                        .collect::<Result<Vec<_>>>()?;
                    for (st, lv) in states.iter_mut().zip(levels) {
                        st.push(lv, k);
                    }
                    emit(observer, &group.sm, &physics, members, &states, lvl, dt);
                }
            }
            Startup::Bootstrap if start_levels > 0 => {
                self.bootstrap(group, &mut states, start_levels, observer, stats)?;
                steps += start_levels;
            }
            Startup::Bootstrap => {}
        }
        stats.timings.startup += t0.elapsed().as_secs_f64();

        if n_levels > start_levels {
            let t0 = Instant::now();
            let (pair, count) = self.factor(&group.sm, &self.tab, dt)?;
            stats.factorizations += count;
            stats.timings.factorization += t0.elapsed().as_secs_f64();
            let kernel = self.kernel(group, &self.tab, &pair, dt);
            for n in start_levels..n_levels {
                kernel.advance(group, self.inputs, &mut states, n as f64 * dt, k, &mut stats.timings)?;
                steps += 1;
                emit(observer, &group.sm, &physics, members, &states, n + 1, dt);
            }
        }
        Ok((states, steps))
    }

    /// Fills levels `1..=levels` by one implicit-explicit Euler substep and
    /// second-order substeps of size `dt / m`.
    fn bootstrap(
        &self,
        group: &Group,
        states: &mut [RealizationState],
        levels: usize,
        observer: &mut Option<Observer<'_>>,
        stats: &mut RunStats,
    ) -> Result<()> {
        let (cfg, k, dt) = (self.cfg, self.cfg.k, self.cfg.dt);
        let m = bootstrap_substeps(dt, k);
        let tau = dt / m as f64;
        let total = levels * m;
        debug!("bootstrap: {total} substeps of {tau}");
        let mut sub: Vec<RealizationState> = states.to_vec();
        let euler = GbdfTableau::first_order();
        let (pair1, c1) = self.factor(&group.sm, &euler, tau)?;
        stats.startup_factorizations += c1;
        self.kernel(group, &euler, &pair1, tau).advance(group, self.inputs, &mut sub, 0.0, 2, &mut stats.timings)?;
        drop(pair1);
        let mut sample = |s: usize, sub: &[RealizationState], states: &mut [RealizationState]| {
            if s % m == 0 {
                for (st, ss) in states.iter_mut().zip(sub) {
                    st.push(latest(ss), k);
                }
                emit(observer, &group.sm, &cfg.physics, &group.members, states, s / m, dt);
            }
        };
        sample(1, &sub, states);
        if total > 1 {
            let bdf2 = make_tableau(2, cfg.beta)?;
            let (pair2, c2) = self.factor(&group.sm, &bdf2, tau)?;
            stats.startup_factorizations += c2;
            let kernel = self.kernel(group, &bdf2, &pair2, tau);
            for s in 1..total {
                kernel.advance(group, self.inputs, &mut sub, s as f64 * tau, 2, &mut stats.timings)?;
                sample(s + 1, &sub, states);
            }
        }
        Ok(())
    }
}

fn validate_inputs(cfg: &EnsembleConfig, disc: &Discretization, inputs: &[RealizationInput]) -> Result<()> {
    cfg.validate()?;
    if inputs.len() != cfg.j {
        return Err(Error::ConfigValidation {
            field: "ensemble.j".into(),
            message: format!("{} realization inputs for j = {}", inputs.len(), cfg.j),
        });
    }
    for inp in inputs {
        inp.sav.validate()?;
        disc.check_spd(&inp.conductivity)?;
        if cfg.startup == Startup::ExactStart && inp.exact.is_none() {
            return Err(Error::MissingAnalyticSolution);
        }
        if let VelocityBoundary::Values(v) = &inp.velocity_bc {
            if v.len() != disc.spaces.n_velocity() {
                return Err(Error::DimensionMismatch(format!(
                    "velocity boundary values of length {} for {} dofs",
                    v.len(),
                    disc.spaces.n_velocity()
                )));
            }
        }
    }
    Ok(())
}

/// Runs all realizations from `t = 0` to `cfg.t_end`.
///
/// In ensemble mode every realization is stepped against one pair of
/// factorizations built from the mean coefficients; in individual mode each
/// realization is run on its own with matrices from its own coefficients.
pub fn run(
    cfg: &EnsembleConfig,
    disc: &Discretization,
    inputs: &[RealizationInput],
    mut observer: Option<Observer<'_>>,
) -> Result<RunOutput> {
    let wall = Instant::now();
    validate_inputs(cfg, disc, inputs)?;
    let tab = make_tableau(cfg.k, cfg.beta)?;
    let mut stats = RunStats::default();
    let t0 = Instant::now();
    let shared = SharedMatrices::assemble(disc, &cfg.physics)?;
    stats.timings.assembly += t0.elapsed().as_secs_f64();
    let runner = Runner {
        cfg,
        disc,
        inputs,
        tab,
        u_cons: disc.spaces.velocity_constrained(),
        phi_cons: disc.spaces.head.constrained.clone(),
    };
    let member_sets: Vec<Vec<usize>> = match cfg.mode {
        SolveMode::Ensemble => vec![(0..cfg.j).collect()],
        SolveMode::Individual => (0..cfg.j).map(|j| vec![j]).collect(),
    };
    let mut states: Vec<Option<RealizationState>> = vec![None; cfg.j];
    for members in member_sets {
        let t0 = Instant::now();
        let group = build_group(disc, &shared, &cfg.physics, inputs, members)?;
        stats.timings.assembly += t0.elapsed().as_secs_f64();
        let (out, steps) = runner.run_group(&group, &mut observer, &mut stats)?;
        stats.steps = steps;
        for (&j, st) in group.members.iter().zip(out) {
            states[j] = Some(st);
        }
    }
    stats.wall = wall.elapsed().as_secs_f64();
    info!(
        "run finished: {} steps, {} factorizations (+{} startup), {:.3} s",
        stats.steps, stats.factorizations, stats.startup_factorizations, stats.wall
    );
    Ok(RunOutput {
        states: states.into_iter().map(|s| s.expect("every realization belongs to a group")).collect(),
        stats,
        t_final: cfg.n_levels() as f64 * cfg.dt,
    })
}
