//! Drivers behind the command line: each scenario runs the scheme on its
//! problem and writes tables, VTK files and a metadata block.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;

use crate::error::{Error, Result};
use crate::fem::{Conductivity, Discretization};
use crate::io::{write_csv, write_metadata, write_vtk, PointData, RunConfig, Scenario, Table, VtkField};
use crate::mesh::{build_coupled_rect_mesh, build_y_domain_mesh, Point};
use crate::mms::study::{convergence_study, temporal_refinement_study, StudyTable};
use crate::mms::{error_norms, exact_solution, mms_inputs};
use crate::scheme::{
    check_parameter_condition, run, EnsembleConfig, ParameterReport, RealizationInput, RunStats, SolveMode, StepReport,
    VectorTimeFn, VelocityBoundary,
};
use crate::stochastic::{ensemble_stats, sample_conductivities};
use crate::tableau::make_tableau;

/// Files written by a scenario and the metadata entries beyond the config.
#[derive(Debug, Clone, Default)]
pub struct ScenarioReport {
    pub artifacts: Vec<PathBuf>,
    pub metadata: Vec<(String, String)>,
}

impl ScenarioReport {
    fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    fn stats(&mut self, prefix: &str, s: &RunStats) {
        self.note(format!("{prefix}.steps"), s.steps);
        self.note(format!("{prefix}.factorizations"), s.factorizations);
        self.note(format!("{prefix}.startup_factorizations"), s.startup_factorizations);
        let t = &s.timings;
        for (name, v) in [
            ("assembly", t.assembly),
            ("factorization", t.factorization),
            ("startup", t.startup),
            ("rhs", t.rhs),
            ("solve", t.solve),
            ("sav", t.update),
        ] {
            self.note(format!("{prefix}.seconds.{name}"), format!("{v:.6}"));
        }
        self.note(format!("{prefix}.seconds.wall"), format!("{:.6}", s.wall));
    }

    fn parameters(&mut self, r: &ParameterReport) {
        self.note("parameter_condition.slip_ratio", r.eta_ratio);
        self.note("parameter_condition.slip_bound", r.eta_bound);
        self.note("parameter_condition.conductivity_ratio", r.k_ratio);
        self.note("parameter_condition.conductivity_bound", r.k_bound);
        self.note("parameter_condition.satisfied", r.satisfied());
    }
}

/// Runs `f` on a pool of `threads` workers, or on the global pool for 0.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn conductivities(cfg: &RunConfig) -> Result<Vec<Conductivity>> {
    sample_conductivities(&cfg.conductivity.spec(), cfg.ensemble.j, cfg.ensemble.seed)
}

fn rect_disc(cfg: &EnsembleConfig, n: usize) -> Result<Arc<Discretization>> {
    Ok(Arc::new(Discretization::new(build_coupled_rect_mesh(n)?, cfg.deg_u, cfg.deg_p, cfg.deg_phi)?))
}

fn parameter_report(disc: &Discretization, ks: &[Conductivity], cfg: &EnsembleConfig) -> Result<ParameterReport> {
    check_parameter_condition(disc, ks, &cfg.physics, &make_tableau(cfg.k, cfg.beta)?)
}

/// Runs the scenario named in `cfg`, writing into `cfg.out_dir`.
pub fn run_scenario(cfg: &RunConfig) -> Result<ScenarioReport> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut report = with_threads(cfg.threads, || match cfg.scenario {
        Scenario::MmsConvergence => mms_convergence(cfg),
        Scenario::MmsTemporal => mms_temporal(cfg),
        Scenario::Longtime => longtime(cfg),
        Scenario::Timing => timing(cfg),
        Scenario::YDomain => y_domain(cfg),
        Scenario::SingleRun => single_run(cfg),
    })??;
    let mut entries = cfg.flat_entries();
    entries.append(&mut report.metadata.clone());
    let path = cfg.out_dir.join("metadata.txt");
    write_metadata(&path, &entries)?;
    report.artifacts.push(path);
    report.metadata = entries;
    Ok(report)
}

pub fn study_table(t: &StudyTable) -> Result<Table> {
    let mut out = Table::new([
        t.param_name,
        "realization",
        "err_u",
        "rate_u",
        "err_p",
        "rate_p",
        "err_phi",
        "rate_phi",
        "xi_deviation",
    ]);
    for r in &t.rows {
        out.push(vec![
            Some(r.param),
            Some(r.realization as f64),
            Some(r.err_u),
            r.rate_u,
            Some(r.err_p),
            r.rate_p,
            Some(r.err_phi),
            r.rate_phi,
            Some(r.xi_deviation),
        ])?;
    }
    Ok(out)
}

fn write_table(dir: &Path, name: &str, t: &Table, report: &mut ScenarioReport) -> Result<()> {
    let path = dir.join(name);
    write_csv(t, &path)?;
    report.artifacts.push(path);
    Ok(())
}

fn mms_convergence(cfg: &RunConfig) -> Result<ScenarioReport> {
    let ks = conductivities(cfg)?;
    let mut report = ScenarioReport::default();
    let disc = rect_disc(&cfg.ensemble, cfg.study.ns[0])?;
    report.parameters(&parameter_report(&disc, &ks, &cfg.ensemble)?);
    let table = convergence_study(&cfg.ensemble, &cfg.study.ns, &ks, cfg.study.energy_balance)?;
    write_table(&cfg.out_dir, "convergence.csv", &study_table(&table)?, &mut report)?;
    Ok(report)
}

fn mms_temporal(cfg: &RunConfig) -> Result<ScenarioReport> {
    let ks = conductivities(cfg)?;
    let mut report = ScenarioReport::default();
    let disc = rect_disc(&cfg.ensemble, cfg.mesh_n)?;
    report.parameters(&parameter_report(&disc, &ks, &cfg.ensemble)?);
    let s = &cfg.study;
    let table = temporal_refinement_study(&cfg.ensemble, cfg.mesh_n, &s.dts, s.dt_ref, &ks, s.energy_balance)?;
    write_table(&cfg.out_dir, "temporal.csv", &study_table(&table)?, &mut report)?;
    Ok(report)
}

/// Zero initial and boundary data driven by
/// `amplitude * sin(frequency * t)` times fixed smooth profiles.
pub fn longtime_inputs(ks: &[Conductivity], cfg: &RunConfig) -> Vec<RealizationInput> {
    use std::f64::consts::PI;
    let (a, w) = (cfg.forcing_amplitude, cfg.forcing_frequency);
    let f_f: VectorTimeFn = Arc::new(move |t: f64, x: Point| {
        let s = a * (w * t).sin();
        [s * (PI * x[0]).sin() * (PI * x[1]).cos(), s * (PI * x[0]).cos() * (PI * x[1]).sin()]
    });
    ks.iter()
        .map(|k| {
            let mut inp = RealizationInput::homogeneous(k.clone(), cfg.ensemble.sav);
            inp.f_f = Some(f_f.clone());
            inp.f_p = Some(Arc::new(move |t: f64, x: Point| a * (w * t).sin() * (PI * x[0]).sin() * (PI * x[1]).sin()));
            inp
        })
        .collect()
}

/// Per-level diagnostics of a long run.
#[derive(Debug, Clone)]
pub struct LongtimeSeries {
    /// Columns `t, realization, u_norm, phi_norm, r, xi, eta, energy`.
    pub table: Table,
    pub stats: RunStats,
}

impl LongtimeSeries {
    /// One column restricted to one realization, in time order.
    pub fn series(&self, realization: usize, column: &str) -> Vec<f64> {
        let i = self.table.columns.iter().position(|c| c == column).expect("known column");
        self.table
            .rows
            .iter()
            .filter(|r| r[1] == Some(realization as f64))
            .filter_map(|r| r[i])
            .collect()
    }
}

/// Relative growth of the running maximum over the second half of `v`.
pub fn running_max_growth(v: &[f64]) -> f64 {
    let half = v.len() / 2;
    let first = v[..=half.min(v.len().saturating_sub(1))].iter().copied().fold(0.0, f64::max);
    let all = v.iter().copied().fold(0.0, f64::max);
    if first == 0.0 {
        return if all == 0.0 { 0.0 } else { f64::INFINITY };
    }
    all / first - 1.0
}

pub fn longtime_run(cfg: &RunConfig, inputs: &[RealizationInput]) -> Result<LongtimeSeries> {
    let disc = rect_disc(&cfg.ensemble, cfg.mesh_n)?;
    let mut table = Table::new(["t", "realization", "u_norm", "phi_norm", "r", "xi", "eta", "energy"]);
    let mut rows: Vec<(usize, usize, Vec<Option<f64>>)> = Vec::new();
    let mut obs = |rep: &StepReport<'_>| {
        for (&j, d) in rep.members.iter().zip(rep.diagnostics) {
            let row = [rep.t, j as f64, d.u_norm, d.phi_norm, d.r, d.xi, d.eta, d.energy];
            rows.push((rep.level, j, row.into_iter().map(Some).collect()));
        }
    };
    let cfg_e = EnsembleConfig { j: inputs.len(), ..cfg.ensemble.clone() };
    let out = run(&cfg_e, &disc, inputs, Some(&mut obs))?;
    rows.sort_by_key(|(lvl, j, _)| (*lvl, *j));
    for (_, _, r) in rows {
        table.push(r)?;
    }
    Ok(LongtimeSeries { table, stats: out.stats })
}

fn longtime(cfg: &RunConfig) -> Result<ScenarioReport> {
    let ks = conductivities(cfg)?;
    let mut report = ScenarioReport::default();
    let series = longtime_run(cfg, &longtime_inputs(&ks, cfg))?;
    write_table(&cfg.out_dir, "longtime.csv", &series.table, &mut report)?;
    for j in 0..ks.len() {
        report.note(format!("realization.{j}.u_norm_growth"), running_max_growth(&series.series(j, "u_norm")));
        report.note(format!("realization.{j}.phi_norm_growth"), running_max_growth(&series.series(j, "phi_norm")));
        report.note(format!("realization.{j}.final_r"), series.series(j, "r").last().copied().unwrap_or(f64::NAN));
    }
    report.stats("run", &series.stats);
    Ok(report)
}

/// Median wall-clock times of both solve modes for one ensemble size.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub j: usize,
    pub ensemble_seconds: f64,
    pub individual_seconds: f64,
    /// `(individual - ensemble) / individual`.
    pub gain: f64,
    pub ensemble_factorizations: usize,
    pub individual_factorizations: usize,
    pub ensemble_stats: RunStats,
    pub individual_stats: RunStats,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times the manufactured problem for each ensemble size in `cfg.study.js`
/// and reports the median wall time per mode. After one untimed warm-up run
/// the modes alternate for `cfg.study.repeats` rounds.
pub fn timing_study(cfg: &RunConfig) -> Result<Vec<TimingRow>> {
    let disc = rect_disc(&cfg.ensemble, cfg.mesh_n)?;
    let mut rows = Vec::new();
    for &j in &cfg.study.js {
        let ks = sample_conductivities(&cfg.conductivity.spec(), j, cfg.ensemble.seed)?;
        let inputs = mms_inputs(&disc, &cfg.ensemble.physics, &ks, cfg.ensemble.sav, false)?;
        let modes = [SolveMode::Ensemble, SolveMode::Individual];
        let cfgs = modes.map(|mode| EnsembleConfig { j, mode, ..cfg.ensemble.clone() });
        run(&cfgs[0], &disc, &inputs, None)?;
        let mut walls = [Vec::new(), Vec::new()];
        let mut last = [RunStats::default(), RunStats::default()];
        for _ in 0..cfg.study.repeats {
            for (m, c) in cfgs.iter().enumerate() {
                last[m] = run(c, &disc, &inputs, None)?.stats;
                walls[m].push(last[m].wall);
            }
        }
        let [ens_walls, ind_walls] = walls;
        let [ens_stats, ind_stats] = last;
        let (ens, ind) = (median(ens_walls), median(ind_walls));
        info!("J = {j}: ensemble {ens:.3} s, individual {ind:.3} s");
        rows.push(TimingRow {
            j,
            ensemble_seconds: ens,
            individual_seconds: ind,
            gain: (ind - ens) / ind,
            ensemble_factorizations: ens_stats.factorizations,
            individual_factorizations: ind_stats.factorizations,
            ensemble_stats: ens_stats,
            individual_stats: ind_stats,
        });
    }
    Ok(rows)
}

fn timing(cfg: &RunConfig) -> Result<ScenarioReport> {
    let rows = timing_study(cfg)?;
    let mut report = ScenarioReport::default();
    let mut t = Table::new([
        "j",
        "ensemble_seconds",
        "individual_seconds",
        "gain_percent",
        "ensemble_factorizations",
        "individual_factorizations",
    ]);
    for r in &rows {
        t.push_values(&[
            r.j as f64,
            r.ensemble_seconds,
            r.individual_seconds,
            100.0 * r.gain,
            r.ensemble_factorizations as f64,
            r.individual_factorizations as f64,
        ])?;
        report.stats(&format!("j{}.ensemble", r.j), &r.ensemble_stats);
        report.stats(&format!("j{}.individual", r.j), &r.individual_stats);
    }
    write_table(&cfg.out_dir, "timing.csv", &t, &mut report)?;
    Ok(report)
}

/// Dirichlet velocity values that carry the prescribed inflow `q[i]` through
/// flux segment `i` (negative for outflow). On each segment the velocity is
/// `q[i] / |S_i|` times the inward normal; a dof shared by two edges of a
/// segment with different normals gets the sum of both.
pub fn y_domain_velocity_bc(disc: &Discretization, q: [f64; 3]) -> Result<Vec<f64>> {
    let mesh = &disc.mesh;
    if mesh.flux_segments.len() != 3 {
        return Err(Error::DimensionMismatch(format!("{} flux segments, expected 3", mesh.flux_segments.len())));
    }
    let sp = &disc.spaces.velocity;
    let ns = sp.n_dofs();
    let mut normals: Vec<Vec<[f64; 2]>> = vec![Vec::new(); ns];
    let mut scale = vec![0.0; ns];
    for (seg, &qi) in mesh.flux_segments.iter().zip(&q) {
        for &bi in &seg.edges {
            let be = &mesh.gamma_f[bi];
            let inward = [-be.normal[0], -be.normal[1]];
            for d in sp.edge_dofs(mesh, be.edge) {
                scale[d] = qi / seg.length;
                let seen = normals[d].iter().any(|n| (n[0] - inward[0]).abs() + (n[1] - inward[1]).abs() < 1e-12);
                if !seen {
                    normals[d].push(inward);
                }
            }
        }
    }
    let mut out = vec![0.0; 2 * ns];
    for d in 0..ns {
        for n in &normals[d] {
            out[d] += scale[d] * n[0];
            out[ns + d] += scale[d] * n[1];
        }
    }
    Ok(out)
}

/// Ensemble statistics of one Y-domain flux case at the final time.
#[derive(Debug, Clone)]
pub struct YDomainCase {
    pub q: [f64; 3],
    pub mean_u: Vec<f64>,
    pub var_u: Vec<f64>,
    pub mean_phi: Vec<f64>,
    pub var_phi: Vec<f64>,
    /// Outward flux of the boundary data through each segment.
    pub prescribed_flux: [f64; 3],
    /// Outward flux of the mean velocity through each segment.
    pub mean_flux: [f64; 3],
    pub stats: RunStats,
}

pub fn y_domain_disc(cfg: &RunConfig) -> Result<Arc<Discretization>> {
    let e = &cfg.ensemble;
    Ok(Arc::new(Discretization::new(build_y_domain_mesh(cfg.mesh_n)?, e.deg_u, e.deg_p, e.deg_phi)?))
}

pub fn y_domain_case(cfg: &RunConfig, disc: &Discretization, ks: &[Conductivity], q: [f64; 3]) -> Result<YDomainCase> {
    let bc = Arc::new(y_domain_velocity_bc(disc, q)?);
    let inputs: Vec<RealizationInput> = ks
        .iter()
        .map(|k| {
            let mut inp = RealizationInput::homogeneous(k.clone(), cfg.ensemble.sav);
            inp.velocity_bc = VelocityBoundary::Values(bc.clone());
            inp
        })
        .collect();
    let c = EnsembleConfig { j: ks.len(), ..cfg.ensemble.clone() };
    let out = run(&c, disc, &inputs, None)?;
    let us: Vec<Vec<f64>> = out.states.iter().map(|s| s.velocity().to_vec()).collect();
    let phis: Vec<Vec<f64>> = out.states.iter().map(|s| s.head().to_vec()).collect();
    let (mean_u, var_u) = ensemble_stats(&us)?;
    let (mean_phi, var_phi) = ensemble_stats(&phis)?;
    let segs = &disc.mesh.flux_segments;
    let flux = |u: &[f64]| -> [f64; 3] { std::array::from_fn(|i| disc.boundary_flux(u, &segs[i].edges)) };
    Ok(YDomainCase {
        q,
        prescribed_flux: flux(&bc),
        mean_flux: flux(&mean_u),
        mean_u,
        var_u,
        mean_phi,
        var_phi,
        stats: out.stats,
    })
}

pub fn y_domain_fields(disc: &Discretization, case: &YDomainCase) -> Vec<VtkField> {
    vec![
        VtkField::new("mean_velocity", PointData::vector_or_zero(&disc.velocity_at_vertices(&case.mean_u))),
        VtkField::new("variance_velocity", PointData::vector_or_zero(&disc.velocity_at_vertices(&case.var_u))),
        VtkField::new("mean_head", PointData::scalar_or_zero(&disc.head_at_vertices(&case.mean_phi))),
        VtkField::new("variance_head", PointData::scalar_or_zero(&disc.head_at_vertices(&case.var_phi))),
    ]
}

fn y_domain(cfg: &RunConfig) -> Result<ScenarioReport> {
    let disc = y_domain_disc(cfg)?;
    let ks = conductivities(cfg)?;
    let mut report = ScenarioReport::default();
    report.parameters(&parameter_report(&disc, &ks, &cfg.ensemble)?);
    report.note(
        "flux_profile",
        "uniform normal velocity q/|S| on each segment, normals summed at the corner joining two sides of a segment",
    );
    let mut t = Table::new(["case", "segment", "q", "prescribed_outward_flux", "mean_outward_flux"]);
    for (ci, &q) in cfg.flux_cases.iter().enumerate() {
        let case = y_domain_case(cfg, &disc, &ks, q)?;
        for s in 0..3 {
            t.push_values(&[ci as f64, s as f64, q[s], case.prescribed_flux[s], case.mean_flux[s]])?;
        }
        if cfg.write_vtk {
            let path = cfg.out_dir.join(format!("y_domain_case{ci}.vtk"));
            write_vtk(&disc.mesh, &y_domain_fields(&disc, &case), &path)?;
            report.artifacts.push(path);
        }
        report.stats(&format!("case{ci}"), &case.stats);
    }
    write_table(&cfg.out_dir, "fluxes.csv", &t, &mut report)?;
    Ok(report)
}

fn single_run(cfg: &RunConfig) -> Result<ScenarioReport> {
    let ks = conductivities(cfg)?;
    let disc = rect_disc(&cfg.ensemble, cfg.mesh_n)?;
    let mut report = ScenarioReport::default();
    report.parameters(&parameter_report(&disc, &ks, &cfg.ensemble)?);
    let inputs = mms_inputs(&disc, &cfg.ensemble.physics, &ks, cfg.ensemble.sav, cfg.study.energy_balance)?;
    let mut diag = Table::new(["level", "t", "realization", "energy", "u_norm", "phi_norm", "r", "xi", "eta"]);
    let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    let mut obs = |rep: &StepReport<'_>| {
        for (&j, d) in rep.members.iter().zip(rep.diagnostics) {
            rows.push((rep.level, j, vec![rep.level as f64, rep.t, j as f64, d.energy, d.u_norm, d.phi_norm, d.r, d.xi, d.eta]));
        }
    };
    let out = run(&cfg.ensemble, &disc, &inputs, Some(&mut obs))?;
    rows.sort_by_key(|(l, j, _)| (*l, *j));
    for (_, _, r) in &rows {
        diag.push_values(r)?;
    }
    write_table(&cfg.out_dir, "diagnostics.csv", &diag, &mut report)?;
    let ex = exact_solution();
    let mut errs = Table::new(["realization", "err_u", "err_p", "err_phi"]);
    for (j, st) in out.states.iter().enumerate() {
        let (eu, ep, ephi) = error_norms(&disc, &ex, st.velocity(), st.pressure(), st.head(), out.t_final);
        errs.push_values(&[j as f64, eu, ep, ephi])?;
    }
    write_table(&cfg.out_dir, "errors.csv", &errs, &mut report)?;
    if cfg.write_vtk {
        for (j, st) in out.states.iter().enumerate() {
            let fields = vec![
                VtkField::new("velocity", PointData::vector_or_zero(&disc.velocity_at_vertices(st.velocity()))),
                VtkField::new("pressure", PointData::scalar_or_zero(&disc.pressure_at_vertices(st.pressure()))),
                VtkField::new("head", PointData::scalar_or_zero(&disc.head_at_vertices(st.head()))),
            ];
            let path = cfg.out_dir.join(format!("realization{j}.vtk"));
            write_vtk(&disc.mesh, &fields, &path)?;
            report.artifacts.push(path);
        }
    }
    report.stats("run", &out.stats);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_of_running_max() {
        assert_eq!(running_max_growth(&[1.0, 2.0, 2.0, 2.0, 2.0]), 0.0);
        assert!((running_max_growth(&[1.0, 1.0, 1.0, 1.0, 1.5]) - 0.5).abs() < 1e-15);
        assert_eq!(running_max_growth(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn y_domain_boundary_data_carries_the_fluxes() {
        let mut cfg = RunConfig::default_for(Scenario::YDomain);
        cfg.mesh_n = 8;
        let disc = y_domain_disc(&cfg).unwrap();
        let q = [2.0, -1.0, -1.0];
        let bc = y_domain_velocity_bc(&disc, q).unwrap();
        for (i, seg) in disc.mesh.flux_segments.iter().enumerate() {
            assert!((disc.boundary_flux(&bc, &seg.edges) + q[i]).abs() < 1e-12, "segment {i}");
        }
    }
}
