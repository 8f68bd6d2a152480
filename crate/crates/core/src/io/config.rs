//! TOML run configuration: parsing with scenario-dependent defaults,
//! validation with field paths, and emission.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Physics;
use crate::sav::SavParams;
use crate::scheme::{EnsembleConfig, SolveMode, Startup};
use crate::stochastic::ConductivitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    MmsConvergence,
    MmsTemporal,
    Longtime,
    Timing,
    YDomain,
    SingleRun,
}

impl Scenario {
    pub const ALL: [Scenario; 6] =
        [Self::MmsConvergence, Self::MmsTemporal, Self::Longtime, Self::Timing, Self::YDomain, Self::SingleRun];

    pub fn name(&self) -> &'static str {
        match self {
            Self::MmsConvergence => "mms-convergence",
            Self::MmsTemporal => "mms-temporal",
            Self::Longtime => "longtime",
            Self::Timing => "timing",
            Self::YDomain => "y-domain",
            Self::SingleRun => "single-run",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(Scenario::name).collect();
            invalid("scenario", format!("unknown scenario '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

/// Conductivity samples as they can be written in a file.
#[derive(Debug, Clone, PartialEq)]
pub enum ConductivityConfig {
    Uniform { scale: f64 },
    Listed(Vec<f64>),
}

impl ConductivityConfig {
    pub fn spec(&self) -> ConductivitySpec {
        match self {
            Self::Uniform { scale } => ConductivitySpec::UniformIsotropic { scale: *scale },
            Self::Listed(v) => ConductivitySpec::Listed(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Mesh resolutions `n` (`h = 1/n`) of the spatial study.
    pub ns: Vec<usize>,
    /// Time steps of the temporal study.
    pub dts: Vec<f64>,
    pub dt_ref: f64,
    /// Ensemble sizes of the timing study.
    pub js: Vec<usize>,
    pub repeats: usize,
    /// Adds the energy-balance source to the auxiliary equation.
    pub energy_balance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub ensemble: EnsembleConfig,
    pub conductivity: ConductivityConfig,
    /// Cells per unit length.
    pub mesh_n: usize,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub write_vtk: bool,
    pub study: StudyConfig,
    /// Amplitude of the bounded forcing of the long-time run.
    pub forcing_amplitude: f64,
    /// Angular frequency of that forcing.
    pub forcing_frequency: f64,
    /// `(Q0, Q1, Q2)` per Y-domain case, positive for inflow.
    pub flux_cases: Vec<[f64; 3]>,
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::ConfigValidation { field: field.into(), message: message.into() }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileScheme {
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    startup: Option<Startup>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<SolveMode>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEnsemble {
    #[serde(skip_serializing_if = "Option::is_none")]
    j: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePhysics {
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_bj: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSav {
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_r: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileElements {
    #[serde(skip_serializing_if = "Option::is_none")]
    deg_u: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deg_p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deg_phi: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConductivity {
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileMesh {
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vtk: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileStudy {
    #[serde(skip_serializing_if = "Option::is_none")]
    ns: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dts: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt_ref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    js: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    repeats: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy_balance: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileForcing {
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    frequency: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileFlux {
    #[serde(skip_serializing_if = "Option::is_none")]
    cases: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<String>,
    #[serde(default)]
    scheme: FileScheme,
    #[serde(default)]
    ensemble: FileEnsemble,
    #[serde(default)]
    physics: FilePhysics,
    #[serde(default)]
    sav: FileSav,
    #[serde(default)]
    elements: FileElements,
    #[serde(default)]
    conductivity: FileConductivity,
    #[serde(default)]
    mesh: FileMesh,
    #[serde(default)]
    output: FileOutput,
    #[serde(default)]
    study: FileStudy,
    #[serde(default)]
    forcing: FileForcing,
    #[serde(default)]
    flux: FileFlux,
}

/// Defaults that depend on the scenario.
struct Defaults {
    j: usize,
    k: usize,
    dt: f64,
    t_end: f64,
    startup: Startup,
    conductivity: ConductivityConfig,
    mesh_n: usize,
    threads: usize,
}

fn defaults(s: Scenario) -> Defaults {
    let three = ConductivityConfig::Listed(vec![1.1, 2.1, 3.3]);
    let narrow = ConductivityConfig::Listed(vec![0.95, 1.0, 1.05]);
    match s {
        Scenario::MmsConvergence => Defaults {
            j: 3,
            k: 2,
            dt: 1.0 / 8.0,
            t_end: 0.5,
            startup: Startup::ExactStart,
            conductivity: three,
            mesh_n: 8,
            threads: 0,
        },
        Scenario::MmsTemporal => Defaults {
            j: 3,
            k: 3,
            dt: 0.1,
            t_end: 1.0,
            startup: Startup::ExactStart,
            conductivity: narrow.clone(),
            mesh_n: 16,
            threads: 0,
        },
        Scenario::Longtime => Defaults {
            j: 3,
            k: 2,
            dt: 0.5,
            t_end: 100.0,
            startup: Startup::Bootstrap,
            conductivity: narrow,
            mesh_n: 8,
            threads: 0,
        },
        Scenario::Timing => Defaults {
            j: 1,
            k: 2,
            dt: 1.0 / 32.0,
            t_end: 0.5,
            startup: Startup::Bootstrap,
            conductivity: ConductivityConfig::Uniform { scale: 1.0 },
            mesh_n: 32,
            threads: 1,
        },
        Scenario::YDomain => Defaults {
            j: 100,
            k: 3,
            dt: 1.0 / 32.0,
            t_end: 1.0,
            startup: Startup::Bootstrap,
            conductivity: ConductivityConfig::Uniform { scale: 1e-2 },
            mesh_n: 32,
            threads: 0,
        },
        Scenario::SingleRun => Defaults {
            j: 3,
            k: 2,
            dt: 1.0 / 16.0,
            t_end: 0.5,
            startup: Startup::Bootstrap,
            conductivity: three,
            mesh_n: 16,
            threads: 0,
        },
    }
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

impl RunConfig {
    /// All defaults for a scenario.
    pub fn default_for(scenario: Scenario) -> Self {
        Self::from_file(ConfigFile { scenario: Some(scenario.name().into()), ..Default::default() })
            .expect("defaults are valid")
    }

    pub fn parse_str(src: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(src).map_err(|e| Error::ConfigParse {
            line: e.span().map_or(0, |s| line_of(src, s.start)),
            message: e.message().to_string(),
        })?;
        Self::from_file(file)
    }

    fn from_file(f: ConfigFile) -> Result<Self> {
        let name = f.scenario.as_deref().map(str::trim).unwrap_or("");
        if name.is_empty() {
            return Err(invalid("scenario", "must name a scenario"));
        }
        let scenario: Scenario = name.parse()?;
        let d = defaults(scenario);
        let base = EnsembleConfig::default();
        let ph = Physics::default();
        let sav = SavParams::default();
        let ensemble = EnsembleConfig {
            j: f.ensemble.j.unwrap_or(d.j),
            k: f.scheme.k.unwrap_or(d.k),
            beta: f.scheme.beta.unwrap_or(base.beta),
            dt: f.scheme.dt.unwrap_or(d.dt),
            t_end: f.scheme.t_end.unwrap_or(d.t_end),
            physics: Physics {
                nu: f.physics.nu.unwrap_or(ph.nu),
                g: f.physics.g.unwrap_or(ph.g),
                s_storage: f.physics.s.unwrap_or(ph.s_storage),
                alpha_bj: f.physics.alpha_bj.unwrap_or(ph.alpha_bj),
            },
            sav: SavParams {
                gamma: f.sav.gamma.unwrap_or(sav.gamma),
                alpha: f.sav.alpha.unwrap_or(sav.alpha),
                c_r: f.sav.c_r.unwrap_or(sav.c_r),
            },
            deg_u: f.elements.deg_u.unwrap_or(base.deg_u),
            deg_p: f.elements.deg_p.unwrap_or(base.deg_p),
            deg_phi: f.elements.deg_phi.unwrap_or(base.deg_phi),
            seed: f.ensemble.seed.unwrap_or(base.seed),
            startup: f.scheme.startup.unwrap_or(d.startup),
            mode: f.scheme.mode.unwrap_or_default(),
        };
        let conductivity = match f.conductivity.kind.as_deref() {
            None => match (f.conductivity.scale, f.conductivity.values) {
                (None, None) => d.conductivity,
                (Some(scale), None) => ConductivityConfig::Uniform { scale },
                (None, Some(v)) => ConductivityConfig::Listed(v),
                (Some(_), Some(_)) => {
                    return Err(invalid("conductivity", "give either scale or values, not both"));
                }
            },
            Some("uniform") => ConductivityConfig::Uniform {
                scale: f.conductivity.scale.ok_or_else(|| invalid("conductivity.scale", "required for kind = uniform"))?,
            },
            Some("listed") => ConductivityConfig::Listed(
                f.conductivity.values.ok_or_else(|| invalid("conductivity.values", "required for kind = listed"))?,
            ),
            Some(other) => {
                return Err(invalid("conductivity.kind", format!("unknown kind '{other}' (expected uniform or listed)")));
            }
        };
        let study = StudyConfig {
            ns: f.study.ns.unwrap_or_else(|| vec![8, 16, 32]),
            dts: f.study.dts.unwrap_or_else(|| vec![0.1, 0.05, 0.025, 0.0125]),
            dt_ref: f.study.dt_ref.unwrap_or(1.0 / 1280.0),
            js: f.study.js.unwrap_or_else(|| vec![1, 10, 100]),
            repeats: f.study.repeats.unwrap_or(3),
            energy_balance: f.study.energy_balance.unwrap_or(true),
        };
        let cfg = RunConfig {
            scenario,
            ensemble,
            conductivity,
            mesh_n: f.mesh.n.unwrap_or(d.mesh_n),
            out_dir: f.output.dir.unwrap_or_else(|| PathBuf::from("out")),
            threads: f.output.threads.unwrap_or(d.threads),
            write_vtk: f.output.vtk.unwrap_or(true),
            study,
            forcing_amplitude: f.forcing.amplitude.unwrap_or(1.0),
            forcing_frequency: f.forcing.frequency.unwrap_or(std::f64::consts::FRAC_PI_2),
            flux_cases: f.flux.cases.unwrap_or_else(|| vec![[2.0, -1.0, -1.0], [1.0, -1.0, -1.0], [3.0, -1.0, -1.0]]),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        if self.mesh_n == 0 {
            return Err(invalid("mesh.n", "must be at least 1"));
        }
        if self.scenario == Scenario::YDomain && self.mesh_n % 4 != 0 {
            return Err(invalid("mesh.n", "must be a multiple of 4 for the Y-shaped domain"));
        }
        match &self.conductivity {
            ConductivityConfig::Uniform { scale } if !(*scale > 0.0) => {
                return Err(invalid("conductivity.scale", "must be positive"));
            }
            ConductivityConfig::Listed(v) => {
                if v.iter().any(|k| !(*k > 0.0)) {
                    return Err(invalid("conductivity.values", "must be positive"));
                }
                if v.len() != self.ensemble.j {
                    return Err(invalid(
                        "conductivity.values",
                        format!("{} values for ensemble.j = {}", v.len(), self.ensemble.j),
                    ));
                }
            }
            _ => {}
        }
        let s = &self.study;
        if s.ns.is_empty() || s.ns.contains(&0) || s.ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("study.ns", "must be increasing positive resolutions"));
        }
        if s.dts.is_empty() || s.dts.iter().any(|d| !(*d > 0.0)) || s.dts.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("study.dts", "must be decreasing positive time steps"));
        }
        if !(s.dt_ref > 0.0) || s.dts.last().is_some_and(|d| s.dt_ref >= *d) {
            return Err(invalid("study.dt_ref", "must be positive and below every entry of study.dts"));
        }
        if s.js.is_empty() || s.js.contains(&0) {
            return Err(invalid("study.js", "must be positive ensemble sizes"));
        }
        if s.repeats == 0 {
            return Err(invalid("study.repeats", "must be at least 1"));
        }
        if !self.forcing_amplitude.is_finite() {
            return Err(invalid("forcing.amplitude", "must be finite"));
        }
        if !self.forcing_frequency.is_finite() {
            return Err(invalid("forcing.frequency", "must be finite"));
        }
        if self.flux_cases.iter().flatten().any(|q| !q.is_finite()) {
            return Err(invalid("flux.cases", "must be finite"));
        }
        Ok(())
    }

    /// Fully specified TOML text; parsing it yields `self` back.
    pub fn emit(&self) -> String {
        let e = &self.ensemble;
        let (kind, scale, values) = match &self.conductivity {
            ConductivityConfig::Uniform { scale } => ("uniform", Some(*scale), None),
            ConductivityConfig::Listed(v) => ("listed", None, Some(v.clone())),
        };
        let file = ConfigFile {
            scenario: Some(self.scenario.name().into()),
            scheme: FileScheme {
                k: Some(e.k),
                beta: Some(e.beta),
                dt: Some(e.dt),
                t_end: Some(e.t_end),
                startup: Some(e.startup),
                mode: Some(e.mode),
            },
            ensemble: FileEnsemble { j: Some(e.j), seed: Some(e.seed) },
            physics: FilePhysics {
                nu: Some(e.physics.nu),
                g: Some(e.physics.g),
                s: Some(e.physics.s_storage),
                alpha_bj: Some(e.physics.alpha_bj),
            },
            sav: FileSav { gamma: Some(e.sav.gamma), alpha: Some(e.sav.alpha), c_r: Some(e.sav.c_r) },
            elements: FileElements { deg_u: Some(e.deg_u), deg_p: Some(e.deg_p), deg_phi: Some(e.deg_phi) },
            conductivity: FileConductivity { kind: Some(kind.into()), scale, values },
            mesh: FileMesh { n: Some(self.mesh_n) },
            output: FileOutput { dir: Some(self.out_dir.clone()), vtk: Some(self.write_vtk), threads: Some(self.threads) },
            study: FileStudy {
                ns: Some(self.study.ns.clone()),
                dts: Some(self.study.dts.clone()),
                dt_ref: Some(self.study.dt_ref),
                js: Some(self.study.js.clone()),
                repeats: Some(self.study.repeats),
                energy_balance: Some(self.study.energy_balance),
            },
            forcing: FileForcing { amplitude: Some(self.forcing_amplitude), frequency: Some(self.forcing_frequency) },
            flux: FileFlux { cases: Some(self.flux_cases.clone()) },
        };
        toml::to_string(&file).expect("config is serializable")
    }

    /// Flat `key = value` pairs of every effective parameter.
    pub fn flat_entries(&self) -> Vec<(String, String)> {
        let value: toml::Table = toml::from_str(&self.emit()).expect("emitted config parses");
        let mut out = Vec::new();
        flatten("", &toml::Value::Table(value), &mut out);
        out
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    RunConfig::parse_str(&std::fs::read_to_string(path)?)
}
