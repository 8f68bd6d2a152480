//! Ensemble time stepping: configuration, per-realization inputs and
//! states, the shared step operators and the run loop.

pub mod config;
pub mod engine;
pub mod input;
pub mod operators;
pub mod params;
pub mod state;

pub use config::{EnsembleConfig, SolveMode, Startup};
pub use engine::{bootstrap_substeps, run, Diagnostics, Observer, PhaseTimings, RunOutput, RunStats, StepReport};
pub use input::{InterfaceSources, RealizationInput, VectorTimeFn, VelocityBoundary};
pub use params::{check_parameter_condition, ParameterReport};
pub use state::{recover_pressure, Level, RealizationState};
