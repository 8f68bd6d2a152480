//! Per-realization data: conductivity, forcing, initial and boundary data.

use std::fmt;
use std::sync::Arc;

use crate::fem::Conductivity;
use crate::mesh::Point;
use crate::mms::AnalyticSolution;
use crate::sav::SavParams;

pub type VectorTimeFn = Arc<dyn Fn(f64, Point) -> [f64; 2] + Send + Sync>;
pub type ScalarTimeFn = Arc<dyn Fn(f64, Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
/// `f(t, x, n_f, tau)` on the interface.
pub type InterfaceTimeFn = Arc<dyn Fn(f64, Point, [f64; 2], [f64; 2]) -> f64 + Send + Sync>;

/// Inhomogeneous interface data added to the weak form: `mass` tested
/// against `g psi`, `normal_stress` against `v.n_f`, `slip` against `v.tau`.
#[derive(Clone)]
pub struct InterfaceSources {
    pub mass: InterfaceTimeFn,
    pub normal_stress: InterfaceTimeFn,
    pub slip: InterfaceTimeFn,
}

/// Dirichlet data for the velocity on the outer fluid boundary.
#[derive(Clone)]
pub enum VelocityBoundary {
    Zero,
    Function(VectorTimeFn),
    /// Time-independent values on the constrained dofs of a full velocity
    /// vector; other entries are ignored.
    Values(Arc<Vec<f64>>),
}

#[derive(Clone)]
pub struct RealizationInput {
    pub conductivity: Conductivity,
    pub f_f: Option<VectorTimeFn>,
    pub f_p: Option<ScalarTimeFn>,
    pub u0: VectorFn,
    pub phi0: ScalarFn,
    pub velocity_bc: VelocityBoundary,
    /// Head on the outer porous boundary; zero when absent.
    pub head_bc: Option<ScalarTimeFn>,
    pub interface_sources: Option<InterfaceSources>,
    /// Needed to start from exact levels.
    pub exact: Option<Arc<dyn AnalyticSolution>>,
    pub sav: SavParams,
    /// Extra source in the auxiliary equation, as a function of time.
    pub sav_source: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl fmt::Debug for RealizationInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RealizationInput")
            .field("conductivity", &self.conductivity)
            .field("has_exact", &self.exact.is_some())
            .field("sav", &self.sav)
            .finish_non_exhaustive()
    }
}

impl RealizationInput {
    /// Zero forcing, zero initial data, homogeneous boundary data.
    pub fn homogeneous(conductivity: Conductivity, sav: SavParams) -> Self {
        Self {
            conductivity,
            f_f: None,
            f_p: None,
            u0: Arc::new(|_| [0.0, 0.0]),
            phi0: Arc::new(|_| 0.0),
            velocity_bc: VelocityBoundary::Zero,
            head_bc: None,
            interface_sources: None,
            exact: None,
            sav,
            sav_source: None,
        }
    }
}
