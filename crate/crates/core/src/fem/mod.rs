//! Finite-element spaces and assembly on the coupled mesh.

pub mod assembly;
pub mod fields;
pub mod lagrange;
pub mod space;
pub mod system;

pub use assembly::{CellGeom, Discretization, Physics};
pub use fields::{eta_field, Conductivity, InterfaceCoefficient, SymTensor};
pub use space::{build_spaces, FeSpaces, ScalarSpace, SpaceId};
pub use system::{assemble_static, SharedMatrices, SystemMatrices};
