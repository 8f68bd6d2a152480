//! Configuration files and output writers.

pub mod config;
pub mod table;
pub mod vtk;

use std::path::Path;

use crate::error::Result;

pub use config::{parse_config, ConductivityConfig, RunConfig, Scenario, StudyConfig};
pub use table::{read_csv, write_csv, Table};
pub use vtk::{render_vtk, write_vtk, PointData, VtkField};

/// Writes `key=value` lines in the given order.
pub fn write_metadata(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(k);
        s.push('=');
        s.push_str(v);
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}
