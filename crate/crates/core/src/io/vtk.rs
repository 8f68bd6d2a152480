//! Legacy ASCII VTK unstructured-grid output.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Region};

#[derive(Debug, Clone, PartialEq)]
pub enum PointData {
    Scalar(Vec<f64>),
    Vector(Vec<[f64; 2]>),
}

impl PointData {
    fn len(&self) -> usize {
        match self {
            Self::Scalar(v) => v.len(),
            Self::Vector(v) => v.len(),
        }
    }

    /// Vertex samples with undefined entries set to zero.
    pub fn scalar_or_zero(v: &[Option<f64>]) -> Self {
        Self::Scalar(v.iter().map(|x| x.unwrap_or(0.0)).collect())
    }

    pub fn vector_or_zero(v: &[Option<[f64; 2]>]) -> Self {
        Self::Vector(v.iter().map(|x| x.unwrap_or([0.0; 2])).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VtkField {
    pub name: String,
    pub data: PointData,
}

impl VtkField {
    pub fn new(name: impl Into<String>, data: PointData) -> Self {
        Self { name: name.into(), data }
    }
}

/// Renders the file contents. Triangles are cell type 5; a `region` cell
/// field marks fluid (0) and porous (1) cells.
pub fn render_vtk(mesh: &Mesh, fields: &[VtkField]) -> Result<String> {
    let nv = mesh.vertices.len();
    for f in fields {
        if f.data.len() != nv {
            return Err(Error::DimensionMismatch(format!(
                "field '{}' has {} values for {} vertices",
                f.name,
                f.data.len(),
                nv
            )));
        }
        if f.name.is_empty() || f.name.contains(char::is_whitespace) {
            return Err(Error::DimensionMismatch(format!("field name '{}' is not a single token", f.name)));
        }
    }
    let nt = mesh.triangles.len();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nstokes-darcy ensemble output\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {nv} double");
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "CELL_DATA {nt}\nSCALARS region int 1\nLOOKUP_TABLE default");
    for r in &mesh.regions {
        s.push_str(if *r == Region::Fluid { "0\n" } else { "1\n" });
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {nv}");
    }
    for f in fields {
        match &f.data {
            PointData::Scalar(v) => {
                let _ = writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", f.name);
                for x in v {
                    let _ = writeln!(s, "{x:e}");
                }
            }
            PointData::Vector(v) => {
                let _ = writeln!(s, "VECTORS {} double", f.name);
                for x in v {
                    let _ = writeln!(s, "{:e} {:e} 0", x[0], x[1]);
                }
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(mesh: &Mesh, fields: &[VtkField], path: &Path) -> Result<()> {
    std::fs::write(path, render_vtk(mesh, fields)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_coupled_rect_mesh;

    #[test]
    fn point_count_matches_vertices() {
        let m = build_coupled_rect_mesh(2).unwrap();
        let nv = m.vertices.len();
        let f = VtkField::new("head", PointData::Scalar(vec![1.0; nv]));
        let s = render_vtk(&m, &[f]).unwrap();
        assert!(s.contains(&format!("POINTS {nv} double")));
        assert!(s.contains(&format!("POINT_DATA {nv}")));
        let cells = format!("CELLS {} {}", m.triangles.len(), 4 * m.triangles.len());
        assert!(s.contains(&cells));
    }

    #[test]
    fn wrong_length_is_rejected() {
        let m = build_coupled_rect_mesh(1).unwrap();
        assert!(render_vtk(&m, &[VtkField::new("x", PointData::Scalar(vec![0.0]))]).is_err());
    }
}
