use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fem::lagrange::LagrangeElement;
use crate::mesh::{Mesh, Point, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceId {
    Velocity,
    Pressure,
    Head,
}

/// Continuous scalar Lagrange space on one subdomain.
#[derive(Debug, Clone)]
pub struct ScalarSpace {
    pub element: LagrangeElement,
    pub region: Region,
    /// Triangle id of every cell.
    pub cells: Vec<usize>,
    /// Global dof of each local node, per cell.
    pub cell_dofs: Vec<Vec<usize>>,
    /// Cell index of every mesh triangle in this region.
    pub cell_of_triangle: Vec<Option<usize>>,
    pub dof_coords: Vec<Point>,
    /// Dirichlet-constrained dofs.
    pub constrained: Vec<bool>,
}

impl ScalarSpace {
    fn build(mesh: &Mesh, region: Region, degree: usize) -> Result<Self> {
        let element = LagrangeElement::new(degree)?;
        let p = degree;
        let cells: Vec<usize> = mesh.triangles_in(region).collect();
        let mut cell_of_triangle = vec![None; mesh.triangles.len()];
        for (c, &t) in cells.iter().enumerate() {
            cell_of_triangle[t] = Some(c);
        }

        let mut dof_coords = Vec::new();
        let mut vertex_dof: HashMap<usize, usize> = HashMap::new();
        for &t in &cells {
            for &v in &mesh.triangles[t] {
                vertex_dof.entry(v).or_insert_with(|| {
                    dof_coords.push(mesh.vertices[v]);
                    dof_coords.len() - 1
                });
            }
        }
        // Vertex dofs follow first-touch order; renumber by vertex id for a
        // deterministic, geometry-ordered layout.
        let mut verts: Vec<usize> = vertex_dof.keys().copied().collect();
        verts.sort_unstable();
        let vertex_dof: HashMap<usize, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        dof_coords = verts.iter().map(|&v| mesh.vertices[v]).collect();

        let mut edge_base: HashMap<usize, usize> = HashMap::new();
        if p > 1 {
            let mut edges: Vec<usize> = cells.iter().flat_map(|&t| mesh.triangle_edges[t]).collect();
            edges.sort_unstable();
            edges.dedup();
            for e in edges {
                edge_base.insert(e, dof_coords.len());
                let [a, b] = mesh.edges[e].map(|v| mesh.vertices[v]);
                for m in 1..p {
                    let s = m as f64 / p as f64;
                    dof_coords.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
                }
            }
        }

        let n_edge = p.saturating_sub(1);
        let mut cell_dofs = Vec::with_capacity(cells.len());
        for &t in &cells {
            let tri = mesh.triangles[t];
            let mut dofs = Vec::with_capacity(element.n_basis());
            for v in tri {
                dofs.push(vertex_dof[&v]);
            }
            for e in 0..3 {
                if n_edge == 0 {
                    break;
                }
                let ge = mesh.triangle_edges[t][e];
                let base = edge_base[&ge];
                let forward = mesh.edges[ge][0] == tri[e];
                for m in 1..p {
                    let idx = if forward { m - 1 } else { p - m - 1 };
                    dofs.push(base + idx);
                }
            }
            for node in 3 + 3 * n_edge..element.n_basis() {
                let (ref_pt, verts) = (element.node_point(node), tri.map(|v| mesh.vertices[v]));
                let x = [
                    verts[0][0] + ref_pt[0] * (verts[1][0] - verts[0][0]) + ref_pt[1] * (verts[2][0] - verts[0][0]),
                    verts[0][1] + ref_pt[0] * (verts[1][1] - verts[0][1]) + ref_pt[1] * (verts[2][1] - verts[0][1]),
                ];
                dofs.push(dof_coords.len());
                dof_coords.push(x);
            }
            cell_dofs.push(dofs);
        }

        let constrained = vec![false; dof_coords.len()];
        Ok(Self { element, region, cells, cell_dofs, cell_of_triangle, dof_coords, constrained })
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn degree(&self) -> usize {
        self.element.degree
    }

    /// Dofs supported on the closed edge `e`: its two vertices and any
    /// edge-interior nodes.
    pub fn edge_dofs(&self, mesh: &Mesh, e: usize) -> Vec<usize> {
        let t = mesh.edge_triangles[e].iter().copied().find(|&t| self.cell_of_triangle[t].is_some());
        let Some(t) = t else { return Vec::new() };
        let c = self.cell_of_triangle[t].unwrap();
        let le = mesh.triangle_edges[t].iter().position(|&x| x == e).unwrap();
        let n_edge = self.element.n_edge_nodes();
        let dofs = &self.cell_dofs[c];
        let mut out = vec![dofs[le], dofs[(le + 1) % 3]];
        out.extend((0..n_edge).map(|m| dofs[3 + le * n_edge + m]));
        out
    }

    fn constrain_edges(&mut self, mesh: &Mesh, edges: impl Iterator<Item = usize>) {
        for e in edges {
            for d in self.edge_dofs(mesh, e) {
                self.constrained[d] = true;
            }
        }
    }
}

/// Velocity, pressure and hydraulic-head spaces on a coupled mesh.
///
/// Velocity vectors are stored component-blocked: entry `c * n + i` is
/// component `c` of scalar dof `i`.
#[derive(Debug, Clone)]
pub struct FeSpaces {
    pub velocity: ScalarSpace,
    pub pressure: ScalarSpace,
    pub head: ScalarSpace,
}

impl FeSpaces {
    pub fn n_velocity(&self) -> usize {
        2 * self.velocity.n_dofs()
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure.n_dofs()
    }

    pub fn n_head(&self) -> usize {
        self.head.n_dofs()
    }

    pub fn len(&self, space: SpaceId) -> usize {
        match space {
            SpaceId::Velocity => self.n_velocity(),
            SpaceId::Pressure => self.n_pressure(),
            SpaceId::Head => self.n_head(),
        }
    }

    /// Constraint flags over the blocked velocity vector.
    pub fn velocity_constrained(&self) -> Vec<bool> {
        let c = &self.velocity.constrained;
        c.iter().chain(c.iter()).copied().collect()
    }
}

/// Builds the three spaces and their Dirichlet lists from edge tags.
pub fn build_spaces(mesh: &Mesh, deg_u: usize, deg_p: usize, deg_phi: usize) -> Result<FeSpaces> {
    if deg_u != deg_p + 1 {
        return Err(Error::UnstablePair { deg_u, deg_p });
    }
    for d in [deg_u, deg_p, deg_phi] {
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDegree(d));
        }
    }
    let mut velocity = ScalarSpace::build(mesh, Region::Fluid, deg_u)?;
    velocity.constrain_edges(mesh, mesh.gamma_f.iter().map(|b| b.edge));
    let pressure = ScalarSpace::build(mesh, Region::Fluid, deg_p)?;
    let mut head = ScalarSpace::build(mesh, Region::Porous, deg_phi)?;
    head.constrain_edges(mesh, mesh.gamma_p.iter().map(|b| b.edge));
    Ok(FeSpaces { velocity, pressure, head })
}
