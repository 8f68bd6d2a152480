//! Structured triangulations of the two coupled geometries.
//!
//! Triangles are counter-clockwise. Local edge `e` of a triangle joins local
//! vertices `e` and `(e + 1) % 3`. Interface normals point out of the fluid
//! region; the tangent is the normal rotated by +90 degrees.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Fluid,
    Porous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub edge: usize,
    pub triangle: usize,
    /// Outward unit normal of the owning subdomain.
    pub normal: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceEdge {
    pub edge: usize,
    pub fluid: usize,
    pub porous: usize,
    /// `n_f`, pointing from the fluid triangle into the porous one.
    pub normal: Point,
    pub tangent: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxSegment {
    pub name: String,
    /// Indices into `Mesh::gamma_f`.
    pub edges: Vec<usize>,
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    /// Unique edges as sorted vertex pairs.
    pub edges: Vec<[usize; 2]>,
    pub triangle_edges: Vec<[usize; 3]>,
    pub edge_triangles: Vec<Vec<usize>>,
    pub gamma_f: Vec<BoundaryEdge>,
    pub gamma_p: Vec<BoundaryEdge>,
    pub interface: Vec<InterfaceEdge>,
    pub flux_segments: Vec<FluxSegment>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshViolation {
    NonPositiveArea { triangle: usize, area: f64 },
    InterfaceRegions { edge: usize },
    InterfaceNormal { edge: usize },
    InterfaceOnBoundary { edge: usize },
    BoundaryEdgeUntagged { edge: usize },
    BoundaryEdgeMistagged { edge: usize },
    InteriorEdgeTagged { edge: usize },
}

impl Mesh {
    /// Builds edge connectivity and classifies boundary and interface edges.
    pub fn from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, regions: Vec<Region>) -> Self {
        assert_eq!(triangles.len(), regions.len());
        let mut lookup: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<Vec<usize>> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_triangles.push(Vec::new());
                    edges.len() - 1
                });
                edge_triangles[id].push(t);
                te[e] = id;
            }
            triangle_edges.push(te);
        }

        let mut mesh = Self {
            vertices,
            triangles,
            regions,
            edges,
            triangle_edges,
            edge_triangles,
            gamma_f: Vec::new(),
            gamma_p: Vec::new(),
            interface: Vec::new(),
            flux_segments: Vec::new(),
        };
        for e in 0..mesh.edges.len() {
            match mesh.edge_triangles[e].as_slice() {
                &[t] => {
                    let normal = mesh.outward_normal(t, e);
                    let be = BoundaryEdge { edge: e, triangle: t, normal };
                    match mesh.regions[t] {
                        Region::Fluid => mesh.gamma_f.push(be),
                        Region::Porous => mesh.gamma_p.push(be),
                    }
                }
                &[t0, t1] if mesh.regions[t0] != mesh.regions[t1] => {
                    let (fluid, porous) = if mesh.regions[t0] == Region::Fluid { (t0, t1) } else { (t1, t0) };
                    let normal = mesh.outward_normal(fluid, e);
                    let tangent = [-normal[1], normal[0]];
                    mesh.interface.push(InterfaceEdge { edge: e, fluid, porous, normal, tangent });
                }
                _ => {}
            }
        }
        mesh
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].map(|v| self.vertices[v]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    }

    pub fn triangles_in(&self, region: Region) -> impl Iterator<Item = usize> + '_ {
        (0..self.triangles.len()).filter(move |&t| self.regions[t] == region)
    }

    pub fn region_area(&self, region: Region) -> f64 {
        self.triangles_in(region).map(|t| self.signed_area(t)).sum()
    }

    pub fn interface_length(&self) -> f64 {
        self.interface.iter().map(|ie| self.edge_length(ie.edge)).sum()
    }

    /// Largest distance between two vertices (bounding-box diagonal).
    pub fn diameter(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    fn outward_normal(&self, t: usize, e: usize) -> Point {
        let [a, b] = self.edges[e].map(|v| self.vertices[v]);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        let mut n = [dy / len, -dx / len];
        let c = self.centroid(t);
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        if (mid[0] - c[0]) * n[0] + (mid[1] - c[1]) * n[1] < 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }
}

/// `[0,1] x [-1,1]` with fluid on top, porous below and the interface at
/// `y = 0`. Each of the `n x 2n` cells is split along its lower-left to
/// upper-right diagonal.
pub fn build_coupled_rect_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidResolution { n, reason: "need at least one cell per unit length" });
    }
    let h = 1.0 / n as f64;
    let (nx, ny) = (n, 2 * n);
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let vertices = (0..=ny)
        .flat_map(|j| (0..=nx).map(move |i| [i as f64 * h, -1.0 + j as f64 * h]))
        .collect();
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    let mut regions = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        let region = if j >= n { Region::Fluid } else { Region::Porous };
        for i in 0..nx {
            let (ll, lr, ur, ul) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            triangles.push([ll, lr, ur]);
            triangles.push([ll, ur, ul]);
            regions.push(region);
            regions.push(region);
        }
    }
    Ok(Mesh::from_parts(vertices, triangles, regions))
}

/// Corner points of the Y-shaped conduit in the unit square.
pub const Y_DECAGON: [(char, Point); 10] = [
    ('A', [0.0, 1.0]),
    ('B', [0.0, 0.75]),
    ('C', [0.5, 0.25]),
    ('D', [0.5, 0.0]),
    ('E', [0.75, 0.0]),
    ('F', [0.75, 0.25]),
    ('G', [1.0, 0.25]),
    ('H', [1.0, 0.5]),
    ('I', [0.75, 0.5]),
    ('J', [0.25, 1.0]),
];

fn decagon_point(name: char) -> Point {
    Y_DECAGON.iter().find(|(c, _)| *c == name).map(|(_, p)| *p).unwrap()
}

/// Unit square with the decagon `ABCDEFGHIJ` as the free-flow region.
///
/// Cells are split along the lower-left/upper-right diagonal except where
/// the opposite diagonal lies on one of the two slanted decagon sides, so
/// the conduit walls are resolved exactly. Flux segments `S0 = AB + JA`,
/// `S1 = DE`, `S2 = GH` are tagged on the fluid boundary.
pub fn build_y_domain_mesh(n: usize) -> Result<Mesh> {
    if n == 0 || n % 4 != 0 {
        return Err(Error::InvalidResolution { n, reason: "decagon vertices require n to be a multiple of 4" });
    }
    let h = 1.0 / n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let vertices: Vec<Point> = (0..=n)
        .flat_map(|j| (0..=n).map(move |i| [i as f64 * h, j as f64 * h]))
        .collect();
    let polygon: Vec<Point> = Y_DECAGON.iter().map(|(_, p)| *p).collect();
    let slanted = [(decagon_point('B'), decagon_point('C')), (decagon_point('I'), decagon_point('J'))];

    let mut triangles = Vec::with_capacity(2 * n * n);
    let mut regions = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (ll, lr, ur, ul) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            let anti = [vertices[lr], vertices[ul]];
            let flip = slanted.iter().any(|&(p, q)| on_segment(anti[0], p, q) && on_segment(anti[1], p, q));
            let pair = if flip { [[ll, lr, ul], [lr, ur, ul]] } else { [[ll, lr, ur], [ll, ur, ul]] };
            for tri in pair {
                let c = centroid_of(&vertices, tri);
                triangles.push(tri);
                regions.push(if point_in_polygon(c, &polygon) { Region::Fluid } else { Region::Porous });
            }
        }
    }
    let mut mesh = Mesh::from_parts(vertices, triangles, regions);

    let segments: [(&str, &[(char, char)]); 3] =
        [("S0", &[('A', 'B'), ('J', 'A')]), ("S1", &[('D', 'E')]), ("S2", &[('G', 'H')])];
    for (name, pieces) in segments {
        let mut edges = Vec::new();
        let mut length = 0.0;
        for (idx, be) in mesh.gamma_f.iter().enumerate() {
            let [a, b] = mesh.edges[be.edge].map(|v| mesh.vertices[v]);
            let on = pieces.iter().any(|&(p, q)| {
                let (p, q) = (decagon_point(p), decagon_point(q));
                on_segment(a, p, q) && on_segment(b, p, q)
            });
            if on {
                edges.push(idx);
                length += mesh.edge_length(be.edge);
            }
        }
        mesh.flux_segments.push(FluxSegment { name: name.to_string(), edges, length });
    }
    Ok(mesh)
}

fn centroid_of(vertices: &[Point], tri: [usize; 3]) -> Point {
    let [a, b, c] = tri.map(|v| vertices[v]);
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

fn on_segment(x: Point, p: Point, q: Point) -> bool {
    let eps = 1e-12;
    let cross = (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]);
    if cross.abs() > eps {
        return false;
    }
    let dot = (x[0] - p[0]) * (q[0] - p[0]) + (x[1] - p[1]) * (q[1] - p[1]);
    let len2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
    dot >= -eps && dot <= len2 + eps
}

pub(crate) fn point_in_polygon(x: Point, polygon: &[Point]) -> bool {
    let mut inside = false;
    let m = polygon.len();
    for i in 0..m {
        let (a, b) = (polygon[i], polygon[(i + 1) % m]);
        if (a[1] > x[1]) != (b[1] > x[1]) {
            let xc = a[0] + (x[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if x[0] < xc {
                inside = !inside;
            }
        }
    }
    inside
}

/// Checks every structural invariant; an empty list means the mesh is valid.
pub fn validate_mesh(mesh: &Mesh) -> Vec<MeshViolation> {
    let mut out = Vec::new();
    for t in 0..mesh.triangles.len() {
        let area = mesh.signed_area(t);
        if area <= 0.0 {
            out.push(MeshViolation::NonPositiveArea { triangle: t, area });
        }
    }
    let mut tagged = vec![0usize; mesh.edges.len()];
    for ie in &mesh.interface {
        tagged[ie.edge] += 1;
        let tris = &mesh.edge_triangles[ie.edge];
        if tris.len() != 2 {
            out.push(MeshViolation::InterfaceOnBoundary { edge: ie.edge });
            continue;
        }
        let ok_regions = mesh.regions[ie.fluid] == Region::Fluid
            && mesh.regions[ie.porous] == Region::Porous
            && tris.contains(&ie.fluid)
            && tris.contains(&ie.porous);
        if !ok_regions {
            out.push(MeshViolation::InterfaceRegions { edge: ie.edge });
        }
        let (n, tau) = (ie.normal, ie.tangent);
        let (cf, cp) = (mesh.centroid(ie.fluid), mesh.centroid(ie.porous));
        let into_porous = (cp[0] - cf[0]) * n[0] + (cp[1] - cf[1]) * n[1] > 0.0;
        let unit = |v: Point| (v[0].hypot(v[1]) - 1.0).abs() < 1e-12;
        let orth = (n[0] * tau[0] + n[1] * tau[1]).abs() < 1e-12;
        if !(into_porous && unit(n) && unit(tau) && orth) {
            out.push(MeshViolation::InterfaceNormal { edge: ie.edge });
        }
    }
    for (set, region) in [(&mesh.gamma_f, Region::Fluid), (&mesh.gamma_p, Region::Porous)] {
        for be in set {
            tagged[be.edge] += 1;
            let tris = &mesh.edge_triangles[be.edge];
            if tris.len() != 1 {
                out.push(MeshViolation::InteriorEdgeTagged { edge: be.edge });
            } else if mesh.regions[tris[0]] != region {
                out.push(MeshViolation::BoundaryEdgeMistagged { edge: be.edge });
            }
        }
    }
    for e in 0..mesh.edges.len() {
        if mesh.edge_triangles[e].len() == 1 && tagged[e] != 1 {
            out.push(MeshViolation::BoundaryEdgeUntagged { edge: e });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_counts() {
        let m = build_coupled_rect_mesh(1).unwrap();
        assert_eq!((m.triangles.len(), m.vertices.len(), m.interface.len()), (4, 6, 1));
        let m = build_coupled_rect_mesh(8).unwrap();
        assert_eq!(m.interface.len(), 8);
        assert!(m.interface.iter().all(|ie| (m.edge_length(ie.edge) - 0.125).abs() < 1e-15));
        let m = build_coupled_rect_mesh(32).unwrap();
        assert_eq!(m.triangles.len(), 4096);
        assert!((0..4096).all(|t| (m.signed_area(t) - 1.0 / 2048.0).abs() < 1e-15));
    }

    #[test]
    fn rect_interface_and_boundaries() {
        let m = build_coupled_rect_mesh(4).unwrap();
        assert!(validate_mesh(&m).is_empty());
        for ie in &m.interface {
            let [a, b] = m.edges[ie.edge].map(|v| m.vertices[v]);
            assert_eq!((a[1], b[1]), (0.0, 0.0));
            assert!((ie.normal[1] + 1.0).abs() < 1e-15 && ie.normal[0].abs() < 1e-15);
            assert_eq!(ie.tangent, [1.0, 0.0]);
        }
        let on_axis = |be: &BoundaryEdge| m.edges[be.edge].iter().all(|&v| m.vertices[v][1] == 0.0);
        assert!(!m.gamma_f.iter().any(on_axis));
        assert!(!m.gamma_p.iter().any(on_axis));
        assert_eq!(m.gamma_f.len(), 3 * 4);
        assert_eq!(m.gamma_p.len(), 3 * 4);
    }

    #[test]
    fn flipped_triangle_is_reported() {
        let mut m = build_coupled_rect_mesh(2).unwrap();
        m.triangles[3].swap(1, 2);
        let v = validate_mesh(&m);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], MeshViolation::NonPositiveArea { triangle: 3, .. }));
    }

    #[test]
    fn y_domain_geometry() {
        assert!(build_y_domain_mesh(6).is_err());
        let m = build_y_domain_mesh(4).unwrap();
        assert!(m.vertices.contains(&[0.0, 1.0]));
        let m = build_y_domain_mesh(32).unwrap();
        assert!(validate_mesh(&m).is_empty());
        assert_eq!(m.triangles.len(), 2 * 32 * 32);
        let seg = |name: &str| m.flux_segments.iter().find(|s| s.name == name).unwrap().clone();
        assert!((seg("S1").length - 0.25).abs() < 1e-14);
        assert!((seg("S2").length - 0.25).abs() < 1e-14);
        assert!((seg("S0").length - 0.5).abs() < 1e-14);
        // Fluid area of the decagon by the shoelace formula.
        let poly: Vec<Point> = Y_DECAGON.iter().map(|(_, p)| *p).collect();
        let shoelace: f64 = (0..10)
            .map(|i| {
                let (a, b) = (poly[i], poly[(i + 1) % 10]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            .abs()
            / 2.0;
        assert!((m.region_area(Region::Fluid) - shoelace).abs() < 1e-12);
        // All fluid boundary edges belong to a flux segment.
        let tagged: usize = m.flux_segments.iter().map(|s| s.edges.len()).sum();
        assert_eq!(tagged, m.gamma_f.len());
    }
}
