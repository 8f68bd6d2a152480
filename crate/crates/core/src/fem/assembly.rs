//! Element loops for every bilinear, trilinear and load form of the coupled
//! problem.

use crate::error::{Error, Result};
use crate::fem::fields::{Conductivity, InterfaceCoefficient, SymTensor};
use crate::fem::lagrange::LagrangeElement;
use crate::fem::space::{build_spaces, FeSpaces, ScalarSpace};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{line_rule, triangle_rule, TriangleRule};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Physical constants of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physics {
    pub nu: f64,
    pub g: f64,
    pub s_storage: f64,
    pub alpha_bj: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self { nu: 1.0, g: 1.0, s_storage: 1.0, alpha_bj: 1.0 }
    }
}

/// Affine map from the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct CellGeom {
    pub v: [Point; 3],
    /// Twice the area.
    pub det: f64,
    jinv_t: [[f64; 2]; 2],
}

impl CellGeom {
    pub fn new(v: [Point; 3]) -> Self {
        let j = [[v[1][0] - v[0][0], v[2][0] - v[0][0]], [v[1][1] - v[0][1], v[2][1] - v[0][1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let jinv_t = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
        Self { v, det, jinv_t }
    }

    pub fn map(&self, r: [f64; 2]) -> Point {
        let v = &self.v;
        [
            v[0][0] + r[0] * (v[1][0] - v[0][0]) + r[1] * (v[2][0] - v[0][0]),
            v[0][1] + r[0] * (v[1][1] - v[0][1]) + r[1] * (v[2][1] - v[0][1]),
        ]
    }

    #[inline]
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [self.jinv_t[0][0] * g[0] + self.jinv_t[0][1] * g[1], self.jinv_t[1][0] * g[0] + self.jinv_t[1][1] * g[1]]
    }

    pub fn to_ref(&self, x: Point) -> [f64; 2] {
        let d = [x[0] - self.v[0][0], x[1] - self.v[0][1]];
        // J^{-1} d, with J^{-1} the transpose of jinv_t
        [self.jinv_t[0][0] * d[0] + self.jinv_t[1][0] * d[1], self.jinv_t[0][1] * d[0] + self.jinv_t[1][1] * d[1]]
    }
}

/// Basis values and reference gradients at the points of a rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub vals: Vec<Vec<f64>>,
    pub grads: Vec<Vec<[f64; 2]>>,
}

impl Tabulation {
    pub fn new(el: &LagrangeElement, points: &[[f64; 2]]) -> Self {
        let (vals, grads) = points.iter().map(|&p| el.eval(p)).unzip();
        Self { vals, grads }
    }
}

/// Quadrature data on one interface edge.
#[derive(Debug, Clone)]
pub struct InterfaceQuad {
    pub edge: usize,
    pub fluid_cell: usize,
    pub porous_cell: usize,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
    pub points: Vec<Point>,
    /// Physical weights (include the edge length).
    pub weights: Vec<f64>,
    pub u_vals: Vec<Vec<f64>>,
    pub phi_vals: Vec<Vec<f64>>,
}

/// Mesh, spaces, and precomputed element data.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub spaces: FeSpaces,
    pub rule: TriangleRule,
    pub fluid_geom: Vec<CellGeom>,
    pub porous_geom: Vec<CellGeom>,
    pub tab_u: Tabulation,
    pub tab_p: Tabulation,
    pub tab_phi: Tabulation,
    pub interface: Vec<InterfaceQuad>,
}

impl Discretization {
    pub fn new(mesh: Mesh, deg_u: usize, deg_p: usize, deg_phi: usize) -> Result<Self> {
        let spaces = build_spaces(&mesh, deg_u, deg_p, deg_phi)?;
        let max_deg = deg_u.max(deg_phi);
        let rule = triangle_rule(2 * max_deg + 1);
        let geom = |cells: &[usize]| -> Vec<CellGeom> {
            cells.iter().map(|&t| CellGeom::new(mesh.triangles[t].map(|v| mesh.vertices[v]))).collect()
        };
        let fluid_geom = geom(&spaces.velocity.cells);
        let porous_geom = geom(&spaces.head.cells);
        let tab_u = Tabulation::new(&spaces.velocity.element, &rule.points);
        let tab_p = Tabulation::new(&spaces.pressure.element, &rule.points);
        let tab_phi = Tabulation::new(&spaces.head.element, &rule.points);

        let lr = line_rule(2 * max_deg + 2);
        let mut interface = Vec::with_capacity(mesh.interface.len());
        for ie in &mesh.interface {
            let [a, b] = mesh.edges[ie.edge].map(|v| mesh.vertices[v]);
            let len = mesh.edge_length(ie.edge);
            let fc = spaces.velocity.cell_of_triangle[ie.fluid].expect("interface fluid triangle");
            let pc = spaces.head.cell_of_triangle[ie.porous].expect("interface porous triangle");
            let mut q = InterfaceQuad {
                edge: ie.edge,
                fluid_cell: fc,
                porous_cell: pc,
                normal: ie.normal,
                tangent: ie.tangent,
                points: Vec::new(),
                weights: Vec::new(),
                u_vals: Vec::new(),
                phi_vals: Vec::new(),
            };
            for (s, w) in lr.points.iter().zip(&lr.weights) {
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                q.points.push(x);
                q.weights.push(w * len);
                q.u_vals.push(spaces.velocity.element.eval(fluid_geom[fc].to_ref(x)).0);
                q.phi_vals.push(spaces.head.element.eval(porous_geom[pc].to_ref(x)).0);
            }
            interface.push(q);
        }
        Ok(Self { mesh, spaces, rule, fluid_geom, porous_geom, tab_u, tab_p, tab_phi, interface })
    }

    pub fn n_velocity(&self) -> usize {
        self.spaces.n_velocity()
    }

    fn nsu(&self) -> usize {
        self.spaces.velocity.n_dofs()
    }

    fn scalar_mass(space: &ScalarSpace, geom: &[CellGeom], tab: &Tabulation, rule: &TriangleRule) -> CsrMatrix {
        let nb = space.element.n_basis();
        let mut t = TripletBuilder::with_capacity(space.n_dofs(), space.n_dofs(), geom.len() * nb * nb);
        for (c, g) in geom.iter().enumerate() {
            let dofs = &space.cell_dofs[c];
            let mut local = vec![0.0; nb * nb];
            for (q, w) in rule.weights.iter().enumerate() {
                let wq = w * g.det;
                let v = &tab.vals[q];
                for i in 0..nb {
                    for j in 0..nb {
                        local[i * nb + j] += wq * v[i] * v[j];
                    }
                }
            }
            for i in 0..nb {
                for j in 0..nb {
                    t.add(dofs[i], dofs[j], local[i * nb + j]);
                }
            }
        }
        t.build()
    }

    /// `int (K grad u) . grad v` with `K` sampled at quadrature points.
    fn scalar_stiffness(
        space: &ScalarSpace,
        geom: &[CellGeom],
        tab: &Tabulation,
        rule: &TriangleRule,
        k: &dyn Fn(Point) -> SymTensor,
    ) -> CsrMatrix {
        let nb = space.element.n_basis();
        let mut t = TripletBuilder::with_capacity(space.n_dofs(), space.n_dofs(), geom.len() * nb * nb);
        let mut grads = vec![[0.0; 2]; nb];
        for (c, g) in geom.iter().enumerate() {
            let dofs = &space.cell_dofs[c];
            let mut local = vec![0.0; nb * nb];
            for (q, (w, p)) in rule.weights.iter().zip(&rule.points).enumerate() {
                let wq = w * g.det;
                let kq = k(g.map(*p));
                for i in 0..nb {
                    grads[i] = g.grad(tab.grads[q][i]);
                }
                for i in 0..nb {
                    let kg = kq.apply(grads[i]);
                    for j in 0..nb {
                        local[i * nb + j] += wq * (kg[0] * grads[j][0] + kg[1] * grads[j][1]);
                    }
                }
            }
            for i in 0..nb {
                for j in 0..nb {
                    t.add(dofs[i], dofs[j], local[i * nb + j]);
                }
            }
        }
        t.build()
    }

    fn blocked(&self, s: &CsrMatrix) -> CsrMatrix {
        CsrMatrix::block(&[vec![Some(s), None], vec![None, Some(s)]]).expect("square blocks")
    }

    /// Velocity mass matrix, component-blocked.
    pub fn velocity_mass(&self) -> CsrMatrix {
        let s = Self::scalar_mass(&self.spaces.velocity, &self.fluid_geom, &self.tab_u, &self.rule);
        self.blocked(&s)
    }

    /// `nu (grad u, grad v)`.
    pub fn velocity_stiffness(&self, nu: f64) -> CsrMatrix {
        let s = Self::scalar_stiffness(&self.spaces.velocity, &self.fluid_geom, &self.tab_u, &self.rule, &|_| {
            SymTensor::isotropic(nu)
        });
        self.blocked(&s)
    }

    /// `(q, div v)` as an `n_p x n_u` matrix.
    pub fn divergence(&self) -> CsrMatrix {
        let (su, sp) = (&self.spaces.velocity, &self.spaces.pressure);
        let (nbu, nbp, ns) = (su.element.n_basis(), sp.element.n_basis(), su.n_dofs());
        let mut t = TripletBuilder::with_capacity(sp.n_dofs(), 2 * ns, self.fluid_geom.len() * nbu * nbp * 2);
        for (c, g) in self.fluid_geom.iter().enumerate() {
            let (du, dp) = (&su.cell_dofs[c], &sp.cell_dofs[c]);
            let mut local = vec![[0.0; 2]; nbp * nbu];
            for (q, w) in self.rule.weights.iter().enumerate() {
                let wq = w * g.det;
                for j in 0..nbu {
                    let gr = g.grad(self.tab_u.grads[q][j]);
                    for i in 0..nbp {
                        let pv = wq * self.tab_p.vals[q][i];
                        local[i * nbu + j][0] += pv * gr[0];
                        local[i * nbu + j][1] += pv * gr[1];
                    }
                }
            }
            for i in 0..nbp {
                for j in 0..nbu {
                    for comp in 0..2 {
                        t.add(dp[i], comp * ns + du[j], local[i * nbu + j][comp]);
                    }
                }
            }
        }
        t.build()
    }

    /// `(eta u.tau, v.tau)_Gamma`.
    pub fn tangential_matrix(&self, eta: &InterfaceCoefficient) -> Result<CsrMatrix> {
        let su = &self.spaces.velocity;
        let (nb, ns) = (su.element.n_basis(), su.n_dofs());
        let mut t = TripletBuilder::new(2 * ns, 2 * ns);
        for q in &self.interface {
            let dofs = &su.cell_dofs[q.fluid_cell];
            let tau = q.tangent;
            for (k, (&x, &w)) in q.points.iter().zip(&q.weights).enumerate() {
                let e = eta.at(x, tau);
                if !e.is_finite() {
                    return Err(Error::DegenerateTangentialConductivity(e));
                }
                let v = &q.u_vals[k];
                for i in 0..nb {
                    for j in 0..nb {
                        let base = w * e * v[i] * v[j];
                        for a in 0..2 {
                            for b in 0..2 {
                                t.add(a * ns + dofs[i], b * ns + dofs[j], base * tau[a] * tau[b]);
                            }
                        }
                    }
                }
            }
        }
        Ok(t.build())
    }

    /// `g (psi, v.n_f)_Gamma` as an `n_u x n_phi` matrix.
    pub fn interface_coupling(&self, g: f64) -> CsrMatrix {
        let (su, sh) = (&self.spaces.velocity, &self.spaces.head);
        let (nbu, nbh, ns) = (su.element.n_basis(), sh.element.n_basis(), su.n_dofs());
        let mut t = TripletBuilder::new(2 * ns, sh.n_dofs());
        for q in &self.interface {
            let (du, dh) = (&su.cell_dofs[q.fluid_cell], &sh.cell_dofs[q.porous_cell]);
            for k in 0..q.points.len() {
                let w = g * q.weights[k];
                for i in 0..nbu {
                    for m in 0..nbh {
                        let base = w * q.u_vals[k][i] * q.phi_vals[k][m];
                        for a in 0..2 {
                            t.add(a * ns + du[i], dh[m], base * q.normal[a]);
                        }
                    }
                }
            }
        }
        t.build()
    }

    /// Unweighted head mass matrix.
    pub fn head_mass(&self) -> CsrMatrix {
        Self::scalar_mass(&self.spaces.head, &self.porous_geom, &self.tab_phi, &self.rule)
    }

    pub fn pressure_mass(&self) -> CsrMatrix {
        Self::scalar_mass(&self.spaces.pressure, &self.fluid_geom, &self.tab_p, &self.rule)
    }

    /// `g (K grad phi, grad psi)` without any positivity check, so it also
    /// serves conductivity differences.
    pub fn head_stiffness(&self, k: &Conductivity, g: f64) -> CsrMatrix {
        match k {
            Conductivity::Constant(t) => {
                let t = t.scale(g);
                Self::scalar_stiffness(&self.spaces.head, &self.porous_geom, &self.tab_phi, &self.rule, &|_| t)
            }
            Conductivity::Field(f) => {
                Self::scalar_stiffness(&self.spaces.head, &self.porous_geom, &self.tab_phi, &self.rule, &|x| {
                    f(x).scale(g)
                })
            }
        }
    }

    /// Stiffness matrices for the three tensor components, so that a
    /// constant `K` gives `xx * A[0] + xy * A[1] + yy * A[2]`.
    pub fn head_stiffness_components(&self, g: f64) -> [CsrMatrix; 3] {
        [SymTensor::new(g, 0.0, 0.0), SymTensor::new(0.0, g, 0.0), SymTensor::new(0.0, 0.0, g)]
            .map(|t| Self::scalar_stiffness(&self.spaces.head, &self.porous_geom, &self.tab_phi, &self.rule, &|_| t))
    }

    /// Checks that `k` is symmetric positive definite at every porous
    /// quadrature point.
    pub fn check_spd(&self, k: &Conductivity) -> Result<()> {
        let pts: Vec<Point> = match k {
            Conductivity::Constant(_) => vec![self.porous_geom.first().map_or([0.0, 0.0], |g| g.map([1.0 / 3.0, 1.0 / 3.0]))],
            Conductivity::Field(_) => self
                .porous_geom
                .iter()
                .flat_map(|g| self.rule.points.iter().map(move |p| g.map(*p)))
                .collect(),
        };
        for x in pts {
            if !k.at(x).is_spd() {
                return Err(Error::NonSpdConductivity { x: x[0], y: x[1] });
            }
        }
        Ok(())
    }

    /// `{ d(w, w, v) }` over all velocity test functions, including the
    /// interface term `-1/2 (w.w, v.n_f)_Gamma`.
    ///
    /// The volume part is `(w.grad w, v) + 1/2 (div w w, v)`. The second
    /// term vanishes for pointwise solenoidal `w` and makes `d(w, w, w)`
    /// vanish for every `w` that is zero on the outer fluid boundary.
    pub fn convection_rhs(&self, w: &[f64]) -> Vec<f64> {
        let su = &self.spaces.velocity;
        let (nb, ns) = (su.element.n_basis(), su.n_dofs());
        assert_eq!(w.len(), 2 * ns);
        let mut out = vec![0.0; 2 * ns];
        let mut grads = vec![[0.0; 2]; nb];
        for (c, g) in self.fluid_geom.iter().enumerate() {
            let dofs = &su.cell_dofs[c];
            for (q, wt) in self.rule.weights.iter().enumerate() {
                let wq = wt * g.det;
                let vals = &self.tab_u.vals[q];
                let mut u = [0.0; 2];
                let mut du = [[0.0; 2]; 2];
                for i in 0..nb {
                    grads[i] = g.grad(self.tab_u.grads[q][i]);
                    for a in 0..2 {
                        let coef = w[a * ns + dofs[i]];
                        u[a] += coef * vals[i];
                        du[a][0] += coef * grads[i][0];
                        du[a][1] += coef * grads[i][1];
                    }
                }
                let half_div = 0.5 * (du[0][0] + du[1][1]);
                let conv = [
                    u[0] * du[0][0] + u[1] * du[0][1] + half_div * u[0],
                    u[0] * du[1][0] + u[1] * du[1][1] + half_div * u[1],
                ];
                for i in 0..nb {
                    let f = wq * vals[i];
                    out[dofs[i]] += f * conv[0];
                    out[ns + dofs[i]] += f * conv[1];
                }
            }
        }
        for q in &self.interface {
            let dofs = &su.cell_dofs[q.fluid_cell];
            for k in 0..q.points.len() {
                let v = &q.u_vals[k];
                let mut u = [0.0; 2];
                for i in 0..nb {
                    u[0] += w[dofs[i]] * v[i];
                    u[1] += w[ns + dofs[i]] * v[i];
                }
                let s = -0.5 * q.weights[k] * (u[0] * u[0] + u[1] * u[1]);
                for i in 0..nb {
                    out[dofs[i]] += s * v[i] * q.normal[0];
                    out[ns + dofs[i]] += s * v[i] * q.normal[1];
                }
            }
        }
        out
    }

    /// `(f, v)` over the velocity space.
    pub fn velocity_load(&self, f: &dyn Fn(Point) -> [f64; 2]) -> Vec<f64> {
        self.velocity_load_with_norm(f).0
    }

    /// `(f, v)` together with `||f||^2`.
    pub fn velocity_load_with_norm(&self, f: &dyn Fn(Point) -> [f64; 2]) -> (Vec<f64>, f64) {
        let su = &self.spaces.velocity;
        let (nb, ns) = (su.element.n_basis(), su.n_dofs());
        let mut out = vec![0.0; 2 * ns];
        let mut sq = 0.0;
        for (c, g) in self.fluid_geom.iter().enumerate() {
            let dofs = &su.cell_dofs[c];
            for (q, (wt, p)) in self.rule.weights.iter().zip(&self.rule.points).enumerate() {
                let fx = f(g.map(*p));
                let wq = wt * g.det;
                sq += wq * (fx[0] * fx[0] + fx[1] * fx[1]);
                for i in 0..nb {
                    let v = wq * self.tab_u.vals[q][i];
                    out[dofs[i]] += v * fx[0];
                    out[ns + dofs[i]] += v * fx[1];
                }
            }
        }
        (out, sq)
    }

    /// `(f, psi)` over the head space.
    pub fn head_load(&self, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
        self.head_load_with_norm(f).0
    }

    /// `(f, psi)` together with `||f||^2`.
    pub fn head_load_with_norm(&self, f: &dyn Fn(Point) -> f64) -> (Vec<f64>, f64) {
        let sh = &self.spaces.head;
        let nb = sh.element.n_basis();
        let mut out = vec![0.0; sh.n_dofs()];
        let mut sq = 0.0;
        for (c, g) in self.porous_geom.iter().enumerate() {
            let dofs = &sh.cell_dofs[c];
            for (q, (wt, p)) in self.rule.weights.iter().zip(&self.rule.points).enumerate() {
                let wq = wt * g.det;
                let v = f(g.map(*p));
                sq += wq * v * v;
                for i in 0..nb {
                    out[dofs[i]] += wq * v * self.tab_phi.vals[q][i];
                }
            }
        }
        (out, sq)
    }

    /// `(gn, v.n_f)_Gamma + (gt, v.tau)_Gamma` where `g(x, n_f, tau)`
    /// returns `[gn, gt]`.
    pub fn interface_velocity_load(&self, g: &dyn Fn(Point, [f64; 2], [f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let su = &self.spaces.velocity;
        let (nb, ns) = (su.element.n_basis(), su.n_dofs());
        let mut out = vec![0.0; 2 * ns];
        for q in &self.interface {
            let dofs = &su.cell_dofs[q.fluid_cell];
            for (k, &x) in q.points.iter().enumerate() {
                let [a, b] = g(x, q.normal, q.tangent);
                let vec = [a * q.normal[0] + b * q.tangent[0], a * q.normal[1] + b * q.tangent[1]];
                for i in 0..nb {
                    let s = q.weights[k] * q.u_vals[k][i];
                    out[dofs[i]] += s * vec[0];
                    out[ns + dofs[i]] += s * vec[1];
                }
            }
        }
        out
    }

    /// `(f, psi)_Gamma` where `f(x, n_f)`.
    pub fn interface_head_load(&self, f: &dyn Fn(Point, [f64; 2]) -> f64) -> Vec<f64> {
        let sh = &self.spaces.head;
        let nb = sh.element.n_basis();
        let mut out = vec![0.0; sh.n_dofs()];
        for q in &self.interface {
            let dofs = &sh.cell_dofs[q.porous_cell];
            for (k, &x) in q.points.iter().enumerate() {
                let s = q.weights[k] * f(x, q.normal);
                for i in 0..nb {
                    out[dofs[i]] += s * q.phi_vals[k][i];
                }
            }
        }
        out
    }

    /// `int_{Omega_f} f` with the assembly rule.
    pub fn integrate_fluid(&self, f: &dyn Fn(Point) -> f64) -> f64 {
        Self::integrate(&self.fluid_geom, &self.rule, f)
    }

    pub fn integrate_porous(&self, f: &dyn Fn(Point) -> f64) -> f64 {
        Self::integrate(&self.porous_geom, &self.rule, f)
    }

    fn integrate(geom: &[CellGeom], rule: &TriangleRule, f: &dyn Fn(Point) -> f64) -> f64 {
        geom.iter()
            .map(|g| g.det * rule.weights.iter().zip(&rule.points).map(|(w, p)| w * f(g.map(*p))).sum::<f64>())
            .sum()
    }

    /// `int_Gamma f(x, n_f, tau)`.
    pub fn integrate_interface(&self, f: &dyn Fn(Point, [f64; 2], [f64; 2]) -> f64) -> f64 {
        self.interface
            .iter()
            .map(|q| q.points.iter().zip(&q.weights).map(|(&x, w)| w * f(x, q.normal, q.tangent)).sum::<f64>())
            .sum()
    }

    pub fn interpolate_velocity(&self, f: &dyn Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let coords = &self.spaces.velocity.dof_coords;
        let ns = coords.len();
        let mut out = vec![0.0; 2 * ns];
        for (i, &x) in coords.iter().enumerate() {
            let v = f(x);
            out[i] = v[0];
            out[ns + i] = v[1];
        }
        out
    }

    pub fn interpolate_scalar(space: &ScalarSpace, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
        space.dof_coords.iter().map(|&x| f(x)).collect()
    }

    pub fn interpolate_pressure(&self, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
        Self::interpolate_scalar(&self.spaces.pressure, f)
    }

    pub fn interpolate_head(&self, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
        Self::interpolate_scalar(&self.spaces.head, f)
    }

    fn error_rule(&self, deg: usize) -> TriangleRule {
        triangle_rule(2 * deg + 6)
    }

    /// `|| u - u_h ||_{L2(Omega_f)}` against an analytic field.
    pub fn velocity_l2_error(&self, uh: &[f64], exact: &dyn Fn(Point) -> [f64; 2]) -> f64 {
        let su = &self.spaces.velocity;
        let rule = self.error_rule(su.degree());
        let tab = Tabulation::new(&su.element, &rule.points);
        let ns = su.n_dofs();
        let mut sum = 0.0;
        for (c, g) in self.fluid_geom.iter().enumerate() {
            let dofs = &su.cell_dofs[c];
            for (q, (wt, p)) in rule.weights.iter().zip(&rule.points).enumerate() {
                let ex = exact(g.map(*p));
                let mut u = [0.0; 2];
                for (i, &d) in dofs.iter().enumerate() {
                    u[0] += uh[d] * tab.vals[q][i];
                    u[1] += uh[ns + d] * tab.vals[q][i];
                }
                sum += wt * g.det * ((u[0] - ex[0]).powi(2) + (u[1] - ex[1]).powi(2));
            }
        }
        sum.sqrt()
    }

    fn scalar_l2_error(space: &ScalarSpace, geom: &[CellGeom], rule: &TriangleRule, vh: &[f64], exact: &dyn Fn(Point) -> f64) -> f64 {
        let tab = Tabulation::new(&space.element, &rule.points);
        let mut sum = 0.0;
        for (c, g) in geom.iter().enumerate() {
            let dofs = &space.cell_dofs[c];
            for (q, (wt, p)) in rule.weights.iter().zip(&rule.points).enumerate() {
                let v: f64 = dofs.iter().enumerate().map(|(i, &d)| vh[d] * tab.vals[q][i]).sum();
                sum += wt * g.det * (v - exact(g.map(*p))).powi(2);
            }
        }
        sum.sqrt()
    }

    pub fn pressure_l2_error(&self, ph: &[f64], exact: &dyn Fn(Point) -> f64) -> f64 {
        let rule = self.error_rule(self.spaces.pressure.degree());
        Self::scalar_l2_error(&self.spaces.pressure, &self.fluid_geom, &rule, ph, exact)
    }

    pub fn head_l2_error(&self, phih: &[f64], exact: &dyn Fn(Point) -> f64) -> f64 {
        let rule = self.error_rule(self.spaces.head.degree());
        Self::scalar_l2_error(&self.spaces.head, &self.porous_geom, &rule, phih, exact)
    }

    /// Head values at mesh vertices (porous vertices only; others `None`).
    pub fn head_at_vertices(&self, phi: &[f64]) -> Vec<Option<f64>> {
        self.scalar_at_vertices(&self.spaces.head, phi)
    }

    pub fn pressure_at_vertices(&self, p: &[f64]) -> Vec<Option<f64>> {
        self.scalar_at_vertices(&self.spaces.pressure, p)
    }

    pub fn velocity_at_vertices(&self, u: &[f64]) -> Vec<Option<[f64; 2]>> {
        let ns = self.nsu();
        let x = self.scalar_at_vertices(&self.spaces.velocity, &u[..ns]);
        let y = self.scalar_at_vertices(&self.spaces.velocity, &u[ns..]);
        x.into_iter().zip(y).map(|(a, b)| a.zip(b).map(|(a, b)| [a, b])).collect()
    }

    fn scalar_at_vertices(&self, space: &ScalarSpace, v: &[f64]) -> Vec<Option<f64>> {
        // vertex nodes come first in every cell
        let mut out = vec![None; self.mesh.vertices.len()];
        for (c, &t) in space.cells.iter().enumerate() {
            for (k, &vert) in self.mesh.triangles[t].iter().enumerate() {
                out[vert] = Some(v[space.cell_dofs[c][k]]);
            }
        }
        out
    }

    /// Integrated normal flux `int_seg u . n` over a named boundary segment,
    /// with `n` the outward normal of the fluid region.
    pub fn boundary_flux(&self, u: &[f64], edges: &[usize]) -> f64 {
        let su = &self.spaces.velocity;
        let ns = su.n_dofs();
        let lr = line_rule(2 * su.degree());
        let mut total = 0.0;
        for &bi in edges {
            let be = &self.mesh.gamma_f[bi];
            let c = su.cell_of_triangle[be.triangle].expect("fluid boundary edge");
            let g = &self.fluid_geom[c];
            let [a, b] = self.mesh.edges[be.edge].map(|v| self.mesh.vertices[v]);
            let len = self.mesh.edge_length(be.edge);
            for (s, w) in lr.points.iter().zip(&lr.weights) {
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let vals = su.element.eval(g.to_ref(x)).0;
                let mut uu = [0.0; 2];
                for (i, &d) in su.cell_dofs[c].iter().enumerate() {
                    uu[0] += u[d] * vals[i];
                    uu[1] += u[ns + d] * vals[i];
                }
                total += w * len * (uu[0] * be.normal[0] + uu[1] * be.normal[1]);
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_coupled_rect_mesh;

    fn disc(n: usize) -> Discretization {
        Discretization::new(build_coupled_rect_mesh(n).unwrap(), 2, 1, 2).unwrap()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn mass_of_constant_velocity_is_area() {
        let d = disc(3);
        let u = d.interpolate_velocity(&|_| [1.0, 0.0]);
        let m = d.velocity_mass();
        assert!((dot(&u, &m.matvec(&u)) - 1.0).abs() < 1e-13);
        assert!(m.asymmetry() < 1e-14);
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let d = disc(3);
        let a = d.velocity_stiffness(1.0);
        let one = vec![1.0; d.n_velocity()];
        assert!(a.matvec(&one).iter().all(|v| v.abs() < 1e-12));
        let ap = d.head_stiffness(&Conductivity::isotropic(1.0), 1.0);
        let one = vec![1.0; d.spaces.n_head()];
        assert!(ap.matvec(&one).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn coupling_of_unit_normal_velocity() {
        let d = disc(4);
        let c = d.interface_coupling(2.5);
        let u = d.interpolate_velocity(&|_| [0.0, -1.0]);
        let psi = vec![1.0; d.spaces.n_head()];
        assert!((dot(&u, &c.matvec(&psi)) - 2.5).abs() < 1e-13);
    }

    #[test]
    fn head_stiffness_components_recombine() {
        let d = disc(2);
        let k = SymTensor::new(1.3, 0.2, 0.7);
        let direct = d.head_stiffness(&Conductivity::Constant(k), 2.0);
        let [axx, axy, ayy] = d.head_stiffness_components(2.0);
        let comb = CsrMatrix::linear_combination(&[(k.xx, &axx), (k.xy, &axy), (k.yy, &ayy)]);
        let diff = CsrMatrix::linear_combination(&[(1.0, &direct), (-1.0, &comb)]);
        assert!(diff.values.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn convection_is_skew_for_fields_vanishing_on_the_outer_boundary() {
        let d = disc(3);
        let fixed = d.spaces.velocity_constrained();
        let w: Vec<f64> = (0..d.n_velocity())
            .map(|i| if fixed[i] { 0.0 } else { ((i * 37 % 101) as f64 / 50.0 - 1.0) * 3.0 })
            .collect();
        let scale = dot(&w, &d.velocity_mass().matvec(&w)).powf(1.5);
        assert!(dot(&d.convection_rhs(&w), &w).abs() < 1e-12 * scale);
    }

    #[test]
    fn boundary_flux_of_uniform_inflow() {
        let d = disc(4);
        let u = d.interpolate_velocity(&|_| [1.0, 0.0]);
        // left side x = 0 of the fluid region: outward normal (-1, 0)
        let left: Vec<usize> = (0..d.mesh.gamma_f.len())
            .filter(|&i| d.mesh.gamma_f[i].normal == [-1.0, 0.0])
            .collect();
        assert!((d.boundary_flux(&u, &left) + 1.0).abs() < 1e-13);
    }
}
