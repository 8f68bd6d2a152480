//! Coefficient matrices of the two subproblems, restricted to free dofs,
//! with Dirichlet lifting.

use crate::error::Result;
use crate::fem::SystemMatrices;
use crate::sparse::{factorize, CsrMatrix, Factorization};
use crate::tableau::GbdfTableau;

fn split(constrained: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let free = (0..constrained.len()).filter(|&i| !constrained[i]).collect();
    let fixed = (0..constrained.len()).filter(|&i| constrained[i]).collect();
    (free, fixed)
}

/// Velocity/pressure saddle system
/// `[[W, -B^T], [-B, 0]]` with `W = alpha/dt M_f + b0 (A_f + S_mean)`, acting
/// on free velocity dofs and the aggregated pressure `B(p^{n+1})`.
#[derive(Debug, Clone)]
pub struct NsOperator {
    pub matrix: CsrMatrix,
    pub free: Vec<usize>,
    pub fixed: Vec<usize>,
    pub n_u: usize,
    pub n_p: usize,
    w_fc: CsrMatrix,
    b_c: CsrMatrix,
}

pub fn velocity_block(sm: &SystemMatrices, t: &GbdfTableau, dt: f64) -> CsrMatrix {
    CsrMatrix::linear_combination(&[(t.alpha / dt, &sm.m_f), (t.b0(), &sm.a_f), (t.b0(), &sm.s_bjs_mean)])
}

/// Builds the saddle operator; `constrained` flags Dirichlet velocity dofs.
pub fn build_ns_matrix(sm: &SystemMatrices, t: &GbdfTableau, dt: f64, constrained: &[bool]) -> NsOperator {
    let w = velocity_block(sm, t, dt);
    let (free, fixed) = split(constrained);
    let n_p = sm.b_div.nrows;
    let all_p: Vec<usize> = (0..n_p).collect();
    let w_ff = w.submatrix(&free, &free);
    let w_fc = w.submatrix(&free, &fixed);
    let b_f = sm.b_div.submatrix(&all_p, &free).scaled(-1.0);
    let b_c = sm.b_div.submatrix(&all_p, &fixed);
    let b_ft = b_f.transpose();
    let matrix = CsrMatrix::block(&[vec![Some(&w_ff), Some(&b_ft)], vec![Some(&b_f), None]]).expect("consistent blocks");
    NsOperator { matrix, free, fixed, n_u: constrained.len(), n_p, w_fc, b_c }
}

impl NsOperator {
    /// Reduced right-hand side from full momentum and continuity vectors and
    /// a full velocity vector carrying the Dirichlet values.
    pub fn reduce_rhs(&self, momentum: &[f64], continuity: &[f64], lifting: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = self.fixed.iter().map(|&i| lifting[i]).collect();
        let mut out: Vec<f64> = self.free.iter().map(|&i| momentum[i]).collect();
        self.w_fc.matvec_add(-1.0, &g, &mut out);
        let mut cont = continuity.to_vec();
        self.b_c.matvec_add(1.0, &g, &mut cont);
        out.extend(cont);
        out
    }

    /// Full velocity and aggregated pressure from a reduced solution.
    pub fn expand(&self, sol: &[f64], lifting: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![0.0; self.n_u];
        for (k, &i) in self.free.iter().enumerate() {
            u[i] = sol[k];
        }
        for &i in &self.fixed {
            u[i] = lifting[i];
        }
        (u, sol[self.free.len()..].to_vec())
    }
}

/// Head system `alpha/dt M_p + b0 A_p(Kbar)` on free dofs.
#[derive(Debug, Clone)]
pub struct DarcyOperator {
    pub matrix: CsrMatrix,
    pub free: Vec<usize>,
    pub fixed: Vec<usize>,
    pub n: usize,
    k_fc: CsrMatrix,
}

pub fn head_block(sm: &SystemMatrices, t: &GbdfTableau, dt: f64) -> CsrMatrix {
    CsrMatrix::linear_combination(&[(t.alpha / dt, &sm.m_p), (t.b0(), &sm.a_p_mean)])
}

pub fn build_darcy_matrix(sm: &SystemMatrices, t: &GbdfTableau, dt: f64, constrained: &[bool]) -> DarcyOperator {
    let k = head_block(sm, t, dt);
    let (free, fixed) = split(constrained);
    DarcyOperator { matrix: k.submatrix(&free, &free), k_fc: k.submatrix(&free, &fixed), free, fixed, n: constrained.len() }
}

impl DarcyOperator {
    pub fn reduce_rhs(&self, rhs: &[f64], lifting: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = self.fixed.iter().map(|&i| lifting[i]).collect();
        let mut out: Vec<f64> = self.free.iter().map(|&i| rhs[i]).collect();
        self.k_fc.matvec_add(-1.0, &g, &mut out);
        out
    }

    pub fn expand(&self, sol: &[f64], lifting: &[f64]) -> Vec<f64> {
        let mut phi = vec![0.0; self.n];
        for (k, &i) in self.free.iter().enumerate() {
            phi[i] = sol[k];
        }
        for &i in &self.fixed {
            phi[i] = lifting[i];
        }
        phi
    }
}

/// Both operators with their factors, for one tableau and step size.
#[derive(Debug)]
pub struct FactoredPair {
    pub ns: NsOperator,
    pub darcy: DarcyOperator,
    pub ns_fact: Factorization,
    pub darcy_fact: Factorization,
}

impl FactoredPair {
    pub fn new(sm: &SystemMatrices, t: &GbdfTableau, dt: f64, u_constrained: &[bool], phi_constrained: &[bool]) -> Result<Self> {
        let ns = build_ns_matrix(sm, t, dt, u_constrained);
        let darcy = build_darcy_matrix(sm, t, dt, phi_constrained);
        let ns_fact = factorize(&ns.matrix)?;
        let darcy_fact = factorize(&darcy.matrix)?;
        Ok(Self { ns, darcy, ns_fact, darcy_fact })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_static, Conductivity, Discretization, InterfaceCoefficient, Physics};
    use crate::mesh::build_coupled_rect_mesh;
    use crate::tableau::make_tableau;

    fn sm() -> (Discretization, SystemMatrices) {
        let d = Discretization::new(build_coupled_rect_mesh(2).unwrap(), 2, 1, 2).unwrap();
        let sm = assemble_static(&d, &Physics::default(), &Conductivity::isotropic(2.0), &InterfaceCoefficient::Constant(1.0))
            .unwrap();
        (d, sm)
    }

    #[test]
    fn velocity_block_weights() {
        let (_, sm) = sm();
        let t = make_tableau(2, 3.0).unwrap();
        let dt = 0.1;
        let w = velocity_block(&sm, &t, dt);
        let expect = CsrMatrix::linear_combination(&[(35.0, &sm.m_f), (3.0, &sm.a_f), (3.0, &sm.s_bjs_mean)]);
        let diff = CsrMatrix::linear_combination(&[(1.0, &w), (-1.0, &expect)]);
        assert!(diff.values.iter().all(|v| v.abs() < 1e-12));
        // large dt drops the mass term
        let w_inf = velocity_block(&sm, &t, 1e300);
        let stiff = CsrMatrix::linear_combination(&[(3.0, &sm.a_f), (3.0, &sm.s_bjs_mean)]);
        let diff = CsrMatrix::linear_combination(&[(1.0, &w_inf), (-1.0, &stiff)]);
        assert!(diff.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn darcy_block_is_spd() {
        let (d, sm) = sm();
        let t = make_tableau(3, 3.0).unwrap();
        let op = build_darcy_matrix(&sm, &t, 0.05, &d.spaces.head.constrained);
        assert!(op.matrix.asymmetry() < 1e-12);
        // Gershgorin is not enough here; use a dense Cholesky as the oracle
        let a = op.matrix.to_dense();
        let n = a.len();
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    let v = a[i][i] - s;
                    assert!(v > 0.0, "not positive definite at {i}");
                    l[i][i] = v.sqrt();
                } else {
                    l[i][j] = (a[i][j] - s) / l[j][j];
                }
            }
        }
    }

    #[test]
    fn lifting_round_trip() {
        let (d, sm) = sm();
        let t = make_tableau(2, 3.0).unwrap();
        let cons = d.spaces.velocity_constrained();
        let op = build_ns_matrix(&sm, &t, 0.1, &cons);
        let lift: Vec<f64> = (0..op.n_u).map(|i| i as f64).collect();
        let sol: Vec<f64> = (0..op.free.len() + op.n_p).map(|i| -(i as f64)).collect();
        let (u, x) = op.expand(&sol, &lift);
        assert_eq!(x.len(), op.n_p);
        for &i in &op.fixed {
            assert_eq!(u[i], lift[i]);
        }
    }
}
