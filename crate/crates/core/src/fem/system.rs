//! Mean-coefficient operators shared by all realizations, fluctuation
//! operators, and quadratic diagnostics.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use crate::error::{Error, Result};
use crate::fem::assembly::{Discretization, Physics};
use crate::fem::fields::{Conductivity, InterfaceCoefficient};
use crate::sparse::CsrMatrix;

/// Assembled operators over full (unconstrained) dof sets.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    /// Velocity mass.
    pub m_f: Arc<CsrMatrix>,
    /// `nu (grad u, grad v)`.
    pub a_f: Arc<CsrMatrix>,
    /// `(q, div v)`, pressure rows by velocity columns.
    pub b_div: Arc<CsrMatrix>,
    /// `(etabar u.tau, v.tau)_Gamma`.
    pub s_bjs_mean: Arc<CsrMatrix>,
    /// `g (psi, v.n_f)_Gamma`, velocity rows by head columns.
    pub c_gamma: Arc<CsrMatrix>,
    /// `g S (phi, psi)`.
    pub m_p: Arc<CsrMatrix>,
    /// `g (Kbar grad phi, grad psi)`.
    pub a_p_mean: Arc<CsrMatrix>,
}

/// Operators that do not depend on the conductivity.
#[derive(Debug, Clone)]
pub struct SharedMatrices {
    pub m_f: Arc<CsrMatrix>,
    pub a_f: Arc<CsrMatrix>,
    pub b_div: Arc<CsrMatrix>,
    pub c_gamma: Arc<CsrMatrix>,
    pub m_p: Arc<CsrMatrix>,
    /// Head stiffness per tensor component (`xx`, `xy`, `yy`), `g`-weighted.
    pub a_p_parts: Arc<[CsrMatrix; 3]>,
    /// `(u.tau, v.tau)_Gamma`.
    pub s_unit: Arc<CsrMatrix>,
}

impl SharedMatrices {
    pub fn assemble(disc: &Discretization, physics: &Physics) -> Result<Self> {
        Ok(Self {
            m_f: Arc::new(disc.velocity_mass()),
            a_f: Arc::new(disc.velocity_stiffness(physics.nu)),
            b_div: Arc::new(disc.divergence()),
            c_gamma: Arc::new(disc.interface_coupling(physics.g)),
            m_p: Arc::new(disc.head_mass().scaled(physics.g * physics.s_storage)),
            a_p_parts: Arc::new(disc.head_stiffness_components(physics.g)),
            s_unit: Arc::new(disc.tangential_matrix(&InterfaceCoefficient::Constant(1.0))?),
        })
    }

    /// `g (K grad phi, grad psi)`; constant tensors reuse the component
    /// matrices.
    pub fn head_stiffness(&self, disc: &Discretization, k: &Conductivity, physics: &Physics) -> CsrMatrix {
        match k {
            Conductivity::Constant(t) => {
                let [xx, xy, yy] = &*self.a_p_parts;
                CsrMatrix::linear_combination(&[(t.xx, xx), (t.xy, xy), (t.yy, yy)])
            }
            Conductivity::Field(_) => disc.head_stiffness(k, physics.g),
        }
    }

    pub fn tangential(&self, disc: &Discretization, eta: &InterfaceCoefficient) -> Result<CsrMatrix> {
        match eta {
            InterfaceCoefficient::Constant(c) => Ok(self.s_unit.scaled(*c)),
            InterfaceCoefficient::Field(_) => disc.tangential_matrix(eta),
        }
    }

    pub fn with_means(
        &self,
        disc: &Discretization,
        physics: &Physics,
        kbar: &Conductivity,
        etabar: &InterfaceCoefficient,
    ) -> Result<SystemMatrices> {
        disc.check_spd(kbar)?;
        Ok(SystemMatrices {
            m_f: self.m_f.clone(),
            a_f: self.a_f.clone(),
            b_div: self.b_div.clone(),
            s_bjs_mean: Arc::new(self.tangential(disc, etabar)?),
            c_gamma: self.c_gamma.clone(),
            m_p: self.m_p.clone(),
            a_p_mean: Arc::new(self.head_stiffness(disc, kbar, physics)),
        })
    }
}

/// Assembles all seven operators for the given mean coefficients.
pub fn assemble_static(
    disc: &Discretization,
    physics: &Physics,
    kbar: &Conductivity,
    etabar: &InterfaceCoefficient,
) -> Result<SystemMatrices> {
    SharedMatrices::assemble(disc, physics)?.with_means(disc, physics, kbar, etabar)
}

/// `((eta_j - etabar) w.tau, v.tau)_Gamma` over all velocity test functions.
pub fn apply_fluctuation_bjs(
    disc: &Discretization,
    eta_j: &InterfaceCoefficient,
    etabar: &InterfaceCoefficient,
    w: &[f64],
) -> Result<Vec<f64>> {
    Ok(disc.tangential_matrix(&eta_j.minus(etabar))?.matvec(w))
}

/// `g ((K_j - Kbar) grad psi, grad chi)` over all head test functions.
pub fn apply_fluctuation_k(disc: &Discretization, g: f64, k_j: &Conductivity, kbar: &Conductivity, psi: &[f64]) -> Vec<f64> {
    disc.head_stiffness(&k_j.minus(kbar), g).matvec(psi)
}

fn quad(m: &CsrMatrix, x: &[f64]) -> f64 {
    x.iter().zip(m.matvec(x)).map(|(a, b)| a * b).sum()
}

/// `||u||_{L2}` from a mass matrix.
pub fn l2_norm(mass: &CsrMatrix, f: &[f64]) -> f64 {
    quad(mass, f).max(0.0).sqrt()
}

/// `1/2 ||u||^2 + 1/2 g S ||phi||^2`, where `sm.m_p` already carries `g S`.
pub fn energy(sm: &SystemMatrices, u: &[f64], phi: &[f64]) -> f64 {
    0.5 * quad(&sm.m_f, u) + 0.5 * quad(&sm.m_p, phi)
}

/// `||u.tau||_{L2(Gamma)}`.
pub fn interface_tangential_norm(s_unit: &CsrMatrix, u: &[f64]) -> f64 {
    quad(s_unit, u).max(0.0).sqrt()
}

/// `sup_q |(q, div u)| / ||q||` over the discrete pressure space.
pub fn divergence_residual(disc: &Discretization, b_div: &CsrMatrix, u: &[f64]) -> Result<f64> {
    let r = b_div.matvec(u);
    let mp = disc.pressure_mass();
    let n = mp.nrows;
    let mut trips = Vec::with_capacity(mp.nnz());
    for i in 0..n {
        for (j, v) in mp.row(i) {
            trips.push(Triplet::new(i, j, v));
        }
    }
    let singular = |e: String| Error::SingularMatrix { rows: n, cols: n, reason: e };
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).map_err(|e| singular(format!("{e:?}")))?;
    let llt = m.sp_cholesky(Side::Lower).map_err(|e| singular(format!("{e:?}")))?;
    let mut x = faer::Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
    llt.solve_in_place(x.as_mut());
    let s: f64 = (0..n).map(|i| x[(i, 0)] * r[i]).sum();
    Ok(s.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::SymTensor;
    use crate::mesh::build_coupled_rect_mesh;

    fn setup() -> (Discretization, SystemMatrices) {
        let d = Discretization::new(build_coupled_rect_mesh(4).unwrap(), 2, 1, 2).unwrap();
        let sm = assemble_static(&d, &Physics::default(), &Conductivity::isotropic(1.0), &InterfaceCoefficient::Constant(1.0))
            .unwrap();
        (d, sm)
    }

    #[test]
    fn symmetric_operators() {
        let (_, sm) = setup();
        for m in [&sm.m_f, &sm.m_p, &sm.a_f, &sm.a_p_mean, &sm.s_bjs_mean] {
            assert!(m.asymmetry() <= 1e-12);
        }
    }

    #[test]
    fn energy_of_unit_flow() {
        let (d, sm) = setup();
        let u = d.interpolate_velocity(&|_| [1.0, 0.0]);
        let phi = vec![0.0; d.spaces.n_head()];
        assert!((energy(&sm, &u, &phi) - 0.5).abs() < 1e-13);
        assert_eq!(energy(&sm, &vec![0.0; u.len()], &phi), 0.0);
    }

    #[test]
    fn fluctuations_vanish_for_equal_coefficients() {
        let (d, _) = setup();
        let w = d.interpolate_velocity(&|x| [x[1], x[0]]);
        let e = InterfaceCoefficient::Constant(0.7);
        assert!(apply_fluctuation_bjs(&d, &e, &e, &w).unwrap().iter().all(|v| *v == 0.0));
        let k = Conductivity::Constant(SymTensor::new(1.0, 0.1, 2.0));
        let psi = d.interpolate_head(&|x| x[0] * x[1]);
        assert!(apply_fluctuation_k(&d, 1.0, &k, &k, &psi).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn divergence_free_interpolant() {
        let (d, sm) = setup();
        let u = d.interpolate_velocity(&|x| [x[1], x[0]]);
        assert!(divergence_residual(&d, &sm.b_div, &u).unwrap() <= 1e-12);
        let u = d.interpolate_velocity(&|x| [x[0], 0.0]);
        // div u = 1, so the residual is ||1|| = sqrt(|Omega_f|)
        assert!((divergence_residual(&d, &sm.b_div, &u).unwrap() - 1.0).abs() < 1e-12);
    }
}
