//! Manufactured solution on the rectangle `[0,1] x [-1,1]`, its volume and
//! interface sources, and error measurement.

pub mod study;

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::Result;
use crate::fem::{eta_field, Conductivity, Discretization, InterfaceCoefficient, Physics};
use crate::mesh::Point;
use crate::sav::SavParams;
use crate::scheme::input::{
    InterfaceSources, InterfaceTimeFn, RealizationInput, ScalarTimeFn, VectorTimeFn, VelocityBoundary,
};

/// Smooth fields with the derivatives needed to build sources.
///
/// `grad_u(t, x)[a][b]` is `d u_a / d x_b`.
pub trait AnalyticSolution: Send + Sync {
    fn u(&self, t: f64, x: Point) -> [f64; 2];
    fn grad_u(&self, t: f64, x: Point) -> [[f64; 2]; 2];
    fn lap_u(&self, t: f64, x: Point) -> [f64; 2];
    fn u_t(&self, t: f64, x: Point) -> [f64; 2];
    fn p(&self, t: f64, x: Point) -> f64;
    fn grad_p(&self, t: f64, x: Point) -> [f64; 2];
    fn phi(&self, t: f64, x: Point) -> f64;
    fn grad_phi(&self, t: f64, x: Point) -> [f64; 2];
    /// `[phi_xx, phi_xy, phi_yy]`
    fn hess_phi(&self, t: f64, x: Point) -> [f64; 3];
    fn phi_t(&self, t: f64, x: Point) -> f64;
}

/// `phi = (sin(pi x) cos(pi y) + 1) e^t`, `p = cos(pi x) cos(pi y) e^t`,
/// `u = [pi sin(pi x) cos(pi y) + x + 2y, -pi cos(pi x) sin(pi y) - y - 2x] e^t`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSolution;

pub fn exact_solution() -> ExactSolution {
    ExactSolution
}

fn trig(x: Point) -> (f64, f64, f64, f64) {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    (sx, cx, sy, cy)
}

impl AnalyticSolution for ExactSolution {
    fn u(&self, t: f64, x: Point) -> [f64; 2] {
        let (sx, cx, sy, cy) = trig(x);
        let e = t.exp();
        [(PI * sx * cy + x[0] + 2.0 * x[1]) * e, (-PI * cx * sy - x[1] - 2.0 * x[0]) * e]
    }

    fn grad_u(&self, t: f64, x: Point) -> [[f64; 2]; 2] {
        let (sx, cx, sy, cy) = trig(x);
        let (e, p2) = (t.exp(), PI * PI);
        [[(p2 * cx * cy + 1.0) * e, (-p2 * sx * sy + 2.0) * e], [(p2 * sx * sy - 2.0) * e, (-p2 * cx * cy - 1.0) * e]]
    }

    fn lap_u(&self, t: f64, x: Point) -> [f64; 2] {
        let (sx, cx, sy, cy) = trig(x);
        let (e, p3) = (t.exp(), PI * PI * PI);
        [-2.0 * p3 * sx * cy * e, 2.0 * p3 * cx * sy * e]
    }

    fn u_t(&self, t: f64, x: Point) -> [f64; 2] {
        self.u(t, x)
    }

    fn p(&self, t: f64, x: Point) -> f64 {
        let (_, cx, _, cy) = trig(x);
        cx * cy * t.exp()
    }

    fn grad_p(&self, t: f64, x: Point) -> [f64; 2] {
        let (sx, cx, sy, cy) = trig(x);
        let e = t.exp();
        [-PI * sx * cy * e, -PI * cx * sy * e]
    }

    fn phi(&self, t: f64, x: Point) -> f64 {
        let (sx, _, _, cy) = trig(x);
        (sx * cy + 1.0) * t.exp()
    }

    fn grad_phi(&self, t: f64, x: Point) -> [f64; 2] {
        let (sx, cx, sy, cy) = trig(x);
        let e = t.exp();
        [PI * cx * cy * e, -PI * sx * sy * e]
    }

    fn hess_phi(&self, t: f64, x: Point) -> [f64; 3] {
        let (sx, cx, sy, cy) = trig(x);
        let (e, p2) = (t.exp(), PI * PI);
        [-p2 * sx * cy * e, -p2 * cx * sy * e, -p2 * sx * cy * e]
    }

    fn phi_t(&self, t: f64, x: Point) -> f64 {
        self.phi(t, x)
    }
}

/// `f_f = u_t - nu lap u + (u.grad) u + grad p` and
/// `f_p = S phi_t - div(K grad phi)`.
///
/// For spatially varying `K` the divergence of `K` is taken by central
/// differences with step `1e-6`.
pub fn mms_sources(ex: Arc<dyn AnalyticSolution>, physics: &Physics, k: &Conductivity) -> (VectorTimeFn, ScalarTimeFn) {
    let nu = physics.nu;
    let ex_f = ex.clone();
    let f_f: VectorTimeFn = Arc::new(move |t, x| {
        let (u, gu, lu, ut, gp) = (ex_f.u(t, x), ex_f.grad_u(t, x), ex_f.lap_u(t, x), ex_f.u_t(t, x), ex_f.grad_p(t, x));
        let mut f = [0.0; 2];
        for a in 0..2 {
            f[a] = ut[a] - nu * lu[a] + u[0] * gu[a][0] + u[1] * gu[a][1] + gp[a];
        }
        f
    });
    let s = physics.s_storage;
    let k = k.clone();
    let f_p: ScalarTimeFn = Arc::new(move |t, x| {
        let kx = k.at(x);
        let [hxx, hxy, hyy] = ex.hess_phi(t, x);
        let mut div = kx.xx * hxx + 2.0 * kx.xy * hxy + kx.yy * hyy;
        if matches!(k, Conductivity::Field(_)) {
            let h = 1e-6;
            let g = ex.grad_phi(t, x);
            let dkx = k.at([x[0] + h, x[1]]).sub(&k.at([x[0] - h, x[1]])).scale(0.5 / h);
            let dky = k.at([x[0], x[1] + h]).sub(&k.at([x[0], x[1] - h])).scale(0.5 / h);
            // d/dx (K g)_x + d/dy (K g)_y with K differentiated
            div += dkx.xx * g[0] + dkx.xy * g[1] + dky.xy * g[0] + dky.yy * g[1];
        }
        s * ex.phi_t(t, x) - div
    });
    (f_f, f_p)
}

/// Residuals of the three interface conditions for the exact fields:
/// mass `u.n_f - K grad phi . n_p`, normal stress
/// `p - nu n_f.(grad u) n_f + |u|^2/2 - g phi`, and slip
/// `-nu tau.(grad u) n_f - eta u.tau`.
pub fn interface_residual_sources(
    ex: Arc<dyn AnalyticSolution>,
    physics: &Physics,
    k: &Conductivity,
    eta: &InterfaceCoefficient,
) -> InterfaceSources {
    let (nu, g) = (physics.nu, physics.g);
    let (e1, e2, e3) = (ex.clone(), ex.clone(), ex);
    let k = k.clone();
    let eta = eta.clone();
    let mass: InterfaceTimeFn = Arc::new(move |t, x, n, _| {
        let u = e1.u(t, x);
        let kg = k.at(x).apply(e1.grad_phi(t, x));
        // n_p = -n_f
        u[0] * n[0] + u[1] * n[1] + kg[0] * n[0] + kg[1] * n[1]
    });
    let normal_stress: InterfaceTimeFn = Arc::new(move |t, x, n, _| {
        let (u, gu) = (e2.u(t, x), e2.grad_u(t, x));
        let gun = [gu[0][0] * n[0] + gu[0][1] * n[1], gu[1][0] * n[0] + gu[1][1] * n[1]];
        e2.p(t, x) - nu * (n[0] * gun[0] + n[1] * gun[1]) + 0.5 * (u[0] * u[0] + u[1] * u[1]) - g * e2.phi(t, x)
    });
    let slip: InterfaceTimeFn = Arc::new(move |t, x, n, tau| {
        let (u, gu) = (e3.u(t, x), e3.grad_u(t, x));
        let gun = [gu[0][0] * n[0] + gu[0][1] * n[1], gu[1][0] * n[0] + gu[1][1] * n[1]];
        -nu * (tau[0] * gun[0] + tau[1] * gun[1]) - eta.at(x, tau) * (u[0] * tau[0] + u[1] * tau[1])
    });
    InterfaceSources { mass, normal_stress, slip }
}

/// `E'(t) + dissipation(t) - work(t)` of the exact fields: the amount by
/// which they miss the homogeneous energy identity because of boundary
/// data and interface residuals.
pub fn energy_balance_source(
    disc: Arc<Discretization>,
    ex: Arc<dyn AnalyticSolution>,
    physics: &Physics,
    k: &Conductivity,
    eta: &InterfaceCoefficient,
    f_f: VectorTimeFn,
    f_p: ScalarTimeFn,
) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    let ph = *physics;
    let (k, eta) = (k.clone(), eta.clone());
    Arc::new(move |t| {
        let fluid = disc.integrate_fluid(&|x| {
            let (u, ut, gu, f) = (ex.u(t, x), ex.u_t(t, x), ex.grad_u(t, x), f_f(t, x));
            let grad_sq: f64 = gu.iter().flatten().map(|v| v * v).sum();
            u[0] * ut[0] + u[1] * ut[1] + ph.nu * grad_sq - (f[0] * u[0] + f[1] * u[1])
        });
        let porous = disc.integrate_porous(&|x| {
            let (phi, gphi) = (ex.phi(t, x), ex.grad_phi(t, x));
            let kg = k.at(x).apply(gphi);
            ph.g * ph.s_storage * phi * ex.phi_t(t, x) + ph.g * (kg[0] * gphi[0] + kg[1] * gphi[1])
                - ph.g * f_p(t, x) * phi
        });
        let slip = disc.integrate_interface(&|x, _, tau| {
            let u = ex.u(t, x);
            let ut = u[0] * tau[0] + u[1] * tau[1];
            eta.at(x, tau) * ut * ut
        });
        fluid + porous + slip
    })
}

/// Realization inputs for the manufactured problem, one per conductivity.
pub fn mms_inputs(
    disc: &Arc<Discretization>,
    physics: &Physics,
    ks: &[Conductivity],
    sav: SavParams,
    energy_balance: bool,
) -> Result<Vec<RealizationInput>> {
    let ex: Arc<dyn AnalyticSolution> = Arc::new(ExactSolution);
    let Some(first) = ks.first() else {
        return Ok(Vec::new());
    };
    let f_f = mms_sources(ex.clone(), physics, first).0;
    ks.iter()
        .map(|k| {
            let eta = eta_field(k, physics.nu, physics.alpha_bj)?;
            let (_, f_p) = mms_sources(ex.clone(), physics, k);
            let interface = interface_residual_sources(ex.clone(), physics, k, &eta);
            let sav_source = energy_balance.then(|| {
                energy_balance_source(disc.clone(), ex.clone(), physics, k, &eta, f_f.clone(), f_p.clone())
            });
            let (eu, ep) = (ex.clone(), ex.clone());
            let (eu0, ep0) = (ex.clone(), ex.clone());
            Ok(RealizationInput {
                conductivity: k.clone(),
                f_f: Some(f_f.clone()),
                f_p: Some(f_p),
                u0: Arc::new(move |x| eu0.u(0.0, x)),
                phi0: Arc::new(move |x| ep0.phi(0.0, x)),
                velocity_bc: VelocityBoundary::Function(Arc::new(move |t, x| eu.u(t, x))),
                head_bc: Some(Arc::new(move |t, x| ep.phi(t, x))),
                interface_sources: Some(interface),
                exact: Some(ex.clone()),
                sav,
                sav_source,
            })
        })
        .collect()
}

/// L2 errors `(u, p, phi)` of discrete fields against the exact solution at
/// time `t`, by high-degree quadrature.
pub fn error_norms(disc: &Discretization, ex: &dyn AnalyticSolution, u: &[f64], p: &[f64], phi: &[f64], t: f64) -> (f64, f64, f64) {
    (
        disc.velocity_l2_error(u, &|x| ex.u(t, x)),
        disc.pressure_l2_error(p, &|x| ex.p(t, x)),
        disc.head_l2_error(phi, &|x| ex.phi(t, x)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::SymTensor;

    fn pts() -> Vec<Point> {
        (0..100).map(|i| {
            let a = (i as f64 * 0.618034).fract();
            let b = (i as f64 * 0.414214).fract();
            [a, 2.0 * b - 1.0]
        })
        .collect()
    }

    #[test]
    fn point_values_and_divergence() {
        let ex = exact_solution();
        assert_eq!(ex.u(0.0, [0.0, 0.0]), [0.0, 0.0]);
        assert!((ex.phi(0.0, [0.5, -0.5]) - 1.0).abs() < 1e-15);
        for x in pts() {
            let g = ex.grad_u(0.3, x);
            assert!((g[0][0] + g[1][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let ex = exact_solution();
        let h = 1e-5;
        for x in pts().into_iter().take(10) {
            let t = 0.2;
            let g = ex.grad_u(t, x);
            for a in 0..2 {
                let dx = (ex.u(t, [x[0] + h, x[1]])[a] - ex.u(t, [x[0] - h, x[1]])[a]) / (2.0 * h);
                let dy = (ex.u(t, [x[0], x[1] + h])[a] - ex.u(t, [x[0], x[1] - h])[a]) / (2.0 * h);
                assert!((dx - g[a][0]).abs() < 1e-7 && (dy - g[a][1]).abs() < 1e-7);
                let lap = (ex.u(t, [x[0] + h, x[1]])[a] + ex.u(t, [x[0] - h, x[1]])[a] + ex.u(t, [x[0], x[1] + h])[a]
                    + ex.u(t, [x[0], x[1] - h])[a]
                    - 4.0 * ex.u(t, x)[a])
                    / (h * h);
                assert!((lap - ex.lap_u(t, x)[a]).abs() < 1e-3);
                let ut = (ex.u(t + h, x)[a] - ex.u(t - h, x)[a]) / (2.0 * h);
                assert!((ut - ex.u_t(t, x)[a]).abs() < 1e-7);
            }
            let gp = ex.grad_p(t, x);
            assert!(((ex.p(t, [x[0] + h, x[1]]) - ex.p(t, [x[0] - h, x[1]])) / (2.0 * h) - gp[0]).abs() < 1e-7);
            let gphi = ex.grad_phi(t, x);
            assert!(((ex.phi(t, [x[0], x[1] + h]) - ex.phi(t, [x[0], x[1] - h])) / (2.0 * h) - gphi[1]).abs() < 1e-7);
        }
    }

    #[test]
    fn field_conductivity_source_matches_constant_one() {
        let ex: Arc<dyn AnalyticSolution> = Arc::new(ExactSolution);
        let ph = Physics::default();
        let kc = Conductivity::Constant(SymTensor::new(1.5, 0.2, 0.8));
        let kf = Conductivity::Field(Arc::new(|_| SymTensor::new(1.5, 0.2, 0.8)));
        let (_, a) = mms_sources(ex.clone(), &ph, &kc);
        let (_, b) = mms_sources(ex, &ph, &kf);
        for x in pts().into_iter().take(10) {
            assert!((a(0.1, x) - b(0.1, x)).abs() < 1e-8);
        }
    }

    #[test]
    fn mass_residual_is_linear_in_conductivity() {
        let ex: Arc<dyn AnalyticSolution> = Arc::new(ExactSolution);
        let ph = Physics::default();
        let eta = InterfaceCoefficient::Constant(1.0);
        let g1 = |k: f64| interface_residual_sources(ex.clone(), &ph, &Conductivity::isotropic(k), &eta).mass;
        let (a, b) = (g1(1.0), g1(2.0));
        let n = [0.0, -1.0];
        for s in [0.1, 0.5, 0.9] {
            let x = [s, 0.0];
            let diff = b(0.2, x, n, [1.0, 0.0]) - a(0.2, x, n, [1.0, 0.0]);
            // extra -K grad phi . n_p with n_p = (0, 1)
            let expect = -ex.grad_phi(0.2, x)[1];
            assert!((diff - expect).abs() < 1e-12);
        }
    }
}
