use std::sync::OnceLock;

use proptest::prelude::*;

use nsd_ensemble::fem::{Conductivity, Discretization};
use nsd_ensemble::io::{read_csv, write_csv, RunConfig, Scenario, Table};
use nsd_ensemble::mesh::build_coupled_rect_mesh;
use nsd_ensemble::sav::{check_rho_max, compute_eta, compute_xi, dissipation, update_r, DissipationTerms, SavParams};
use nsd_ensemble::stochastic::ensemble_stats;
use nsd_ensemble::tableau::make_tableau;

fn disc() -> &'static Discretization {
    static D: OnceLock<Discretization> = OnceLock::new();
    D.get_or_init(|| Discretization::new(build_coupled_rect_mesh(2).unwrap(), 2, 1, 2).unwrap())
}

proptest! {
    #[test]
    fn tableau_is_exact_on_polynomials(k in 2usize..=4, beta in 1.0f64..5.0, deg in 0usize..=4) {
        prop_assume!(deg <= k);
        let t = make_tableau(k, beta).unwrap();
        let p = |x: f64| x.powi(deg as i32);
        let dp = |x: f64| if deg == 0 { 0.0 } else { deg as f64 * x.powi(deg as i32 - 1) };
        let a = t.alpha * p(1.0) + t.abar.iter().enumerate().map(|(i, w)| w * p(-(i as f64))).sum::<f64>();
        let b: f64 = t.b.iter().enumerate().map(|(i, w)| w * p(1.0 - i as f64)).sum();
        let scale = 1.0 + t.abar.iter().chain(&t.b).chain(&t.c).map(|v| v.abs()).sum::<f64>() * (k as f64).powi(deg as i32);
        prop_assert!((a - dp(beta)).abs() <= 1e-12 * scale);
        // B and C use k levels, so they are exact one degree lower
        if deg < k {
            prop_assert!((b - p(beta)).abs() <= 1e-12 * scale);
            let c: f64 = t.c.iter().enumerate().map(|(i, w)| w * p(-(i as f64))).sum();
            prop_assert!((c - p(beta)).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn auxiliary_variable_stays_positive(
        r_n in 1e-9f64..1e3,
        grad_u in 0.0f64..50.0,
        grad_phi in 0.0f64..50.0,
        su in 0.0f64..=1.0,
        sphi in 0.0f64..=1.0,
        ff in 0.0f64..10.0,
        theta in -1.0f64..=1.0,
        dt in 1e-4f64..2.0,
        gamma in 1e-3f64..0.5,
    ) {
        let p = SavParams { gamma, alpha: 100.0, c_r: 1.0 };
        let cp = 0.5;
        prop_assume!(check_rho_max(&p, 1.0, 1.0, 1.0, 1.0, cp) > 0.0);
        let u_sq = su * cp * cp * grad_u;
        let phi_sq = sphi * cp * cp * grad_phi;
        let terms = DissipationTerms {
            viscous: grad_u,
            darcy: grad_phi,
            slip: 0.0,
            work: theta * (ff * u_sq).sqrt(),
            forcing_sq: ff,
            mass: u_sq + phi_sq,
        };
        let e = 0.5 * terms.mass;
        let r = update_r(r_n, e, dissipation(&terms, &p), ff, 0.0, &p, dt).unwrap();
        prop_assert!(r > 0.0);
        let xi = compute_xi(r, e, p.c_r);
        prop_assert!(xi > 0.0);
        let eta = compute_eta(xi, 3);
        prop_assert!(eta.is_finite());
    }

    #[test]
    fn conductivity_mean_ignores_order(vals in prop::collection::vec(0.1f64..10.0, 1..40), seed in any::<u64>()) {
        let ks: Vec<Conductivity> = vals.iter().map(|&v| Conductivity::isotropic(v)).collect();
        let mut idx: Vec<usize> = (0..ks.len()).collect();
        let mut s = seed;
        for i in (1..idx.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            idx.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled: Vec<Conductivity> = idx.iter().map(|&i| ks[i].clone()).collect();
        prop_assert_eq!(Conductivity::mean(&ks).as_constant(), Conductivity::mean(&shuffled).as_constant());
    }

    #[test]
    fn single_member_has_no_fluctuation(v in 0.1f64..10.0) {
        let k = Conductivity::isotropic(v);
        let kbar = Conductivity::mean(std::slice::from_ref(&k));
        prop_assert!(k.minus(&kbar).as_constant().unwrap().is_zero());
    }

    #[test]
    fn ensemble_variance_is_nonnegative(fields in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 5), 1..12)) {
        let (mean, var) = ensemble_stats(&fields).unwrap();
        prop_assert_eq!(mean.len(), 5);
        prop_assert!(var.iter().all(|v| *v >= 0.0));
        if fields.len() == 1 {
            prop_assert!(var.iter().all(|v| *v == 0.0));
            prop_assert_eq!(&mean, &fields[0]);
        }
    }

    #[test]
    fn convection_is_skew_on_fields_vanishing_on_the_outer_boundary(coeffs in prop::collection::vec(-1.0f64..1.0, 64)) {
        let d = disc();
        let cons = d.spaces.velocity_constrained();
        let w: Vec<f64> = (0..d.n_velocity()).map(|i| if cons[i] { 0.0 } else { coeffs[i % coeffs.len()] * (1.0 + (i % 5) as f64) }).collect();
        let mass: f64 = d.velocity_mass().matvec(&w).iter().zip(&w).map(|(a, b)| a * b).sum();
        let val: f64 = d.convection_rhs(&w).iter().zip(&w).map(|(a, b)| a * b).sum();
        prop_assert!(val.abs() <= 1e-10 * (1.0 + mass.powf(1.5)));
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(prop::option::of(-1e300f64..1e300), 3), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(["a", "b", "c"]);
        for r in rows {
            t.push(r).unwrap();
        }
        write_csv(&t, &path).unwrap();
        prop_assert_eq!(read_csv(&path).unwrap(), t);
    }

    #[test]
    fn config_round_trip(k in 2usize..=4, j in 1usize..50, dt_inv in 2u32..200, seed in any::<u64>(), n in 1usize..40) {
        let mut cfg = RunConfig::default_for(Scenario::SingleRun);
        cfg.ensemble.k = k;
        cfg.ensemble.j = j;
        cfg.ensemble.dt = 1.0 / dt_inv as f64;
        cfg.ensemble.seed = seed;
        cfg.mesh_n = n;
        cfg.conductivity = nsd_ensemble::io::ConductivityConfig::Uniform { scale: 1.0 };
        let back = RunConfig::parse_str(&cfg.emit()).unwrap();
        prop_assert_eq!(back.emit(), cfg.emit());
        prop_assert_eq!(back.ensemble, cfg.ensemble);
    }
}
