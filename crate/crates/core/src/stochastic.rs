//! Random conductivity samples, ensemble means and output statistics.
//!
//! Random numbers come from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64`, one draw of `U(0, 1)` per realization in order.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::fem::{eta_field, Conductivity, InterfaceCoefficient, Physics, SymTensor};
use crate::mesh::Point;

pub type RandomTensorFn = Arc<dyn Fn(f64, Point) -> SymTensor + Send + Sync>;

#[derive(Clone)]
pub enum ConductivitySpec {
    /// `k_j = (1 + omega_j) * scale`, isotropic.
    UniformIsotropic { scale: f64 },
    /// Explicit isotropic values, one per realization.
    Listed(Vec<f64>),
    /// `K_j(x) = f(omega_j, x)`.
    TensorCallable(RandomTensorFn),
}

impl fmt::Debug for ConductivitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UniformIsotropic { scale } => f.debug_struct("UniformIsotropic").field("scale", scale).finish(),
            Self::Listed(v) => f.debug_tuple("Listed").field(v).finish(),
            Self::TensorCallable(_) => f.write_str("TensorCallable(..)"),
        }
    }
}

fn draws(j: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..j).map(|_| rng.random::<f64>()).collect()
}

pub fn sample_conductivities(spec: &ConductivitySpec, j: usize, seed: u64) -> Result<Vec<Conductivity>> {
    if j == 0 {
        return Err(Error::InvalidSpec("ensemble size must be at least 1".into()));
    }
    match spec {
        ConductivitySpec::UniformIsotropic { scale } => {
            if !(*scale > 0.0) {
                return Err(Error::InvalidSpec(format!("scale must be positive, got {scale}")));
            }
            Ok(draws(j, seed)
                .into_iter()
                // keep omega inside the open interval
                .map(|w| Conductivity::isotropic((1.0 + w.max(f64::EPSILON)) * scale))
                .collect())
        }
        ConductivitySpec::Listed(vals) => {
            if vals.len() != j {
                return Err(Error::InvalidSpec(format!("{} listed conductivities for {j} realizations", vals.len())));
            }
            if let Some(v) = vals.iter().find(|v| !(**v > 0.0)) {
                return Err(Error::InvalidSpec(format!("conductivity {v} is not positive")));
            }
            Ok(vals.iter().map(|&k| Conductivity::isotropic(k)).collect())
        }
        ConductivitySpec::TensorCallable(f) => Ok(draws(j, seed)
            .into_iter()
            .map(|w| {
                let f = f.clone();
                Conductivity::Field(Arc::new(move |x| f(w, x)))
            })
            .collect()),
    }
}

/// Ensemble means `Kbar` and `etabar`, plus each `eta_j`. Note `etabar` is the
/// mean of the `eta_j`, not `eta` of `Kbar`.
#[derive(Debug, Clone)]
pub struct MeanFields {
    pub kbar: Conductivity,
    pub etabar: InterfaceCoefficient,
    pub etas: Vec<InterfaceCoefficient>,
}

pub fn mean_fields(ks: &[Conductivity], physics: &Physics) -> Result<MeanFields> {
    if ks.is_empty() {
        return Err(Error::InvalidSpec("no realizations".into()));
    }
    let etas = ks.iter().map(|k| eta_field(k, physics.nu, physics.alpha_bj)).collect::<Result<Vec<_>>>()?;
    Ok(MeanFields { kbar: Conductivity::mean(ks), etabar: InterfaceCoefficient::mean(&etas), etas })
}

fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// Coefficient-wise sample mean and unbiased variance (zero for `J = 1`).
pub fn ensemble_stats(fields: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let Some(first) = fields.first() else {
        return Err(Error::InvalidSpec("no fields".into()));
    };
    let n = first.len();
    if fields.iter().any(|f| f.len() != n) {
        return Err(Error::SpaceMismatch);
    }
    let j = fields.len();
    let mut mean = vec![0.0; n];
    let mut var = vec![0.0; n];
    let mut col = vec![0.0; j];
    for i in 0..n {
        for (c, f) in col.iter_mut().zip(fields) {
            *c = f[i];
        }
        let m = pairwise_sum(&col) / j as f64;
        mean[i] = m;
        if j > 1 {
            for c in col.iter_mut() {
                *c = (*c - m) * (*c - m);
            }
            var[i] = pairwise_sum(&col) / (j - 1) as f64;
        }
    }
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listed_samples_are_exact() {
        let ks = sample_conductivities(&ConductivitySpec::Listed(vec![1.1, 2.1, 3.3]), 3, 0).unwrap();
        let vals: Vec<f64> = ks.iter().map(|k| k.as_constant().unwrap().xx).collect();
        assert_eq!(vals, vec![1.1, 2.1, 3.3]);
        assert!(sample_conductivities(&ConductivitySpec::Listed(vec![1.0]), 2, 0).is_err());
    }

    #[test]
    fn uniform_samples_in_range_and_reproducible() {
        let spec = ConductivitySpec::UniformIsotropic { scale: 1e-2 };
        let a = sample_conductivities(&spec, 200, 7).unwrap();
        let b = sample_conductivities(&spec, 200, 7).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.as_constant().unwrap().xx, y.as_constant().unwrap().xx);
            assert_eq!(x, y);
            assert!(x > 1e-2 && x < 2e-2);
        }
    }

    #[test]
    fn stats_of_symmetric_pair() {
        let (m, v) = ensemble_stats(&[vec![1.0, -2.0], vec![-1.0, 2.0]]).unwrap();
        assert_eq!(m, vec![0.0, 0.0]);
        assert_eq!(v, vec![2.0, 8.0]);
        let (_, v1) = ensemble_stats(&[vec![3.0]]).unwrap();
        assert_eq!(v1, vec![0.0]);
        assert!(matches!(ensemble_stats(&[vec![1.0], vec![1.0, 2.0]]), Err(Error::SpaceMismatch)));
    }

    #[test]
    fn single_member_means_are_the_member() {
        let ks = vec![Conductivity::isotropic(1.7)];
        let m = mean_fields(&ks, &Physics::default()).unwrap();
        assert_eq!(m.kbar.as_constant(), ks[0].as_constant());
        assert_eq!(m.etabar.as_constant(), m.etas[0].as_constant());
    }
}
