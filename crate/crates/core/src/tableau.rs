//! Generalized BDF difference and extrapolation operators.
//!
//! All histories are ordered newest-first: `history[0]` is the most recent
//! level. For a step producing level `n+1`:
//!
//! * `A(u^{n+1}) = alpha u^{n+1} + sum_i abar[i] u^{n-i}` approximates
//!   `dt * u'(t^{n+beta})`,
//! * `B(u^{n+1}) = sum_i b[i] u^{n+1-i}` approximates `u(t^{n+beta})`,
//! * `C(u^n) = sum_i c[i] u^{n-i}` extrapolates `u(t^{n+beta})` from
//!   already known levels,
//! * `B = tau C + D` is the splitting used by the stability argument.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GbdfTableau {
    pub k: usize,
    pub beta: f64,
    pub alpha: f64,
    pub abar: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub tau: f64,
    pub d: Vec<f64>,
}

impl GbdfTableau {
    /// Builds the order-`k` tableau with shift `beta`.
    ///
    /// Coefficients are the closed-form polynomials in `beta`; at `beta = 1`
    /// they reduce to classical BDFk.
    pub fn new(k: usize, beta: f64) -> Result<Self> {
        if !(2..=4).contains(&k) {
            return Err(Error::UnsupportedOrder(k));
        }
        if !(beta > 1.0) || !beta.is_finite() {
            // beta == 1 is the classical limit; it is admitted for checks
            // against textbook BDF coefficients but not below.
            if beta != 1.0 {
                return Err(Error::InvalidBeta(beta));
            }
        }
        if beta < 2.0 {
            log::warn!("beta = {beta} < 2: error estimates for the scheme assume beta >= 2");
        }
        let bt = beta;
        let b2 = bt * bt;
        let b3 = b2 * bt;
        let (alpha, abar, b, c, tau) = match k {
            2 => (
                (2.0 * bt + 1.0) / 2.0,
                vec![-2.0 * bt, (2.0 * bt - 1.0) / 2.0],
                vec![bt, -(bt - 1.0)],
                vec![bt + 1.0, -bt],
                (bt - 1.0) / bt,
            ),
            3 => (
                (3.0 * b2 + 6.0 * bt + 2.0) / 6.0,
                vec![
                    -(9.0 * b2 + 12.0 * bt - 3.0) / 6.0,
                    (9.0 * b2 + 6.0 * bt - 6.0) / 6.0,
                    -(3.0 * b2 - 1.0) / 6.0,
                ],
                vec![(b2 + bt) / 2.0, -(b2 - 1.0), (b2 - bt) / 2.0],
                vec![(b2 + 3.0 * bt + 2.0) / 2.0, -(b2 + 2.0 * bt), (b2 + bt) / 2.0],
                (bt - 1.0) / (bt + 1.0),
            ),
            4 => (
                (2.0 * b3 + 9.0 * b2 + 11.0 * bt + 3.0) / 12.0,
                vec![
                    (-8.0 * b3 - 30.0 * b2 - 20.0 * bt + 10.0) / 12.0,
                    (12.0 * b3 + 36.0 * b2 + 6.0 * bt - 18.0) / 12.0,
                    (-8.0 * b3 - 18.0 * b2 + 4.0 * bt + 6.0) / 12.0,
                    (2.0 * b3 + 3.0 * b2 - bt - 1.0) / 12.0,
                ],
                vec![
                    (b3 + 3.0 * b2 + 2.0 * bt) / 6.0,
                    (-b3 - 2.0 * b2 + bt + 2.0) / 2.0,
                    (b3 + b2 - 2.0 * bt) / 2.0,
                    (-b3 + bt) / 6.0,
                ],
                vec![
                    (b3 + 6.0 * b2 + 11.0 * bt + 6.0) / 6.0,
                    (-b3 - 5.0 * b2 - 6.0 * bt) / 2.0,
                    (b3 + 4.0 * b2 + 3.0 * bt) / 2.0,
                    (-b3 - 3.0 * b2 - 2.0 * bt) / 6.0,
                ],
                (bt - 1.0) / (bt + 3.0),
            ),
            _ => unreachable!(),
        };
        let d = b.iter().zip(&c).map(|(bi, ci)| bi - tau * ci).collect();
        Ok(Self { k, beta, alpha, abar, b, c, tau, d })
    }

    /// Implicit-explicit Euler used to seed the startup cascade.
    pub(crate) fn first_order() -> Self {
        Self {
            k: 1,
            beta: 1.0,
            alpha: 1.0,
            abar: vec![-1.0],
            b: vec![1.0],
            c: vec![1.0],
            tau: 0.0,
            d: vec![1.0],
        }
    }

    /// Leading coefficient of `B`, the weight on the unknown level.
    pub fn b0(&self) -> f64 {
        self.b[0]
    }

    /// `alpha * newest + sum abar_i history_i`.
    pub fn eval_a<V: AsRef<[f64]>>(&self, newest: &[f64], history: &[V]) -> Result<Vec<f64>> {
        self.check_len(history.len())?;
        let mut out: Vec<f64> = newest.iter().map(|v| self.alpha * v).collect();
        axpy_all(&mut out, &self.abar, history);
        Ok(out)
    }

    /// `sum abar_i history_i`, the known part of `A`.
    pub fn eval_abar<V: AsRef<[f64]>>(&self, history: &[V]) -> Result<Vec<f64>> {
        self.check_len(history.len())?;
        Ok(combine(&self.abar, history))
    }

    pub fn eval_b<V: AsRef<[f64]>>(&self, states: &[V]) -> Result<Vec<f64>> {
        self.check_len(states.len())?;
        Ok(combine(&self.b, states))
    }

    pub fn eval_c<V: AsRef<[f64]>>(&self, states: &[V]) -> Result<Vec<f64>> {
        self.check_len(states.len())?;
        Ok(combine(&self.c, states))
    }

    pub fn eval_d<V: AsRef<[f64]>>(&self, states: &[V]) -> Result<Vec<f64>> {
        self.check_len(states.len())?;
        Ok(combine(&self.d, states))
    }

    /// `sum_{i>=1} b_i history_{i-1}`: the part of `B(u^{n+1})` carried by
    /// known levels. `history` holds `u^n, u^{n-1}, ...` (at least `k-1`).
    pub fn b_tail<V: AsRef<[f64]>>(&self, history: &[V]) -> Result<Vec<f64>> {
        if history.len() + 1 < self.k {
            return Err(Error::WrongHistoryLength { expected: self.k - 1, got: history.len() });
        }
        let n = history.first().map_or(0, |h| h.as_ref().len());
        let mut out = vec![0.0; n];
        axpy_all(&mut out, &self.b[1..], &history[..self.k - 1]);
        Ok(out)
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.k {
            return Err(Error::WrongHistoryLength { expected: self.k, got });
        }
        Ok(())
    }
}

/// Convenience alias matching the operation name used in docs and the CLI.
pub fn make_tableau(k: usize, beta: f64) -> Result<GbdfTableau> {
    GbdfTableau::new(k, beta)
}

pub(crate) fn combine<V: AsRef<[f64]>>(coeffs: &[f64], states: &[V]) -> Vec<f64> {
    let n = states.first().map_or(0, |s| s.as_ref().len());
    let mut out = vec![0.0; n];
    axpy_all(&mut out, coeffs, states);
    out
}

fn axpy_all<V: AsRef<[f64]>>(out: &mut [f64], coeffs: &[f64], states: &[V]) {
    for (w, s) in coeffs.iter().zip(states) {
        let s = s.as_ref();
        assert_eq!(s.len(), out.len(), "history fields must share a length");
        for (o, v) in out.iter_mut().zip(s) {
            *o += w * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn second_order_beta_three() {
        let t = make_tableau(2, 3.0).unwrap();
        assert_eq!(t.alpha, 3.5);
        assert_eq!(t.abar, vec![-6.0, 2.5]);
        assert_eq!(t.b, vec![3.0, -2.0]);
        assert_eq!(t.c, vec![4.0, -3.0]);
        assert!(close(t.tau, 2.0 / 3.0, 1e-15));
    }

    #[test]
    fn classical_limits() {
        let t2 = make_tableau(2, 1.0).unwrap();
        assert_eq!((t2.alpha, t2.abar.clone(), t2.b.clone(), t2.c.clone()), (1.5, vec![-2.0, 0.5], vec![1.0, 0.0], vec![2.0, -1.0]));
        let t3 = make_tableau(3, 1.0).unwrap();
        assert!(close(t3.alpha, 11.0 / 6.0, 1e-15));
        for (a, e) in t3.abar.iter().zip([-3.0, 1.5, -1.0 / 3.0]) {
            assert!(close(*a, e, 1e-15));
        }
        let t4 = make_tableau(4, 2.0).unwrap();
        assert!(close(t4.alpha, 77.0 / 12.0, 1e-15));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(make_tableau(5, 3.0), Err(Error::UnsupportedOrder(5))));
        assert!(matches!(make_tableau(1, 3.0), Err(Error::UnsupportedOrder(1))));
        assert!(matches!(make_tableau(2, 0.5), Err(Error::InvalidBeta(_))));
        assert!(matches!(make_tableau(2, f64::NAN), Err(Error::InvalidBeta(_))));
        let t = make_tableau(3, 3.0).unwrap();
        let h = vec![vec![1.0]; 2];
        assert!(matches!(t.eval_b(&h), Err(Error::WrongHistoryLength { expected: 3, got: 2 })));
        assert!(t.eval_a(&[1.0], &h).is_err());
    }

    #[test]
    fn constant_and_linear_reproduction() {
        let t = make_tableau(2, 3.0).unwrap();
        let constant = vec![vec![2.5, -1.0]; 2];
        let a = t.eval_a(&[2.5, -1.0], &constant).unwrap();
        assert!(a.iter().all(|v| v.abs() < 1e-14));
        assert_eq!(t.eval_b(&constant).unwrap(), vec![2.5, -1.0]);
        // g(t) = t sampled at t^{n+1} = 1.1, t^n = 1.0 with dt = 0.1
        let b = t.eval_b(&[vec![1.1], vec![1.0]]).unwrap();
        assert!(close(b[0], 1.0 + 3.0 * 0.1, 1e-14));
        let a = t.eval_a(&[1.1], &[vec![1.0], vec![0.9]]).unwrap();
        assert!(close(a[0] / 0.1, 1.0, 1e-12));
    }

    #[test]
    fn b_tail_drops_leading_level() {
        let t = make_tableau(3, 3.0).unwrap();
        let hist = vec![vec![1.0], vec![2.0]];
        let tail = t.b_tail(&hist).unwrap();
        assert!(close(tail[0], t.b[1] + 2.0 * t.b[2], 1e-15));
    }
}
