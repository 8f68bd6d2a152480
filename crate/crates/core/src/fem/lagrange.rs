//! Lagrange shape functions of degree 1 to 3 on the reference triangle.

use crate::error::{Error, Result};

/// Nodes are indexed by barycentric multi-indices `(i0, i1, i2)` summing to
/// the degree: three vertices, then `degree - 1` nodes along each local edge
/// `(0,1), (1,2), (2,0)` ordered away from the edge's first vertex, then
/// interior nodes.
#[derive(Debug, Clone)]
pub struct LagrangeElement {
    pub degree: usize,
    pub nodes: Vec<[usize; 3]>,
}

pub const REF_BARY_GRADS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

impl LagrangeElement {
    pub fn new(degree: usize) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(Error::UnsupportedDegree(degree));
        }
        let p = degree;
        let mut nodes = vec![[p, 0, 0], [0, p, 0], [0, 0, p]];
        for e in 0..3 {
            let (a, b) = (e, (e + 1) % 3);
            for m in 1..p {
                let mut idx = [0; 3];
                idx[a] = p - m;
                idx[b] = m;
                nodes.push(idx);
            }
        }
        for i in 1..p {
            for j in 1..p - i {
                let k = p - i - j;
                if k >= 1 {
                    nodes.push([i, j, k]);
                }
            }
        }
        Ok(Self { degree, nodes })
    }

    pub fn n_basis(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edge_nodes(&self) -> usize {
        self.degree - 1
    }

    /// Reference coordinates of node `i`.
    pub fn node_point(&self, i: usize) -> [f64; 2] {
        let p = self.degree as f64;
        let idx = self.nodes[i];
        [idx[1] as f64 / p, idx[2] as f64 / p]
    }

    /// Values and reference gradients of every basis function at reference
    /// point `(x, y)`.
    pub fn eval(&self, x: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let lam = [1.0 - x[0] - x[1], x[0], x[1]];
        let p = self.degree as f64;
        let mut vals = Vec::with_capacity(self.nodes.len());
        let mut grads = Vec::with_capacity(self.nodes.len());
        for idx in &self.nodes {
            let mut r = [0.0; 3];
            let mut dr = [0.0; 3];
            for k in 0..3 {
                let (v, d) = silvester(idx[k], p, lam[k]);
                r[k] = v;
                dr[k] = d;
            }
            vals.push(r[0] * r[1] * r[2]);
            let dl = [dr[0] * r[1] * r[2], r[0] * dr[1] * r[2], r[0] * r[1] * dr[2]];
            let mut g = [0.0; 2];
            for k in 0..3 {
                g[0] += dl[k] * REF_BARY_GRADS[k][0];
                g[1] += dl[k] * REF_BARY_GRADS[k][1];
            }
            grads.push(g);
        }
        (vals, grads)
    }
}

/// `R_m(l) = prod_{s<m} (p l - s) / (s + 1)` and its derivative in `l`.
fn silvester(m: usize, p: f64, l: f64) -> (f64, f64) {
    let mut val = 1.0;
    let mut der = 0.0;
    for s in 0..m {
        let s = s as f64;
        let f = (p * l - s) / (s + 1.0);
        let df = p / (s + 1.0);
        der = der * f + val * df;
        val *= f;
    }
    (val, der)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronecker_and_partition_of_unity() {
        for p in 1..=3 {
            let el = LagrangeElement::new(p).unwrap();
            assert_eq!(el.n_basis(), (p + 1) * (p + 2) / 2);
            for i in 0..el.n_basis() {
                let (v, _) = el.eval(el.node_point(i));
                for (j, vj) in v.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((vj - e).abs() < 1e-13, "p={p} i={i} j={j}");
                }
            }
            let (v, g) = el.eval([0.21, 0.37]);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            let gs = g.iter().fold([0.0, 0.0], |a, b| [a[0] + b[0], a[1] + b[1]]);
            assert!(gs[0].abs() < 1e-12 && gs[1].abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let el = LagrangeElement::new(3).unwrap();
        let x = [0.3, 0.2];
        let h = 1e-6;
        let (_, g) = el.eval(x);
        let (vp, _) = el.eval([x[0] + h, x[1]]);
        let (vm, _) = el.eval([x[0] - h, x[1]]);
        for i in 0..el.n_basis() {
            assert!(((vp[i] - vm[i]) / (2.0 * h) - g[i][0]).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_degree_four() {
        assert!(LagrangeElement::new(4).is_err());
        assert!(LagrangeElement::new(0).is_err());
    }
}
