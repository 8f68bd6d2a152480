//! Gauss rules on the unit interval and the reference triangle.
//!
//! The triangle rule collapses the unit square onto the triangle
//! `{(x, y) : x, y >= 0, x + y <= 1}` through `(s, t) -> (s (1 - t), t)`.
//! With `n` Gauss points per direction it integrates every polynomial of
//! total degree `2n - 2` exactly.

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct Rule1d {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TriangleRule {
    /// Reference coordinates `(x, y)`.
    pub points: Vec<[f64; 2]>,
    /// Weights summing to the reference area 1/2.
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// `n`-point Gauss-Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Rule1d {
    assert!(n >= 1);
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = 0.5 * (1.0 - x);
        points[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    Rule1d { points, weights }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss rule exact for polynomials of degree `degree` on `[0, 1]`.
pub fn line_rule(degree: usize) -> Rule1d {
    gauss_legendre(degree / 2 + 1)
}

/// Rule on the reference triangle exact for total degree `degree`.
pub fn triangle_rule(degree: usize) -> TriangleRule {
    let n = (degree + 3) / 2;
    let g = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (s, ws) in g.points.iter().zip(&g.weights) {
        for (t, wt) in g.points.iter().zip(&g.weights) {
            points.push([s * (1.0 - t), *t]);
            weights.push(ws * wt * (1.0 - t));
        }
    }
    TriangleRule { points, weights, degree }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn line_rule_is_exact() {
        for deg in 0..12 {
            let r = line_rule(deg);
            for p in 0..=deg as i32 {
                let q: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * x.powi(p)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "deg {deg} p {p}");
            }
        }
    }

    #[test]
    fn triangle_rule_is_exact() {
        // int x^a y^b over the reference triangle = a! b! / (a + b + 2)!
        for deg in 0..=12 {
            let r = triangle_rule(deg);
            for a in 0..=deg as u32 {
                for b in 0..=(deg as u32 - a) {
                    let q: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    assert!((q - exact).abs() < 1e-14, "deg {deg}: x^{a} y^{b}");
                }
            }
        }
    }
}
