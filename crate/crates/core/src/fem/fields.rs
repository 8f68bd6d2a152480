//! Conductivity tensors and interface slip coefficients.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Symmetric 2x2 tensor `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTensor {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymTensor {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn isotropic(k: f64) -> Self {
        Self { xx: k, xy: 0.0, yy: k }
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    /// `t . K . t`
    pub fn quadratic(&self, t: [f64; 2]) -> f64 {
        let kt = self.apply(t);
        t[0] * kt[0] + t[1] * kt[1]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.xx + self.yy);
        let half = 0.5 * (self.xx - self.yy);
        mean - (half * half + self.xy * self.xy).sqrt()
    }

    pub fn is_spd(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite() && self.min_eigenvalue() > 0.0
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(s * self.xx, s * self.xy, s * self.yy)
    }

    pub fn is_zero(&self) -> bool {
        self.xx == 0.0 && self.xy == 0.0 && self.yy == 0.0
    }
}

pub type TensorFn = Arc<dyn Fn(Point) -> SymTensor + Send + Sync>;
pub type InterfaceFn = Arc<dyn Fn(Point, [f64; 2]) -> f64 + Send + Sync>;

/// Hydraulic conductivity on the porous region.
#[derive(Clone)]
pub enum Conductivity {
    Constant(SymTensor),
    Field(TensorFn),
}

impl fmt::Debug for Conductivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(k) => f.debug_tuple("Constant").field(k).finish(),
            Self::Field(_) => f.write_str("Field(..)"),
        }
    }
}

impl Conductivity {
    pub fn isotropic(k: f64) -> Self {
        Self::Constant(SymTensor::isotropic(k))
    }

    pub fn at(&self, x: Point) -> SymTensor {
        match self {
            Self::Constant(k) => *k,
            Self::Field(f) => f(x),
        }
    }

    pub fn as_constant(&self) -> Option<SymTensor> {
        match self {
            Self::Constant(k) => Some(*k),
            Self::Field(_) => None,
        }
    }

    /// Pointwise arithmetic mean, independent of the order of `ks` down to
    /// the last bit.
    pub fn mean(ks: &[Conductivity]) -> Conductivity {
        if let Some(consts) = ks.iter().map(Conductivity::as_constant).collect::<Option<Vec<_>>>() {
            return Conductivity::Constant(tensor_mean(&consts));
        }
        let ks = ks.to_vec();
        Conductivity::Field(Arc::new(move |x| {
            let vals: Vec<SymTensor> = ks.iter().map(|k| k.at(x)).collect();
            tensor_mean(&vals)
        }))
    }

    /// `self - other`, kept constant when both are.
    pub fn minus(&self, other: &Conductivity) -> Conductivity {
        match (self, other) {
            (Self::Constant(a), Self::Constant(b)) => Self::Constant(a.sub(b)),
            _ => {
                let (a, b) = (self.clone(), other.clone());
                Self::Field(Arc::new(move |x| a.at(x).sub(&b.at(x))))
            }
        }
    }
}

fn sorted_mean(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

fn tensor_mean(ts: &[SymTensor]) -> SymTensor {
    let comp = |f: fn(&SymTensor) -> f64| sorted_mean(ts.iter().map(f).collect());
    SymTensor::new(comp(|t| t.xx), comp(|t| t.xy), comp(|t| t.yy))
}

/// Slip coefficient on the interface, evaluated at a point with the local
/// unit tangent.
#[derive(Clone)]
pub enum InterfaceCoefficient {
    Constant(f64),
    Field(InterfaceFn),
}

impl fmt::Debug for InterfaceCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            Self::Field(_) => f.write_str("Field(..)"),
        }
    }
}

impl InterfaceCoefficient {
    pub fn at(&self, x: Point, tangent: [f64; 2]) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Field(f) => f(x, tangent),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Self::Constant(v) => Some(*v),
            Self::Field(_) => None,
        }
    }

    /// Pointwise arithmetic mean, independent of the order of `etas`.
    pub fn mean(etas: &[InterfaceCoefficient]) -> InterfaceCoefficient {
        if let Some(c) = etas.iter().map(InterfaceCoefficient::as_constant).collect::<Option<Vec<_>>>() {
            return InterfaceCoefficient::Constant(sorted_mean(c));
        }
        let etas = etas.to_vec();
        InterfaceCoefficient::Field(Arc::new(move |x, t| sorted_mean(etas.iter().map(|e| e.at(x, t)).collect())))
    }

    pub fn minus(&self, other: &InterfaceCoefficient) -> InterfaceCoefficient {
        match (self, other) {
            (Self::Constant(a), Self::Constant(b)) => Self::Constant(a - b),
            _ => {
                let (a, b) = (self.clone(), other.clone());
                Self::Field(Arc::new(move |x, t| a.at(x, t) - b.at(x, t)))
            }
        }
    }
}

/// Slip coefficient `alpha_bj * nu * sqrt(2) / sqrt(t . K . t)`.
///
/// Constant when `K` is constant and isotropic. Field coefficients are
/// checked when sampled on the interface.
pub fn eta_field(k: &Conductivity, nu: f64, alpha_bj: f64) -> Result<InterfaceCoefficient> {
    let scale = alpha_bj * nu * std::f64::consts::SQRT_2;
    match k {
        Conductivity::Constant(t) if t.xy == 0.0 && t.xx == t.yy => {
            if !(t.xx > 0.0) {
                return Err(Error::DegenerateTangentialConductivity(t.xx));
            }
            Ok(InterfaceCoefficient::Constant(scale / t.xx.sqrt()))
        }
        Conductivity::Constant(t) => {
            if !t.is_spd() {
                return Err(Error::DegenerateTangentialConductivity(t.min_eigenvalue()));
            }
            let t = *t;
            Ok(InterfaceCoefficient::Field(Arc::new(move |_, tau| scale / t.quadratic(tau).sqrt())))
        }
        Conductivity::Field(f) => {
            let f = f.clone();
            Ok(InterfaceCoefficient::Field(Arc::new(move |x, tau| scale / f(x).quadratic(tau).sqrt())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_values() {
        let eta = |k: f64| eta_field(&Conductivity::isotropic(k), 1.0, 1.0).unwrap().as_constant().unwrap();
        assert!((eta(1.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((eta(2.0) - 1.0).abs() < 1e-15);
        assert!((eta(1.1) - 1.348399724926484).abs() < 1e-12);
        assert!(matches!(
            eta_field(&Conductivity::isotropic(0.0), 1.0, 1.0),
            Err(Error::DegenerateTangentialConductivity(_))
        ));
    }

    #[test]
    fn anisotropic_eta_uses_tangent() {
        let k = Conductivity::Constant(SymTensor::new(4.0, 0.0, 1.0));
        let eta = eta_field(&k, 1.0, 1.0).unwrap();
        assert!((eta.at([0.0, 0.0], [1.0, 0.0]) - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((eta.at([0.0, 0.0], [0.0, 1.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn means_of_listed_set() {
        let ks: Vec<_> = [1.1, 2.1, 3.3].iter().map(|&k| Conductivity::isotropic(k)).collect();
        let kbar = Conductivity::mean(&ks).as_constant().unwrap();
        assert!((kbar.xx - 6.5 / 3.0).abs() < 1e-15);
        let etas: Vec<_> = ks.iter().map(|k| eta_field(k, 1.0, 1.0).unwrap()).collect();
        let ebar = InterfaceCoefficient::mean(&etas).as_constant().unwrap();
        let expect = 2f64.sqrt() * (1.1f64.powf(-0.5) + 2.1f64.powf(-0.5) + 3.3f64.powf(-0.5)) / 3.0;
        assert!((ebar - expect).abs() < 1e-15);
    }

    #[test]
    fn field_mean_matches_pointwise() {
        let a = Conductivity::Field(Arc::new(|x: Point| SymTensor::isotropic(1.0 + x[0])));
        let b = Conductivity::isotropic(3.0);
        let m = Conductivity::mean(&[a, b]);
        assert_eq!(m.at([0.5, 0.0]), SymTensor::isotropic(2.25));
    }
}
