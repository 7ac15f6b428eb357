//! The ratio `I_eps(V)(z)` and its logarithmic derivatives `W1`, `W2`, `W3`.
//!
//! Both are read off the same tilted measure
//! `dG(z) ∝ exp(-Q - eps gamma (y1 + y2) + 2 D_eps(V)(y, z))`, so one pass over
//! the quadrature nodes yields all four quantities.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gamma::d_eps;
use crate::grid::GridFunction;
use crate::quadrature::QuadratureRule;

/// `I` and `∂^i I / I` for `i = 1, 2, 3` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub z: f64,
    pub i: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Moments {
    /// Derivatives of `log I` in `z`, orders 1 to 3.
    pub fn log_derivatives(&self) -> [f64; 3] {
        let (w1, w2, w3) = (self.w1, self.w2, self.w3);
        [w1, w2 - w1 * w1, w3 - 3.0 * w1 * w2 + 2.0 * w1 * w1 * w1]
    }

    pub fn w(&self, i: usize) -> f64 {
        match i {
            1 => self.w1,
            2 => self.w2,
            3 => self.w3,
            _ => panic!("W index {i} is not in 1..=3"),
        }
    }
}

/// `I_eps(V)` and `W` for fixed `(V, gamma, eps)`; the `z`-independent
/// denominator is computed once.
pub struct TiltedOperator<'a> {
    v: &'a GridFunction,
    gamma: f64,
    eps: f64,
    rule: &'a QuadratureRule,
    denominator: f64,
}

impl<'a> TiltedOperator<'a> {
    pub fn new(v: &'a GridFunction, gamma: f64, eps: f64, rule: &'a QuadratureRule) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {eps}")));
        }
        let v0 = v.eval(0.0, 0);
        let denominator = rule.gauss_1d(|y| (-eps * gamma * y + v0 - v.eval(eps * y, 0)).exp())?;
        if !(denominator > 0.0) {
            return Err(Error::Numerical(format!("vanishing denominator of I (eps = {eps})")));
        }
        Ok(Self { v, gamma, eps, rule, denominator })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn moments(&self, z: f64) -> Result<Moments> {
        let (v, eps) = (self.v, self.eps);
        let mut m0 = 0.0;
        let (mut m1, mut m2, mut m3) = (0.0, 0.0, 0.0);
        for n in self.rule.bivariate() {
            let e = (-eps * self.gamma * (n.y1 + n.y2) + 2.0 * d_eps(v, n.y1, n.y2, z, eps, 0)).exp();
            if !e.is_finite() {
                return Err(Error::Numerical(format!("exponent overflow in I at z = {z} (eps = {eps})")));
            }
            let d1 = d_eps(v, n.y1, n.y2, z, eps, 1);
            let d2 = d_eps(v, n.y1, n.y2, z, eps, 2);
            let d3 = d_eps(v, n.y1, n.y2, z, eps, 3);
            let we = n.weight * e;
            m0 += we;
            m1 += we * d1;
            m2 += we * (0.5 * d2 + d1 * d1);
            m3 += we * (0.25 * d3 + d1 * d1 * d1 + 1.5 * d1 * d2);
        }
        Ok(Moments { z, i: m0 / self.denominator, w1: m1 / m0, w2: m2 / m0, w3: m3 / m0 })
    }

    /// `I_eps(V)(z)` alone.
    pub fn value(&self, z: f64) -> Result<f64> {
        let (v, eps) = (self.v, self.eps);
        let num =
            self.rule.gauss_q2d(|y1, y2| (-eps * self.gamma * (y1 + y2) + 2.0 * d_eps(v, y1, y2, z, eps, 0)).exp())?;
        Ok(num / self.denominator)
    }

    /// Moments at every point of `zs`, in parallel.
    pub fn moments_at(&self, zs: &[f64]) -> Result<Vec<Moments>> {
        zs.par_iter().map(|&z| self.moments(z)).collect()
    }
}

/// `I_eps(V)(z)`.
pub fn eval_i(v: &GridFunction, gamma: f64, eps: f64, z: f64, rule: &QuadratureRule) -> Result<f64> {
    TiltedOperator::new(v, gamma, eps, rule)?.value(z)
}

/// `W^(i)_eps(V)(z)` for `i` in `1..=3`.
pub fn eval_w(v: &GridFunction, gamma: f64, eps: f64, z: f64, i: usize, rule: &QuadratureRule) -> Result<f64> {
    if !(1..=3).contains(&i) {
        return Err(Error::Config(format!("W index must be 1, 2 or 3, got {i}")));
    }
    Ok(TiltedOperator::new(v, gamma, eps, rule)?.moments(z)?.w(i))
}

/// Largest `(1+|z|)^alpha |W^(i)|` over `zs`, for `i = 1, 2`.
pub fn weighted_w_bounds(moments: &[Moments], alpha: f64) -> (f64, f64) {
    moments.iter().fold((0.0, 0.0), |(a, b), m| {
        let w = (1.0 + m.z.abs()).powf(alpha);
        (f64::max(a, w * m.w1.abs()), f64::max(b, w * m.w2.abs()))
    })
}
