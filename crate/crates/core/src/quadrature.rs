//! Gauss–Hermite rules for the two Gaussian weights of the model.
//!
//! The bivariate weight `exp(-Q)` with `Q(y1, y2) = y1 y2 / 2 + 3 (y1² + y2²) / 4`
//! separates in `u = (y1 + y2)/√2`, `v = (y1 - y2)/√2`, where `Q = u² + v²/2`.
//! The 2D rule is the tensor product of a Hermite rule in `u` and a rescaled
//! one in `v`, so no cross-weight error is introduced.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::error::{Error, Result};

/// Default number of nodes per axis.
pub const DEFAULT_ORDER: usize = 24;

/// `Q(y1, y2)`.
pub fn q_form(y1: f64, y2: f64) -> f64 {
    0.5 * y1 * y2 + 0.75 * (y1 * y1 + y2 * y2)
}

/// Node of the bivariate rule with its normalized weight.
#[derive(Debug, Clone, Copy)]
pub struct Node2 {
    pub y1: f64,
    pub y2: f64,
    pub weight: f64,
}

/// Node of the univariate rule with its normalized weight.
#[derive(Debug, Clone, Copy)]
pub struct Node1 {
    pub y: f64,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    order: usize,
    nodes1d: Vec<f64>,
    weights1d: Vec<f64>,
    bivariate: Vec<Node2>,
    univariate: Vec<Node1>,
}

/// Nodes and weights of the `n`-point rule for `∫ e^{-x²} f(x) dx`.
///
/// Newton iteration on the orthonormal Hermite recurrence, seeded with the
/// classical asymptotic guesses.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = PI.powf(-0.25);
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    // ascending order
    x.reverse();
    w.reverse();
    (x, w)
}

impl QuadratureRule {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > 200 {
            return Err(Error::Config(format!("quadrature order must lie in 1..=200, got {order}")));
        }
        let (nodes1d, weights1d) = gauss_hermite(order);
        let norm = 1.0 / PI.sqrt();
        let mut bivariate = Vec::with_capacity(order * order);
        for (xu, wu) in nodes1d.iter().zip(&weights1d) {
            for (xv, wv) in nodes1d.iter().zip(&weights1d) {
                let u = *xu;
                let v = SQRT_2 * xv;
                bivariate.push(Node2 {
                    y1: FRAC_1_SQRT_2 * (u + v),
                    y2: FRAC_1_SQRT_2 * (u - v),
                    weight: wu * wv / PI,
                });
            }
        }
        let univariate =
            nodes1d.iter().zip(&weights1d).map(|(x, w)| Node1 { y: SQRT_2 * x, weight: w * norm }).collect();
        Ok(Self { order, nodes1d, weights1d, bivariate, univariate })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Hermite nodes for the weight `e^{-x²}`.
    pub fn nodes1d(&self) -> &[f64] {
        &self.nodes1d
    }

    pub fn weights1d(&self) -> &[f64] {
        &self.weights1d
    }

    /// Nodes of the normalized `exp(-Q)` measure; weights sum to one.
    pub fn bivariate(&self) -> &[Node2] {
        &self.bivariate
    }

    /// Nodes of the standard normal measure; weights sum to one.
    pub fn univariate(&self) -> &[Node1] {
        &self.univariate
    }

    /// Largest `|y1| + |y2|` over the bivariate nodes.
    pub fn reach(&self) -> f64 {
        self.bivariate.iter().map(|n| n.y1.abs().max(n.y2.abs())).fold(0.0, f64::max)
    }

    /// `(1/(√2 π)) ∬ e^{-Q} g dy1 dy2`.
    pub fn gauss_q2d(&self, g: impl Fn(f64, f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for n in &self.bivariate {
            let v = g(n.y1, n.y2);
            if !v.is_finite() {
                return Err(Error::Numerical(format!("non-finite integrand at (y1, y2) = ({}, {})", n.y1, n.y2)));
            }
            acc += n.weight * v;
        }
        Ok(acc)
    }

    /// `(1/√(2π)) ∫ e^{-y²/2} g dy`.
    pub fn gauss_1d(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for n in &self.univariate {
            let v = g(n.y);
            if !v.is_finite() {
                return Err(Error::Numerical(format!("non-finite integrand at y = {}", n.y)));
            }
            acc += n.weight * v;
        }
        Ok(acc)
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::new(DEFAULT_ORDER).expect("default order is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn q_form_values() {
        assert_eq!(q_form(0.0, 0.0), 0.0);
        assert_eq!(q_form(1.0, 1.0), 2.0);
        assert_eq!(q_form(1.0, -1.0), 1.0);
    }

    #[test]
    fn hermite_rule_small_orders() {
        let (x, w) = gauss_hermite(2);
        assert_abs_diff_eq!(x[1], FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(w[0] + w[1], PI.sqrt(), epsilon = 1e-14);
        let (x, _) = gauss_hermite(3);
        assert_abs_diff_eq!(x[1], 0.0);
        assert_abs_diff_eq!(x[2], 1.5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn bivariate_moments() {
        let r = QuadratureRule::default();
        assert_abs_diff_eq!(r.gauss_q2d(|_, _| 1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.gauss_q2d(|a, b| a + b).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.gauss_q2d(|a, b| a * a + b * b).unwrap(), 1.5, epsilon = 1e-10);
        assert_abs_diff_eq!(r.gauss_q2d(|a, b| a * b).unwrap(), -0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(r.gauss_q2d(|a, _| a * a).unwrap(), 0.75, epsilon = 1e-10);
    }

    #[test]
    fn univariate_moments() {
        let r = QuadratureRule::default();
        assert_abs_diff_eq!(r.gauss_1d(|_| 1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.gauss_1d(|y| y).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.gauss_1d(|y| y * y).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let r = QuadratureRule::new(4).unwrap();
        assert!(r.gauss_q2d(|a, _| 1.0 / (a - a)).is_err());
        assert!(r.gauss_1d(|_| f64::NAN).is_err());
    }
}
