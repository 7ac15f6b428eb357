//! The implicit equation `J_eps(gamma, V) = 0` fixing the linear part of the corrector.

use std::f64::consts::{PI, SQRT_2};

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result, Stage};
use crate::grid::{check_e0_membership, AlphaParameter, GridFunction};
use crate::quadrature::QuadratureRule;

/// Root tolerance on the normalized scale of `J`.
pub const J_TOL: f64 = 1e-12;

/// Bracket width at which bisection hands over to the secant method.
pub const BISECTION_WIDTH: f64 = 1e-6;

const MONOTONE_SAMPLES: usize = 17;

/// `V(z/2) - V(z/2 + eps y1)/2 - V(z/2 + eps y2)/2` applied to the
/// `order`-th derivative of `V`.
pub fn d_eps(v: &GridFunction, y1: f64, y2: f64, z: f64, eps: f64, order: usize) -> f64 {
    let zb = 0.5 * z;
    v.eval(zb, order) - 0.5 * v.eval(zb + eps * y1, order) - 0.5 * v.eval(zb + eps * y2, order)
}

/// Search interval `(-R_K, R_K)` for the root of `J`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GammaBracket {
    pub r_k: f64,
    /// `max(||V||_alpha, 1)`.
    pub norm: f64,
    /// `∬ e^{-Q} (y1² + y2²)`, unnormalized.
    pub second_moment: f64,
    pub mu0: f64,
}

impl GammaBracket {
    pub fn new(v: &GridFunction, mu0: f64, alpha: AlphaParameter) -> Self {
        let norm = v.alpha_norm(alpha).max(1.0);
        let second_moment = 1.5 * SQRT_2 * PI;
        let r_k = norm.max((norm * second_moment + 8.0) / (2.0 * mu0));
        Self { r_k, norm, second_moment, mu0 }
    }
}

/// Per-node data of `J` at fixed `V`: `J(g) = eps^-2 Σ w exp(a - eps g s) b`.
#[derive(Debug, Clone)]
pub struct JTable {
    eps: f64,
    weight: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    s: Vec<f64>,
}

impl JTable {
    pub fn new(v: &GridFunction, eps: f64, rule: &QuadratureRule) -> Self {
        let nodes = rule.bivariate();
        let mut t = JTable {
            eps,
            weight: Vec::with_capacity(nodes.len()),
            a: Vec::with_capacity(nodes.len()),
            b: Vec::with_capacity(nodes.len()),
            s: Vec::with_capacity(nodes.len()),
        };
        for n in nodes {
            t.weight.push(n.weight);
            t.a.push(2.0 * d_eps(v, n.y1, n.y2, 0.0, eps, 0));
            t.b.push(d_eps(v, n.y1, n.y2, 0.0, eps, 1));
            t.s.push(n.y1 + n.y2);
        }
        t
    }

    pub fn eval(&self, g: f64) -> Result<f64> {
        let eg = self.eps * g;
        let mut acc = 0.0;
        for i in 0..self.weight.len() {
            let e = (self.a[i] - eg * self.s[i]).exp();
            if !e.is_finite() {
                return Err(Error::Numerical(format!("exponent overflow in J at g = {g} (eps = {})", self.eps)));
            }
            acc += self.weight[i] * e * self.b[i];
        }
        Ok(acc / (self.eps * self.eps))
    }
}

/// `J_eps(g, V)`.
pub fn eval_j(g: f64, v: &GridFunction, eps: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    JTable::new(v, eps, rule).eval(g)
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaSolve {
    pub gamma: f64,
    /// `J` at the returned root.
    pub residual: f64,
    pub bracket: GammaBracket,
    pub evaluations: usize,
    /// Whether `J` increased across the monotonicity samples.
    pub monotone: bool,
}

/// Solve `J_eps(gamma, V) = 0` on `(-R_K, R_K)`.
pub fn solve_gamma(
    v: &GridFunction,
    mu0: f64,
    eps: f64,
    alpha: AlphaParameter,
    rule: &QuadratureRule,
) -> Result<GammaSolve> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    let report = check_e0_membership(v, mu0);
    if !report.is_member() {
        return Err(Error::Input(format!("corrector outside E0: {}", report.failures.join("; "))));
    }
    let bracket = GammaBracket::new(v, mu0, alpha);
    let table = JTable::new(v, eps, rule);
    let r = bracket.r_k;

    let samples: Vec<f64> = (0..MONOTONE_SAMPLES)
        .map(|i| -r + 2.0 * r * i as f64 / (MONOTONE_SAMPLES - 1) as f64)
        .map(|g| table.eval(g))
        .collect::<Result<_>>()
        .map_err(|_| Error::EpsilonTooLarge { eps, stage: Stage::Gamma })?;
    let monotone = samples.windows(2).all(|w| w[1] > w[0]);
    if !monotone {
        warn!("J is not monotone on the bracket (eps = {eps}, R_K = {r})");
    }
    let (mut lo, mut hi) = (-r, r);
    let (mut f_lo, mut f_hi) = (samples[0], samples[MONOTONE_SAMPLES - 1]);
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::EpsilonTooLarge { eps, stage: Stage::Gamma });
    }
    // narrow with the samples already computed
    for (i, w) in samples.windows(2).enumerate() {
        if w[0] < 0.0 && w[1] >= 0.0 {
            let step = 2.0 * r / (MONOTONE_SAMPLES - 1) as f64;
            lo = -r + step * i as f64;
            hi = lo + step;
            f_lo = w[0];
            f_hi = w[1];
            break;
        }
    }
    let mut evaluations = MONOTONE_SAMPLES;
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        let f = table.eval(mid)?;
        evaluations += 1;
        if f == 0.0 {
            return Ok(GammaSolve { gamma: mid, residual: 0.0, bracket, evaluations, monotone });
        }
        if f < 0.0 {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
            f_hi = f;
        }
    }

    // secant from the bracket ends, kept inside the bracket
    let (mut x0, mut f0, mut x1, mut f1) = (lo, f_lo, hi, f_hi);
    let mut best = if f0.abs() < f1.abs() { (x0, f0) } else { (x1, f1) };
    for _ in 0..60 {
        if best.1.abs() <= J_TOL || f1 == f0 {
            break;
        }
        let mut x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !(x2 > lo && x2 < hi) {
            x2 = 0.5 * (lo + hi);
        }
        let f2 = table.eval(x2)?;
        evaluations += 1;
        if f2 < 0.0 {
            lo = x2;
        } else {
            hi = x2;
        }
        if f2.abs() < best.1.abs() {
            best = (x2, f2);
        }
        (x0, f0, x1, f1) = (x1, f1, x2, f2);
    }
    if best.1.abs() > J_TOL {
        warn!("gamma root stalled at |J| = {:e} (eps = {eps}); rounding floor of the quadrature sum", best.1.abs());
    }
    Ok(GammaSolve { gamma: best.0, residual: best.1, bracket, evaluations, monotone })
}
