//! Functions of the trait variable sampled on a uniform symmetric window.
//!
//! A [`GridFunction`] stores values together with the first three derivatives
//! at every node of `[-L, L]`. Evaluation between nodes uses cubic Hermite
//! interpolation: `(values, deriv1)` drive orders 0 and 1, `(deriv2, deriv3)`
//! drive orders 2 and 3. Outside the window the function is continued by its
//! second-order Taylor polynomial at the nearest endpoint.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest admissible number of samples.
pub const MIN_SAMPLES: usize = 33;

/// Width of the finite-difference stencils used by [`GridFunction::from_samples`].
const STENCIL: usize = 7;

/// Weight exponent of the `E^alpha` norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaParameter(f64);

impl AlphaParameter {
    pub const MAX: f64 = 0.4;

    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= Self::MAX) {
            return Err(Error::Config(format!("alpha must lie in (0, 2/5], got {alpha}")));
        }
        Ok(Self(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `(1 + |z|)^alpha`.
    pub fn weight(self, z: f64) -> f64 {
        (1.0 + z.abs()).powf(self.0)
    }
}

impl Default for AlphaParameter {
    fn default() -> Self {
        Self(Self::MAX)
    }
}

#[derive(Debug)]
pub struct GridFunction {
    half_width: f64,
    values: Vec<f64>,
    deriv1: Vec<f64>,
    deriv2: Vec<f64>,
    deriv3: Vec<f64>,
    outside: AtomicUsize,
}

impl Clone for GridFunction {
    fn clone(&self) -> Self {
        Self {
            half_width: self.half_width,
            values: self.values.clone(),
            deriv1: self.deriv1.clone(),
            deriv2: self.deriv2.clone(),
            deriv3: self.deriv3.clone(),
            outside: AtomicUsize::new(0),
        }
    }
}

fn check_layout(half_width: f64, n: usize) -> Result<()> {
    if n.is_multiple_of(2) || n < MIN_SAMPLES {
        return Err(Error::Config(format!("sample count must be odd and at least {MIN_SAMPLES}, got {n}")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::Config(format!("half width must be positive, got {half_width}")));
    }
    Ok(())
}

/// Grid nodes `z_i = -L + i h`, `h = 2L / (N - 1)`.
pub fn nodes(half_width: f64, n: usize) -> Vec<f64> {
    let h = 2.0 * half_width / (n - 1) as f64;
    let mid = (n - 1) / 2;
    (0..n)
        .map(|i| {
            // symmetric construction keeps z = 0 exact and z_i = -z_{N-1-i}
            if i < mid {
                -((mid - i) as f64) * h
            } else {
                (i - mid) as f64 * h
            }
        })
        .collect()
}

/// Finite-difference weights on arbitrary offsets (Fornberg's recursion).
///
/// Returns `w[k][j]`, the weight of sample `j` for the `k`-th derivative at
/// offset 0, for `k = 0..=max_order`.
pub(crate) fn fd_weights(offsets: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

impl GridFunction {
    /// Samples `f` on the grid and fills the derivative arrays by finite
    /// differences.
    pub fn from_fn(f: impl Fn(f64) -> f64, half_width: f64, n: usize) -> Result<Self> {
        check_layout(half_width, n)?;
        let values: Vec<f64> = nodes(half_width, n).into_iter().map(f).collect();
        Self::from_samples(values, half_width)
    }

    /// Builds from node values; derivatives come from 7-point stencils,
    /// centred in the interior and shifted inward near the two ends.
    pub fn from_samples(values: Vec<f64>, half_width: f64) -> Result<Self> {
        let n = values.len();
        check_layout(half_width, n)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite sample at z = {}", nodes(half_width, n)[i])));
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        let half = STENCIL / 2;
        // weights depend only on the stencil position, so compute each once
        let mut cache: Vec<Option<Vec<Vec<f64>>>> = vec![None; STENCIL];
        let mut d = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            let start = i.saturating_sub(half).min(n - STENCIL);
            let shift = i - start;
            let w = cache[shift].get_or_insert_with(|| {
                let offsets: Vec<f64> = (0..STENCIL).map(|j| j as f64 - shift as f64).collect();
                fd_weights(&offsets, 3)
            });
            for (k, dk) in d.iter_mut().enumerate() {
                let s: f64 = (0..STENCIL).map(|j| w[k + 1][j] * values[start + j]).sum();
                dk[i] = s / h.powi(k as i32 + 1);
            }
        }
        let [deriv1, deriv2, deriv3] = d;
        Ok(Self { half_width, values, deriv1, deriv2, deriv3, outside: AtomicUsize::new(0) })
    }

    /// Builds from values and derivatives that are already known at the nodes.
    pub fn from_derivatives(
        values: Vec<f64>,
        deriv1: Vec<f64>,
        deriv2: Vec<f64>,
        deriv3: Vec<f64>,
        half_width: f64,
    ) -> Result<Self> {
        let n = values.len();
        check_layout(half_width, n)?;
        if deriv1.len() != n || deriv2.len() != n || deriv3.len() != n {
            return Err(Error::Input("derivative arrays differ in length".into()));
        }
        for (k, arr) in [&values, &deriv1, &deriv2, &deriv3].into_iter().enumerate() {
            if let Some(i) = arr.iter().position(|v| !v.is_finite()) {
                return Err(Error::Input(format!(
                    "non-finite derivative of order {k} at z = {}",
                    nodes(half_width, n)[i]
                )));
            }
        }
        Ok(Self { half_width, values, deriv1, deriv2, deriv3, outside: AtomicUsize::new(0) })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.len() - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        nodes(self.half_width, self.len())
    }

    /// Index of the node `z = 0`.
    pub fn center(&self) -> usize {
        (self.len() - 1) / 2
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn deriv1(&self) -> &[f64] {
        &self.deriv1
    }

    pub fn deriv2(&self) -> &[f64] {
        &self.deriv2
    }

    pub fn deriv3(&self) -> &[f64] {
        &self.deriv3
    }

    /// Stored samples of the derivative of the given order (0 = values).
    pub fn samples(&self, order: usize) -> &[f64] {
        match order {
            0 => &self.values,
            1 => &self.deriv1,
            2 => &self.deriv2,
            3 => &self.deriv3,
            _ => panic!("derivative order {order} is not stored"),
        }
    }

    /// Number of evaluations that fell outside `[-L, L]` since the last reset.
    pub fn outside_count(&self) -> usize {
        self.outside.load(Ordering::Relaxed)
    }

    pub fn reset_outside_count(&self) {
        self.outside.store(0, Ordering::Relaxed);
    }

    /// Value of the `order`-th derivative at `z`.
    ///
    /// Panics if `order > 3`.
    pub fn eval(&self, z: f64, order: usize) -> f64 {
        assert!(order <= 3, "derivative order {order} is not supported");
        let l = self.half_width;
        let n = self.len();
        if z.abs() > l {
            self.outside.fetch_add(1, Ordering::Relaxed);
            let i = if z > 0.0 { n - 1 } else { 0 };
            let dz = z - if z > 0.0 { l } else { -l };
            let (v, d1, d2, d3) = (self.values[i], self.deriv1[i], self.deriv2[i], self.deriv3[i]);
            return match order {
                0 => v + dz * (d1 + 0.5 * dz * d2),
                1 => d1 + dz * d2,
                2 => d2,
                _ => d3,
            };
        }
        let h = self.spacing();
        let s = (z + l) / h;
        let r = s.round();
        if (s - r).abs() < 1e-10 {
            return self.samples(order)[r as usize];
        }
        let j = (s.floor() as usize).min(n - 2);
        let t = s - j as f64;
        let (y, m) = if order < 2 { (&self.values, &self.deriv1) } else { (&self.deriv2, &self.deriv3) };
        let (y0, y1, m0, m1) = (y[j], y[j + 1], m[j], m[j + 1]);
        if order.is_multiple_of(2) {
            let t2 = t * t;
            let t3 = t2 * t;
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                + (t3 - 2.0 * t2 + t) * h * m0
                + (3.0 * t2 - 2.0 * t3) * y1
                + (t3 - t2) * h * m1
        } else {
            let t2 = t * t;
            (6.0 * t2 - 6.0 * t) / h * (y0 - y1) + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (3.0 * t2 - 2.0 * t) * m1
        }
    }

    /// Discrete `E^alpha` norm: the largest of `|u'|`, `(1+|z|)^a |u''|`
    /// and `(1+|z|)^a |u'''|` over the nodes.
    pub fn alpha_norm(&self, alpha: AlphaParameter) -> f64 {
        self.nodes()
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                let w = alpha.weight(z);
                self.deriv1[i].abs().max(w * self.deriv2[i].abs()).max(w * self.deriv3[i].abs())
            })
            .fold(0.0, f64::max)
    }

    /// Node-wise linear combination `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        if self.len() != other.len() || self.half_width != other.half_width {
            return Err(Error::Input("grid functions live on different grids".into()));
        }
        let mix = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| a * p + b * q).collect() };
        GridFunction::from_derivatives(
            mix(&self.values, &other.values),
            mix(&self.deriv1, &other.deriv1),
            mix(&self.deriv2, &other.deriv2),
            mix(&self.deriv3, &other.deriv3),
            self.half_width,
        )
    }

    /// `‖self - other‖_alpha`.
    pub fn distance(&self, other: &GridFunction, alpha: AlphaParameter) -> Result<f64> {
        Ok(self.combine(1.0, other, -1.0)?.alpha_norm(alpha))
    }

    /// Adds `slope * z` (the linear part does not touch higher derivatives).
    pub fn add_linear(&self, slope: f64) -> GridFunction {
        let z = self.nodes();
        GridFunction {
            half_width: self.half_width,
            values: self.values.iter().zip(&z).map(|(v, z)| v + slope * z).collect(),
            deriv1: self.deriv1.iter().map(|d| d + slope).collect(),
            deriv2: self.deriv2.clone(),
            deriv3: self.deriv3.clone(),
            outside: AtomicUsize::new(0),
        }
    }

    /// `z -> u(-z)`.
    pub fn reflect(&self) -> GridFunction {
        let rev = |x: &[f64], sign: f64| -> Vec<f64> { x.iter().rev().map(|v| sign * v).collect() };
        GridFunction {
            half_width: self.half_width,
            values: rev(&self.values, 1.0),
            deriv1: rev(&self.deriv1, -1.0),
            deriv2: rev(&self.deriv2, 1.0),
            deriv3: rev(&self.deriv3, -1.0),
            outside: AtomicUsize::new(0),
        }
    }
}

/// Outcome of [`check_e0_membership`].
#[derive(Debug, Clone, Default, Serialize)]
pub struct MembershipReport {
    pub failures: Vec<String>,
}

impl MembershipReport {
    pub fn is_member(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks `v(0) = 0`, `v'(0) = 0` and `v''(0) >= m''(0)` at the centre node.
pub fn check_e0_membership(v: &GridFunction, d2m_at_origin: f64) -> MembershipReport {
    let c = v.center();
    let mut failures = Vec::new();
    if v.values[c].abs() > 1e-10 {
        failures.push(format!("value at origin is {:e}, expected 0", v.values[c]));
    }
    if v.deriv1[c].abs() > 1e-8 {
        failures.push(format!("slope at origin is {:e}, expected 0", v.deriv1[c]));
    }
    if v.deriv2[c] < d2m_at_origin - 1e-8 {
        failures.push(format!("curvature at origin {} is below m''(0) = {}", v.deriv2[c], d2m_at_origin));
    }
    MembershipReport { failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn layout_is_validated() {
        assert!(GridFunction::from_fn(|z| z, 1.0, 40).is_err());
        assert!(GridFunction::from_fn(|z| z, 1.0, 31).is_err());
        assert!(GridFunction::from_fn(|z| z, -1.0, 33).is_err());
        assert!(GridFunction::from_fn(|z| 1.0 / z, 1.0, 33).is_err());
    }

    #[test]
    fn grid_is_symmetric_and_uniform() {
        let z = nodes(2.0, 41);
        assert_eq!(z[20], 0.0);
        assert!((z[0] + 2.0).abs() < 1e-12 * 2.0);
        for w in z.windows(2) {
            assert_abs_diff_eq!(w[1] - w[0], 0.1, epsilon = 1e-14);
        }
    }

    #[test]
    fn quadratic_second_derivative_is_exact() {
        let g = GridFunction::from_fn(|z| z * z, 2.0, 41).unwrap();
        for d in g.deriv2() {
            assert!((d - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sine_slope_at_origin() {
        let g = GridFunction::from_fn(f64::sin, 2.0, 321).unwrap();
        assert!((g.deriv1()[g.center()] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn quartic_third_derivative() {
        let g = GridFunction::from_fn(|z| z.powi(4), 1.0, 65).unwrap();
        let i = g.nodes().iter().position(|&z| (z - 0.5).abs() < 1e-12).unwrap();
        assert!((g.deriv3()[i] - 12.0).abs() < 1e-8);
    }

    #[test]
    fn quartic_derivatives_match_everywhere() {
        let g = GridFunction::from_fn(|z| z.powi(4) - z.powi(3) + 2.0 * z, 1.5, 61).unwrap();
        for (i, z) in g.nodes().into_iter().enumerate() {
            let exact = [4.0 * z.powi(3) - 3.0 * z * z + 2.0, 12.0 * z * z - 6.0 * z, 24.0 * z - 6.0];
            for (k, want) in exact.iter().enumerate() {
                let got = g.samples(k + 1)[i];
                assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "k={k} z={z}");
            }
        }
    }

    #[test]
    fn cubic_is_reproduced_between_nodes() {
        let g = GridFunction::from_fn(|z| z.powi(3), 1.0, 33).unwrap();
        assert_abs_diff_eq!(g.eval(0.5, 0), 0.125, epsilon = 1e-10);
        assert_abs_diff_eq!(g.eval(0.37, 1), 3.0 * 0.37 * 0.37, epsilon = 1e-10);
        assert_abs_diff_eq!(g.eval(-0.41, 2), -6.0 * 0.41, epsilon = 1e-10);
        assert_abs_diff_eq!(g.eval(0.77, 3), 6.0, epsilon = 1e-10);
    }

    #[test]
    fn centre_node_is_hit_exactly() {
        let g = GridFunction::from_fn(|z| z.sin() + z * z, 2.0, 41).unwrap();
        assert_eq!(g.eval(0.0, 0), 0.0);
    }

    #[test]
    fn taylor_continuation_outside_window() {
        let g = GridFunction::from_fn(|z| z * z, 1.0, 33).unwrap();
        assert_abs_diff_eq!(g.eval(1.3, 0), 1.69, epsilon = 1e-12);
        assert_abs_diff_eq!(g.eval(-1.3, 1), -2.6, epsilon = 1e-10);
        assert_eq!(g.outside_count(), 2);
        g.reset_outside_count();
        assert_eq!(g.outside_count(), 0);
    }

    #[test]
    fn alpha_norm_examples() {
        let a = AlphaParameter::new(0.4).unwrap();
        let lin = GridFunction::from_fn(|z| z, 4.0, 81).unwrap();
        assert_abs_diff_eq!(lin.alpha_norm(a), 1.0, epsilon = 1e-10);
        let zero = GridFunction::from_fn(|_| 0.0, 4.0, 81).unwrap();
        assert_eq!(zero.alpha_norm(a), 0.0);
        let half_sq = GridFunction::from_fn(|z| 0.5 * z * z, 4.0, 81).unwrap();
        assert_abs_diff_eq!(half_sq.alpha_norm(a), 4.0, epsilon = 1e-10);
    }

    #[test]
    fn alpha_parameter_range() {
        assert!(AlphaParameter::new(0.0).is_err());
        assert!(AlphaParameter::new(0.41).is_err());
        assert!(AlphaParameter::new(0.4).is_ok());
    }

    #[test]
    fn e0_membership_clauses() {
        let lin = GridFunction::from_fn(|z| z, 2.0, 41).unwrap();
        let r = check_e0_membership(&lin, 1.0);
        assert!(!r.is_member());
        assert!(r.failures.iter().any(|f| f.contains("slope")));
        let quarter = GridFunction::from_fn(|z| 0.25 * z * z, 2.0, 41).unwrap();
        let r = check_e0_membership(&quarter, 1.0);
        assert_eq!(r.failures.len(), 1);
        let ok = GridFunction::from_fn(|z| z * z, 2.0, 41).unwrap();
        assert!(check_e0_membership(&ok, 1.0).is_member());
    }

    #[test]
    fn reflection_flips_odd_derivatives() {
        let g = GridFunction::from_fn(|z| z.powi(3) + z * z, 1.0, 33).unwrap();
        let r = g.reflect();
        assert_abs_diff_eq!(r.eval(0.3, 0), g.eval(-0.3, 0), epsilon = 1e-14);
        assert_abs_diff_eq!(r.eval(0.3, 1), -g.eval(-0.3, 1), epsilon = 1e-12);
    }
}
