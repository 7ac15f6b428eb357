//! Selection (mortality) functions.
//!
//! A [`MortalityModel`] is a polynomial `m` together with a working local
//! minimum `z0`. All evaluators work in the translated variable `h = z - z0`
//! with `m(z0)` subtracted, so that `m(0) = m'(0) = 0`; the raw polynomial is
//! still available through [`MortalityModel::raw`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{AlphaParameter, GridFunction};

/// Dense polynomial `sum c_k z^k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::new(vec![0.0]);
        }
        Polynomial::new(self.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    /// The polynomial `h -> p(z0 + h)`.
    pub fn shift(&self, z0: f64) -> Polynomial {
        // repeated synthetic division gives the Taylor coefficients at z0
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                c[j] += z0 * c[j + 1];
            }
        }
        Polynomial::new(c)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// The polynomial `z -> p(-z)`.
    pub fn reflect(&self) -> Polynomial {
        Polynomial::new(self.coeffs.iter().enumerate().map(|(k, c)| if k % 2 == 1 { -c } else { *c }).collect())
    }
}

/// Named presets of the configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `z^2 / 2`.
    Quadratic,
    /// `z^2/2 + z^3/6 + z^4/24`: same second and third derivatives at 0 as
    /// `z^2/2 + z^3/6`, but bounded below on the whole line.
    CubicPerturbed,
    /// `(z^2 - 1)^2 + z/4`, minima near `-1.03` (deeper) and `0.97`.
    DoubleWell,
}

impl Preset {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "quadratic" => Ok(Preset::Quadratic),
            "cubic_perturbed" => Ok(Preset::CubicPerturbed),
            "double_well" => Ok(Preset::DoubleWell),
            other => Err(Error::Config(format!("unknown mortality preset {other:?}"))),
        }
    }

    pub fn polynomial(self) -> Polynomial {
        match self {
            Preset::Quadratic => Polynomial::new(vec![0.0, 0.0, 0.5]),
            Preset::CubicPerturbed => Polynomial::new(vec![0.0, 0.0, 0.5, 1.0 / 6.0, 1.0 / 24.0]),
            Preset::DoubleWell => Polynomial::new(vec![1.0, 0.25, -2.0, 0.0, 1.0]),
        }
    }

    /// Starting guesses for the local minima of the preset, left to right.
    pub fn minimum_guesses(self) -> Vec<f64> {
        match self {
            Preset::Quadratic | Preset::CubicPerturbed => vec![0.0],
            Preset::DoubleWell => vec![-1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MortalityModel {
    raw: Polynomial,
    z0: f64,
    m_z0: f64,
    m: Polynomial,
    dm: Polynomial,
    d2m: Polynomial,
    d3m: Polynomial,
}

impl MortalityModel {
    /// Uses `critical_point` as given, without checking that it is one.
    pub fn new(raw: Polynomial, critical_point: f64) -> Self {
        let m_z0 = raw.eval(critical_point);
        let mut shifted = raw.shift(critical_point).coeffs().to_vec();
        shifted[0] = 0.0;
        let m = Polynomial::new(shifted);
        let dm = m.derivative();
        let d2m = dm.derivative();
        let d3m = d2m.derivative();
        Self { raw, z0: critical_point, m_z0, m, dm, d2m, d3m }
    }

    /// Refines `guess` to a nearby critical point by Newton's method on `m'`.
    pub fn locate(raw: Polynomial, guess: f64) -> Result<Self> {
        let d1 = raw.derivative();
        let d2 = d1.derivative();
        let mut z = guess;
        for _ in 0..100 {
            let slope = d1.eval(z);
            let curv = d2.eval(z);
            if curv == 0.0 {
                break;
            }
            let step = slope / curv;
            z -= step;
            if step.abs() < 1e-15 * (1.0 + z.abs()) {
                break;
            }
        }
        if !z.is_finite() || d1.eval(z).abs() > 1e-10 {
            return Err(Error::Mortality {
                z: guess,
                reason: "no critical point found near the starting guess".into(),
            });
        }
        Ok(Self::new(raw, z))
    }

    pub fn from_preset(preset: Preset, which_minimum: usize) -> Result<Self> {
        let guesses = preset.minimum_guesses();
        let guess = *guesses.get(which_minimum).ok_or_else(|| {
            Error::Config(format!("preset has {} local minima, index {which_minimum} requested", guesses.len()))
        })?;
        Self::locate(preset.polynomial(), guess)
    }

    pub fn raw(&self) -> &Polynomial {
        &self.raw
    }

    pub fn critical_point(&self) -> f64 {
        self.z0
    }

    /// `m(z0)` of the raw polynomial.
    pub fn value_at_critical_point(&self) -> f64 {
        self.m_z0
    }

    /// Lower bound on `m''` at the working minimum.
    pub fn mu0(&self) -> f64 {
        self.d2m.eval(0.0)
    }

    pub fn m(&self, h: f64) -> f64 {
        self.m.eval(h)
    }

    pub fn dm(&self, h: f64) -> f64 {
        self.dm.eval(h)
    }

    pub fn d2m(&self, h: f64) -> f64 {
        self.d2m.eval(h)
    }

    pub fn d3m(&self, h: f64) -> f64 {
        self.d3m.eval(h)
    }

    /// Derivative of order `k <= 3` of the translated function.
    pub fn derivative(&self, h: f64, k: usize) -> f64 {
        match k {
            0 => self.m(h),
            1 => self.dm(h),
            2 => self.d2m(h),
            3 => self.d3m(h),
            _ => panic!("mortality derivatives are only needed up to order 3"),
        }
    }

    /// Translated polynomial (zero value and slope at the origin).
    pub fn translated(&self) -> &Polynomial {
        &self.m
    }

    /// The model `c * m` (same critical point).
    pub fn scaled(&self, c: f64) -> MortalityModel {
        MortalityModel::new(self.raw.scale(c), self.z0)
    }

    /// The model `z -> m(-z)` with the mirrored critical point.
    pub fn reflected(&self) -> MortalityModel {
        MortalityModel::new(self.raw.reflect(), -self.z0)
    }

    /// Samples the translated `m` exactly on a grid.
    pub fn to_grid(&self, half_width: f64, n: usize) -> Result<GridFunction> {
        let z = crate::grid::nodes(half_width, n);
        let s = |k: usize| z.iter().map(|&h| self.derivative(h, k)).collect::<Vec<_>>();
        GridFunction::from_derivatives(s(0), s(1), s(2), s(3), half_width)
    }
}

/// Measured constants of an accepted model.
#[derive(Debug, Clone, Serialize)]
pub struct MortalityReport {
    /// `max_k sup (1+|h|)^alpha |m^(k)| / (1 + m)` over the window.
    pub c_m: f64,
    /// Infimum of the translated `m` over the window.
    pub inf_m: f64,
    /// `m''(0)`.
    pub mu0: f64,
    /// `m(z0)` of the raw polynomial.
    pub m_at_critical_point: f64,
    /// Number of points checked.
    pub samples: usize,
}

/// Checks the standing assumptions on `m` over `|h| <= window` and measures `C_m`.
///
/// `samples` points are used (the solver passes four times its grid size).
pub fn validate_mortality(
    model: &MortalityModel,
    alpha: AlphaParameter,
    window: f64,
    samples: usize,
) -> Result<MortalityReport> {
    let slope = model.dm(0.0);
    if slope.abs() > 1e-8 {
        return Err(Error::Mortality { z: model.critical_point(), reason: format!("m'(z0) = {slope:e} is not zero") });
    }
    let mu0 = model.mu0();
    if !(mu0 > 0.0) {
        return Err(Error::Mortality { z: model.critical_point(), reason: format!("m''(z0) = {mu0} is not positive") });
    }
    let samples = samples.max(2);
    let mut c_m: f64 = 0.0;
    let mut inf_m = f64::INFINITY;
    for i in 0..samples {
        let h = -window + 2.0 * window * i as f64 / (samples - 1) as f64;
        let m = model.m(h);
        inf_m = inf_m.min(m);
        let base = 1.0 + m;
        if !(base > 0.0) {
            return Err(Error::Mortality {
                z: model.critical_point() + h,
                reason: format!("1 + m - m(z0) = {base} is not positive (compatibility m(z0) < 1 + inf m fails)"),
            });
        }
        let w = alpha.weight(h);
        for k in 1..=3 {
            c_m = c_m.max(w * model.derivative(h, k).abs() / base);
        }
    }
    if !c_m.is_finite() {
        return Err(Error::Mortality {
            z: model.critical_point(),
            reason: "weighted derivative ratios are not finite".into(),
        });
    }
    Ok(MortalityReport { c_m, inf_m, mu0, m_at_critical_point: model.value_at_critical_point(), samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shift_matches_direct_evaluation() {
        let p = Polynomial::new(vec![1.0, 0.25, -2.0, 0.0, 1.0]);
        let q = p.shift(0.7);
        for h in [-1.3, -0.2, 0.0, 0.4, 2.0] {
            assert_abs_diff_eq!(q.eval(h), p.eval(0.7 + h), epsilon = 1e-12);
        }
    }

    #[test]
    fn quadratic_is_accepted() {
        let m = MortalityModel::from_preset(Preset::Quadratic, 0).unwrap();
        let r = validate_mortality(&m, AlphaParameter::default(), 8.0, 4 * 513).unwrap();
        assert!(r.c_m.is_finite() && r.c_m > 0.0);
        assert_eq!(r.mu0, 1.0);
    }

    #[test]
    fn linear_is_rejected() {
        let m = MortalityModel::new(Polynomial::new(vec![0.0, 1.0]), 0.0);
        assert!(matches!(validate_mortality(&m, AlphaParameter::default(), 4.0, 100), Err(Error::Mortality { .. })));
        assert!(MortalityModel::locate(Polynomial::new(vec![0.0, 1.0]), 0.0).is_err());
    }

    #[test]
    fn double_well_minima() {
        let left = MortalityModel::from_preset(Preset::DoubleWell, 0).unwrap();
        let right = MortalityModel::from_preset(Preset::DoubleWell, 1).unwrap();
        assert!(left.critical_point() < -1.0 && left.critical_point() > -1.1);
        assert!(right.critical_point() > 0.9 && right.critical_point() < 1.0);
        assert!(left.mu0() > 0.0 && right.mu0() > 0.0);
        assert_abs_diff_eq!(left.m(0.0), 0.0);
        assert!(left.dm(0.0).abs() < 1e-12);
        // compatibility m(z0) < 1 + inf m for both wells
        for model in [&left, &right] {
            let r = validate_mortality(model, AlphaParameter::default(), 3.0, 4000).unwrap();
            assert!(r.inf_m > -1.0);
        }
        assert!(right.value_at_critical_point() > left.value_at_critical_point());
    }

    #[test]
    fn incompatible_minimum_is_rejected() {
        // z^2 (z+2)^2 + z: the well near 0 sits almost two units above the one near -2
        let raw = Polynomial::new(vec![0.0, 1.0, 4.0, 4.0, 1.0]);
        let deep = MortalityModel::locate(raw.clone(), -2.0).unwrap();
        assert!(validate_mortality(&deep, AlphaParameter::default(), 3.0, 2000).is_ok());
        let shallow = MortalityModel::locate(raw, 0.0).unwrap();
        assert!(shallow.mu0() > 0.0);
        assert!(matches!(
            validate_mortality(&shallow, AlphaParameter::default(), 3.0, 2000),
            Err(Error::Mortality { .. })
        ));
    }
}
