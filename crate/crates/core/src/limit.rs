//! The `eps -> 0` objects `λ0`, `γ0`, `V0`, `U0` and convergence measurements.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_point::{series_from, StationarySolution};
use crate::grid::GridFunction;
use crate::mortality::MortalityModel;

/// `1 - m(z0)` for the raw polynomial.
pub fn lambda0(model: &MortalityModel) -> f64 {
    1.0 - model.value_at_critical_point()
}

/// `m'''(0) / (2 m''(0))`.
pub fn gamma0(model: &MortalityModel) -> Result<f64> {
    let d2 = model.d2m(0.0);
    if !(d2 > 0.0) {
        return Err(Error::Mortality {
            z: model.critical_point(),
            reason: format!("degenerate second derivative m''(z0) = {d2}"),
        });
    }
    Ok(model.d3m(0.0) / (2.0 * d2))
}

/// `log(1 + m)` and its derivatives at `h`.
fn log_one_plus_m(model: &MortalityModel, h: f64, order: usize) -> f64 {
    let a = 1.0 + model.m(h);
    let l1 = model.dm(h) / a;
    match order {
        0 => a.ln(),
        1 => l1,
        2 => model.d2m(h) / a - l1 * l1,
        _ => {
            let l2 = model.d2m(h) / a;
            model.d3m(h) / a - 3.0 * l1 * l2 + 2.0 * l1 * l1 * l1
        }
    }
}

fn check_compatibility(model: &MortalityModel, half_width: f64, n: usize) -> Result<()> {
    for h in crate::grid::nodes(half_width, n) {
        let a = 1.0 + model.m(h);
        if !(a > 0.0) {
            return Err(Error::Compatibility { z: model.critical_point() + h, value: a });
        }
    }
    Ok(())
}

/// `V0(h) = Σ_k 2^k log(1 + m(2^-k h))` on `nodes(L, n)`.
pub fn v0_series(model: &MortalityModel, half_width: f64, n: usize, tol: f64) -> Result<GridFunction> {
    check_compatibility(model, half_width, n)?;
    series_from(|h, k| log_one_plus_m(model, h, k), half_width, n, tol)
}

/// `V0(h)` evaluated off-grid, without interpolation.
pub fn v0_at(model: &MortalityModel, h: f64, tol: f64) -> Result<f64> {
    let a = 1.0 + model.m(h);
    if !(a > 0.0) {
        return Err(Error::Compatibility { z: model.critical_point() + h, value: a });
    }
    let l2 = log_one_plus_m(model, 0.0, 2);
    let l3 = log_one_plus_m(model, 0.0, 3);
    let mut sum = 0.0;
    let mut scale = 1.0;
    let mut k = 0;
    while k < 60 && (h * h * l2.abs() / scale > tol || k < 4) {
        sum += scale * log_one_plus_m(model, h / scale, 0);
        scale *= 2.0;
        k += 1;
    }
    // Taylor remainder of the terms k >= K
    sum += h * h * l2 / scale + (4.0 / 3.0) * h * h * h * l3 / (6.0 * scale * scale);
    Ok(sum)
}

/// `U0(h) = γ0 h + V0(h)`.
pub fn u0(model: &MortalityModel, half_width: f64, n: usize, tol: f64) -> Result<GridFunction> {
    Ok(v0_series(model, half_width, n, tol)?.add_linear(gamma0(model)?))
}

/// Largest `|exp(U0(z) - 2 U0(z/2) + U0(0)) - (1 + m(z))|` on `|z| <= region`.
pub fn pu0_residual(model: &MortalityModel, region: f64, points: usize, tol: f64) -> Result<f64> {
    let g0 = gamma0(model)?;
    let u = |h: f64| -> Result<f64> { Ok(g0 * h + v0_at(model, h, tol)?) };
    let mut worst: f64 = 0.0;
    for i in 0..points {
        let z = -region + 2.0 * region * i as f64 / (points - 1).max(1) as f64;
        let r = (u(z)? - 2.0 * u(0.5 * z)? + u(0.0)?).exp() - (1.0 + model.m(z));
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// One row of the convergence table.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub err_u0: f64,
    pub err_du0: f64,
    pub err_d2u0: f64,
    pub err_lambda: f64,
    pub err_gamma: f64,
    /// `sup_{|z| <= eps R} |V_eps''' - (4/3) m'''|`.
    pub err_d3_window: f64,
}

impl ConvergenceRow {
    pub fn columns(&self) -> [f64; 5] {
        [self.err_u0, self.err_du0, self.err_d2u0, self.err_lambda, self.err_gamma]
    }
}

pub const COLUMN_NAMES: [&str; 5] = ["err_U0", "err_dU0", "err_d2U0", "err_lambda", "err_gamma"];

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slopes of `log err` against `log eps`, per column.
    pub slopes: [Option<f64>; 5],
    /// Whether every column is nonincreasing as `eps` decreases.
    pub monotone: [bool; 5],
    pub region: f64,
}

impl ConvergenceReport {
    pub fn all_monotone(&self) -> bool {
        self.monotone.iter().all(|m| *m)
    }
}

/// Least-squares slope through `(log x, log y)`; `None` with fewer than two
/// positive points.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Errors below this are rounding noise: they count as zero for the
/// monotonicity flags and are left out of slope fits.
pub const NOISE_FLOOR: f64 = 1e-9;

/// Third-derivative window radius `R` in `sup_{|z| <= eps R}`.
pub const WINDOW_RADIUS: f64 = 1.0;

/// Errors of each solution against the limit objects on `|z| <= region`.
pub fn convergence_report(
    solutions: &[StationarySolution],
    model: &MortalityModel,
    region: f64,
    tol: f64,
) -> Result<ConvergenceReport> {
    let mut sorted: Vec<&StationarySolution> = solutions.iter().collect();
    sorted.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let g0 = gamma0(model)?;
    let l0 = lambda0(model);
    let mut rows = Vec::with_capacity(sorted.len());
    let mut limit: Option<GridFunction> = None;
    for sol in sorted {
        let u = &sol.u;
        let same = limit.as_ref().is_some_and(|l| l.len() == u.len() && l.half_width() == u.half_width());
        if !same {
            limit = Some(u0(model, u.half_width(), u.len(), tol)?);
        }
        let u0g = limit.as_ref().expect("limit computed above");
        let z = u.nodes();
        let mut err = [0.0f64; 3];
        let mut d3 = 0.0f64;
        for (i, &zi) in z.iter().enumerate() {
            if zi.abs() <= region + 1e-12 {
                for (k, e) in err.iter_mut().enumerate() {
                    *e = e.max((u.samples(k)[i] - u0g.samples(k)[i]).abs());
                }
            }
            if zi.abs() <= sol.eps * WINDOW_RADIUS + 1e-12 {
                d3 = d3.max((sol.v.deriv3()[i] - 4.0 / 3.0 * model.d3m(zi)).abs());
            }
        }
        rows.push(ConvergenceRow {
            eps: sol.eps,
            err_u0: err[0],
            err_du0: err[1],
            err_d2u0: err[2],
            err_lambda: (sol.lambda - l0).abs(),
            err_gamma: (sol.gamma - g0).abs(),
            err_d3_window: d3,
        });
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let mut slopes = [None; 5];
    let mut monotone = [true; 5];
    for c in 0..5 {
        let col: Vec<f64> = rows.iter().map(|r| r.columns()[c]).collect();
        let floored: Vec<f64> = col.iter().map(|&e| if e < NOISE_FLOOR { 0.0 } else { e }).collect();
        slopes[c] = loglog_slope(&eps, &floored);
        monotone[c] = floored.windows(2).all(|w| w[1] <= w[0]);
    }
    Ok(ConvergenceReport { rows, slopes, monotone, region })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortality::{Polynomial, Preset};
    use approx::assert_abs_diff_eq;

    fn corpus() -> Vec<MortalityModel> {
        vec![
            MortalityModel::from_preset(Preset::Quadratic, 0).unwrap(),
            MortalityModel::from_preset(Preset::CubicPerturbed, 0).unwrap(),
            MortalityModel::from_preset(Preset::DoubleWell, 0).unwrap(),
            MortalityModel::from_preset(Preset::DoubleWell, 1).unwrap(),
        ]
    }

    #[test]
    fn lambda0_and_gamma0() {
        let q = MortalityModel::from_preset(Preset::Quadratic, 0).unwrap();
        assert_eq!(lambda0(&q), 1.0);
        assert_eq!(gamma0(&q).unwrap(), 0.0);
        let c = MortalityModel::from_preset(Preset::CubicPerturbed, 0).unwrap();
        assert_abs_diff_eq!(gamma0(&c).unwrap(), 0.5, epsilon = 1e-14);
        let p = MortalityModel::locate(Polynomial::new(vec![0.0, 0.0, 2.0, 1.0]), 0.0).unwrap();
        assert_abs_diff_eq!(gamma0(&p).unwrap(), 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(gamma0(&p.scaled(3.0)).unwrap(), 0.75, epsilon = 1e-14);
        let shifted = MortalityModel::locate(Polynomial::new(vec![0.2, 0.0, 1.0]), 0.0).unwrap();
        assert_abs_diff_eq!(lambda0(&shifted), 0.8, epsilon = 1e-15);
        let flat = MortalityModel::new(Polynomial::new(vec![0.0, 0.0, 0.0, 1.0]), 0.0);
        assert!(gamma0(&flat).is_err());
    }

    #[test]
    fn v0_properties() {
        for m in corpus() {
            let v = v0_series(&m, 8.0, 513, 1e-12).unwrap();
            let c = v.center();
            assert!(v.values()[c].abs() <= 1e-12);
            assert!(v.deriv1()[c].abs() <= 1e-12);
            assert_abs_diff_eq!(v.deriv2()[c], 2.0 * m.d2m(0.0), epsilon = 1e-6);
            assert!(crate::grid::check_e0_membership(&v, m.mu0()).is_member());
        }
    }

    #[test]
    fn v0_quadratic_value() {
        let m = MortalityModel::from_preset(Preset::Quadratic, 0).unwrap();
        let oracle: f64 = (0..=40).map(|k| 2f64.powi(k) * (1.0 + 0.5 * 4f64.powi(-k)).ln()).sum();
        let v = v0_series(&m, 8.0, 513, 1e-12).unwrap();
        assert_abs_diff_eq!(v.eval(1.0, 0), oracle, epsilon = 1e-7);
        assert_abs_diff_eq!(v0_at(&m, 1.0, 1e-14).unwrap(), oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(oracle, 0.8888, epsilon = 1e-3);
    }

    #[test]
    fn v0_commutes_with_reflection() {
        let m = MortalityModel::from_preset(Preset::CubicPerturbed, 0).unwrap();
        let a = v0_series(&m, 8.0, 513, 1e-12).unwrap();
        let b = v0_series(&m.reflected(), 8.0, 513, 1e-12).unwrap();
        let ar = a.reflect();
        for (x, y) in ar.values().iter().zip(b.values()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn pu0_is_exact() {
        for m in corpus() {
            assert!(pu0_residual(&m, 2.0, 81, 1e-14).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn u0_slope_at_origin() {
        let m = MortalityModel::from_preset(Preset::CubicPerturbed, 0).unwrap();
        let u = u0(&m, 8.0, 513, 1e-12).unwrap();
        assert_eq!(u.values()[u.center()], 0.0);
        assert_abs_diff_eq!(u.deriv1()[u.center()], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn incompatible_model_is_rejected() {
        // shallow well at the origin, much deeper well near -2
        let p = Polynomial::new(vec![0.0, 1.0, 4.0, 4.0, 1.0]);
        let m = MortalityModel::locate(p, 0.0).unwrap();
        assert!(matches!(v0_series(&m, 8.0, 513, 1e-12), Err(Error::Compatibility { .. })));
    }

    #[test]
    fn slopes() {
        let x = [0.4, 0.2, 0.1];
        assert_abs_diff_eq!(loglog_slope(&x, &[0.16, 0.04, 0.01]).unwrap(), 2.0, epsilon = 1e-12);
        assert!(loglog_slope(&[0.1], &[0.2]).is_none());
    }
}
