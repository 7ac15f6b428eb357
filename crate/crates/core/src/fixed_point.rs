//! The map `H`, the dilation series `S` and the Picard iteration for `V_eps`.

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::density::{apply_b, DensityState};
use crate::error::{Error, Result, Stage};
use crate::gamma::{solve_gamma, GammaSolve};
use crate::grid::{check_e0_membership, nodes, AlphaParameter, GridFunction};
use crate::limit::v0_series;
use crate::mortality::{validate_mortality, MortalityModel};
use crate::operator::TiltedOperator;
use crate::quadrature::QuadratureRule;

/// Largest `eps` the solver accepts.
pub const EPS_CAP: f64 = 0.5;

/// Solver settings.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub alpha: AlphaParameter,
    pub picard_tol: f64,
    pub max_iter: usize,
    pub series_tol: f64,
    pub quad_order: usize,
    /// Half-width `L` of the corrector grid.
    pub half_width: f64,
    /// Number of corrector samples (odd).
    pub samples: usize,
    pub eps_cap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: AlphaParameter::default(),
            picard_tol: 1e-10,
            max_iter: 200,
            series_tol: 1e-12,
            quad_order: crate::quadrature::DEFAULT_ORDER,
            half_width: 8.0,
            samples: 513,
            eps_cap: EPS_CAP,
        }
    }
}

/// `κ(α) = 2^{1+α} / (4 - 2^α)`.
pub fn kappa(alpha: f64) -> f64 {
    2f64.powf(1.0 + alpha) / (4.0 - 2f64.powf(alpha))
}

/// `Σ_k 2^k Λ(2^-k h)` with derivatives, on the grid `nodes(L, n)`.
///
/// `lambda(h, order)` evaluates `Λ` and its first three derivatives. At each
/// node the sum runs until `x = 2^-K h` enters the first grid cell around
/// zero (or `(tol / L)^{1/5}`, if larger); the remaining terms are summed in
/// closed form from the quintic Taylor polynomial of `Λ` at zero. Its fourth
/// and fifth coefficients come from central differences of `Λ'''` over one
/// cell.
///
/// Interpolating `Λ` inside the first cell instead would feed each value there
/// into the sum with weight `2^k`, and its small mismatch with `Λ''(0)`,
/// `Λ'''(0)` then shows up as a slowly decaying mode of the Picard iteration.
pub fn series_from(
    lambda: impl Fn(f64, usize) -> f64 + Sync,
    half_width: f64,
    n: usize,
    tol: f64,
) -> Result<GridFunction> {
    let z = nodes(half_width, n);
    let cell = 2.0 * half_width / (n - 1) as f64;
    let cutoff = cell.max((tol / half_width).powf(0.2));
    let (dm, d0, dp) = (lambda(-cell, 3), lambda(0.0, 3), lambda(cell, 3));
    let d4 = (dp - dm) / (2.0 * cell);
    let d5 = (dp - 2.0 * d0 + dm) / (cell * cell);
    // Λ^(p)(0) / p! for p = 2..=5
    let c = [lambda(0.0, 2) / 2.0, d0 / 6.0, d4 / 24.0, d5 / 120.0];
    let rows: Vec<[f64; 4]> = z
        .par_iter()
        .map(|&h| {
            let mut s = [0.0; 4];
            let mut scale = 1.0;
            let mut x = h;
            while x.abs() > cutoff {
                s[0] += scale * lambda(x, 0);
                s[1] += lambda(x, 1);
                s[2] += lambda(x, 2) / scale;
                s[3] += lambda(x, 3) / (scale * scale);
                scale *= 2.0;
                x = h / scale;
            }
            // the rescaled tail of x^p sums to x^p / (1 - 2^{1-p})
            for (i, &cp) in c.iter().enumerate() {
                let p = i as i32 + 2;
                let pf = p as f64;
                let f = cp / (1.0 - 2f64.powi(1 - p));
                s[0] += scale * f * x.powi(p);
                s[1] += pf * f * x.powi(p - 1);
                s[2] += pf * (pf - 1.0) * f * x.powi(p - 2) / scale;
                if p >= 3 {
                    s[3] += pf * (pf - 1.0) * (pf - 2.0) * f * x.powi(p - 3) / (scale * scale);
                }
            }
            s
        })
        .collect();
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<_>>();
    let out = GridFunction::from_derivatives(col(0), col(1), col(2), col(3), half_width)?;
    if let Some(i) = out.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("series diverged at h = {}", z[i])));
    }
    debug!("series cutoff {cutoff:e}");
    Ok(out)
}

/// `S(Λ)(h) = Σ_k 2^k Λ(2^-k h)` for a sampled `Λ` with `Λ(0) = Λ'(0) = 0`.
pub fn series_s(lambda: &GridFunction, tol: f64) -> Result<GridFunction> {
    let c = lambda.center();
    let v0 = lambda.values()[c];
    if v0.abs() > 1e-10 {
        return Err(Error::Input(format!("series argument has value {v0:e} at the origin")));
    }
    let slope = lambda.deriv1()[c];
    if slope.abs() > 1e-8 {
        return Err(Error::NonzeroSlope { slope });
    }
    series_from(|h, k| lambda.eval(h, k), lambda.half_width(), lambda.len(), tol)
}

/// `Γ^m(z) = log((I0 + m(z)) / I0)` and `Γ^I(z) = log(I(z) / I0)`.
pub fn eval_gamma_terms(op: &TiltedOperator<'_>, model: &MortalityModel, i0: f64, z: f64) -> Result<(f64, f64)> {
    let arg = i0 + model.m(z);
    if !(arg > 0.0) {
        return Err(Error::Compatibility { z, value: arg });
    }
    let iz = op.value(z)?;
    Ok(((arg / i0).ln(), (iz / i0).ln()))
}

/// `Γ = Γ^m - Γ^I` sampled on the grid of `v`, with derivatives from the
/// moments of the tilted measure.
pub fn gamma_function(
    op: &TiltedOperator<'_>,
    v: &GridFunction,
    model: &MortalityModel,
) -> Result<(GridFunction, f64)> {
    let z = v.nodes();
    let moments = op.moments_at(&z)?;
    let i0 = moments[v.center()].i;
    let n = z.len();
    let (mut g0, mut g1, mut g2, mut g3) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (j, (&h, mo)) in z.iter().zip(&moments).enumerate() {
        let a = i0 + model.m(h);
        if !(a > 0.0) {
            return Err(Error::Compatibility { z: h, value: a });
        }
        let (m1, m2, m3) = (model.dm(h) / a, model.d2m(h) / a, model.d3m(h) / a);
        let li = mo.log_derivatives();
        g0[j] = (a / i0).ln() - (mo.i / i0).ln();
        g1[j] = m1 - li[0];
        g2[j] = m2 - m1 * m1 - li[1];
        g3[j] = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1 - li[2];
    }
    Ok((GridFunction::from_derivatives(g0, g1, g2, g3, v.half_width())?, i0))
}

/// Result of one application of `H`.
#[derive(Debug, Clone)]
pub struct HOutput {
    pub v: GridFunction,
    pub gamma: GammaSolve,
    /// `I_eps(V)(0)` at the solved `gamma`.
    pub i0: f64,
}

fn check_eps(eps: f64, cfg: &SolverConfig) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    if eps > cfg.eps_cap {
        return Err(Error::EpsilonTooLarge { eps, stage: Stage::Cap });
    }
    Ok(())
}

/// `H(V) = S(Γ^m - Γ^I)`.
pub fn apply_h(
    v: &GridFunction,
    model: &MortalityModel,
    eps: f64,
    cfg: &SolverConfig,
    rule: &QuadratureRule,
) -> Result<HOutput> {
    check_eps(eps, cfg)?;
    let gamma = solve_gamma(v, model.mu0(), eps, cfg.alpha, rule)?;
    let op = TiltedOperator::new(v, gamma.gamma, eps, rule)?;
    let (lambda, i0) = gamma_function(&op, v, model)?;
    let out = series_s(&lambda, cfg.series_tol)?;
    Ok(HOutput { v: out, gamma, i0 })
}

/// Converged stationary pair.
#[derive(Debug, Clone, Serialize)]
pub struct StationarySolution {
    pub eps: f64,
    pub lambda: f64,
    pub gamma: f64,
    #[serde(skip)]
    pub v: GridFunction,
    #[serde(skip)]
    pub u: GridFunction,
    pub iterations: usize,
    pub residual: f64,
    /// `||V_{n+1} - V_n||_alpha` per iteration.
    pub residuals: Vec<f64>,
    /// Successive residual ratios.
    pub contraction_trace: Vec<f64>,
    pub kappa: f64,
    pub c_m: f64,
    /// Radius `2 C_m / (1 - κ)` of the invariant ball.
    pub r0: f64,
    /// Largest `||V_n||_alpha` seen.
    pub max_norm: f64,
    /// `J` at the final `gamma`.
    pub gamma_residual: f64,
    /// Corrector evaluations that left the grid window.
    pub outside_evaluations: usize,
}

/// Picard iteration `V <- H(V)` started from `V_0`.
pub fn picard_solve(model: &MortalityModel, eps: f64, cfg: &SolverConfig) -> Result<StationarySolution> {
    check_eps(eps, cfg)?;
    let report = validate_mortality(model, cfg.alpha, cfg.half_width, 4 * cfg.samples)?;
    let rule = QuadratureRule::new(cfg.quad_order)?;
    picard_from(v0_series(model, cfg.half_width, cfg.samples, cfg.series_tol)?, model, eps, cfg, &rule, report.c_m)
}

/// Picard iteration from an explicit starting corrector.
pub fn picard_from(
    start: GridFunction,
    model: &MortalityModel,
    eps: f64,
    cfg: &SolverConfig,
    rule: &QuadratureRule,
    c_m: f64,
) -> Result<StationarySolution> {
    check_eps(eps, cfg)?;
    let kap = kappa(cfg.alpha.value());
    let r0 = 2.0 * c_m / (1.0 - kap);
    let mut v = start;
    let mut residuals = Vec::new();
    let mut increases = 0;
    let mut max_norm = v.alpha_norm(cfg.alpha);
    let mut outside = 0;
    for it in 1..=cfg.max_iter {
        v.reset_outside_count();
        let out = apply_h(&v, model, eps, cfg, rule)?;
        outside += v.outside_count();
        let res = out.v.distance(&v, cfg.alpha)?;
        let norm = out.v.alpha_norm(cfg.alpha);
        max_norm = max_norm.max(norm);
        if norm > r0 * 1.05 {
            warn!("iterate norm {norm} left the ball of radius {r0}");
        }
        debug!("Picard iteration {it}: residual {res:e}, gamma {}", out.gamma.gamma);
        if let Some(&prev) = residuals.last() {
            if res > prev {
                increases += 1;
            } else {
                increases = 0;
            }
        }
        residuals.push(res);
        v = out.v;
        if res <= cfg.picard_tol {
            return finish(v, model, eps, cfg, rule, residuals, kap, c_m, r0, max_norm, outside);
        }
        if increases >= 3 {
            return Err(Error::EpsilonTooLarge { eps, stage: Stage::Contraction });
        }
    }
    let residual = residuals.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::NotConverged { iterations: cfg.max_iter, residual, trace: residuals })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    v: GridFunction,
    model: &MortalityModel,
    eps: f64,
    cfg: &SolverConfig,
    rule: &QuadratureRule,
    residuals: Vec<f64>,
    kappa: f64,
    c_m: f64,
    r0: f64,
    max_norm: f64,
    outside: usize,
) -> Result<StationarySolution> {
    let membership = check_e0_membership(&v, model.mu0());
    if !membership.is_member() {
        return Err(Error::Numerical(format!("converged corrector is outside E0: {}", membership.failures.join("; "))));
    }
    let g = solve_gamma(&v, model.mu0(), eps, cfg.alpha, rule)?;
    // I(0) is the rate for m - m(z0); report the rate for the raw polynomial
    let lambda = TiltedOperator::new(&v, g.gamma, eps, rule)?.value(0.0)? - model.value_at_critical_point();
    let u = v.add_linear(g.gamma);
    let contraction_trace = residuals.windows(2).map(|w| w[1] / w[0]).collect();
    info!("eps = {eps}: converged in {} iterations, lambda = {lambda}, gamma = {}", residuals.len(), g.gamma);
    Ok(StationarySolution {
        eps,
        lambda,
        gamma: g.gamma,
        v,
        u,
        iterations: residuals.len(),
        residual: *residuals.last().expect("at least one iteration"),
        residuals,
        contraction_trace,
        kappa,
        c_m,
        r0,
        max_norm,
        gamma_residual: g.residual,
        outside_evaluations: outside,
    })
}

/// `F(z) = (2π)^-1/2 eps^-1 exp(-z²/(2 eps²) - U(z - z0))` on the density
/// grid, normalized to unit mass. `z` is the raw trait; `U` is centred at the
/// working minimum.
pub fn reconstruct_f(
    sol: &StationarySolution,
    model: &MortalityModel,
    half_width: f64,
    n: usize,
) -> Result<DensityState> {
    let eps = sol.eps;
    let z0 = model.critical_point();
    let c = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * eps);
    let f = DensityState::from_fn(
        |z| {
            let h = z - z0;
            c * (-(h * h) / (2.0 * eps * eps) - sol.u.eval(h, 0)).exp()
        },
        half_width,
        n,
        eps,
    )?;
    f.normalized()
}

/// `||λ F + m F - B_eps(F)||_1 / ||F||_1` with `m` the raw polynomial.
pub fn stationarity_residual(f: &DensityState, lambda: f64, model: &MortalityModel, eps: f64) -> Result<f64> {
    let b = apply_b(f, eps)?;
    let h = f.spacing();
    let z = f.nodes();
    let raw = model.raw();
    let num: f64 = z
        .iter()
        .zip(f.values().iter().zip(b.values()))
        .map(|(&z, (&fv, &bv))| ((lambda + raw.eval(z)) * fv - bv).abs())
        .sum::<f64>()
        * h;
    Ok(num / f.mass())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortality::{Polynomial, Preset};
    use approx::assert_abs_diff_eq;

    #[test]
    fn kappa_values() {
        assert_abs_diff_eq!(kappa(0.0), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(kappa(0.4), 0.98453, epsilon = 1e-5);
        let threshold = 2.0 - 3f64.log2();
        assert!(kappa(threshold - 1e-6) < 1.0 && kappa(threshold + 1e-6) > 1.0);
    }

    #[test]
    fn series_of_monomials() {
        let sq = GridFunction::from_fn(|h| h * h, 4.0, 129).unwrap();
        let s = series_s(&sq, 1e-12).unwrap();
        assert_abs_diff_eq!(s.eval(3.0, 0), 18.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.eval(3.0, 2), 4.0, epsilon = 1e-9);
        let cube = GridFunction::from_fn(|h| h * h * h, 4.0, 129).unwrap();
        let s = series_s(&cube, 1e-12).unwrap();
        assert_abs_diff_eq!(s.eval(1.0, 0), 4.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.eval(1.0, 3), 8.0, epsilon = 1e-9);
        let lin = GridFunction::from_fn(|h| h, 4.0, 129).unwrap();
        assert!(matches!(series_s(&lin, 1e-12), Err(Error::NonzeroSlope { .. })));
    }

    #[test]
    fn series_of_log_matches_partial_sums() {
        let lam = |h: f64| (1.0 + h * h / 2.0).ln();
        let oracle: f64 = (0..=40).map(|k| 2f64.powi(k) * lam(2f64.powi(-k))).sum();
        let g = GridFunction::from_fn(lam, 8.0, 513).unwrap();
        let s = series_s(&g, 1e-12).unwrap();
        assert_abs_diff_eq!(s.eval(1.0, 0), oracle, epsilon = 1e-5);
        assert_abs_diff_eq!(s.eval(1.0, 0), 0.8888, epsilon = 1e-3);
    }

    #[test]
    fn cap_is_enforced() {
        let m = MortalityModel::from_preset(Preset::Quadratic, 0).unwrap();
        let err = picard_solve(&m, 0.9, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EpsilonTooLarge { stage: Stage::Cap, .. }));
        assert!(err.to_string().contains("epsilon above contraction threshold"));
    }

    #[test]
    fn quadratic_solve() {
        let m = MortalityModel::from_preset(Preset::Quadratic, 0).unwrap();
        let sol = picard_solve(&m, 0.05, &SolverConfig::default()).unwrap();
        assert!(sol.residual <= 1e-10);
        assert!((0.9..=1.1).contains(&sol.lambda));
        assert_abs_diff_eq!(sol.gamma, 0.0, epsilon = 1e-9);
        assert!(sol.contraction_trace.iter().all(|r| *r < 0.95));
        // λ = 1 - E_F[m] since B preserves mass
        let f = reconstruct_f(&sol, &m, 2.0, 4096).unwrap();
        assert_abs_diff_eq!(sol.lambda, 1.0 - f.expectation(|z| z * z / 2.0), epsilon = 1e-6);
        assert!(stationarity_residual(&f, sol.lambda, &m, 0.05).unwrap() < 1e-4);
    }

    #[test]
    fn fixed_point_is_attracting() {
        let m = MortalityModel::locate(Polynomial::new(vec![0.0, 0.0, 0.5, 1.0 / 6.0, 1.0 / 24.0]), 0.0).unwrap();
        let cfg = SolverConfig::default();
        let rule = QuadratureRule::new(cfg.quad_order).unwrap();
        let sol = picard_solve(&m, 0.1, &cfg).unwrap();
        let bump = GridFunction::from_fn(|z| 0.1 * z * z * (-z * z).exp(), cfg.half_width, cfg.samples).unwrap();
        let start = sol.v.combine(1.0, &bump, 1.0).unwrap();
        let again = picard_from(start, &m, 0.1, &cfg, &rule, sol.c_m).unwrap();
        assert!(again.v.distance(&sol.v, cfg.alpha).unwrap() < 1e-6);
        let h = apply_h(&sol.v, &m, 0.1, &cfg, &rule).unwrap();
        assert!(h.v.distance(&sol.v, cfg.alpha).unwrap() < 1e-9);
        let c = h.v.center();
        assert!(h.v.values()[c].abs() <= 1e-10);
        assert!(h.v.deriv1()[c].abs() <= 1e-7);
        assert!(h.v.deriv2()[c] >= m.mu0() - 1e-8);
    }

    #[test]
    fn wrong_lambda_is_detected() {
        let m = MortalityModel::from_preset(Preset::Quadratic, 0).unwrap();
        let f = DensityState::gaussian(0.0, 0.01, 2.5, 2048, 0.1).unwrap();
        let base = stationarity_residual(&f, 1.0, &m, 0.1).unwrap();
        let off = stationarity_residual(&f, 1.5, &m, 0.1).unwrap();
        assert_abs_diff_eq!(off, 0.5, epsilon = base + 1e-3);
    }
}
