//! Explicit Euler evolution of `∂_t f + m f = B_eps(f)` on the renormalized density.

use log::{debug, info};
use serde::Serialize;

use crate::density::{apply_b, DensityState};
use crate::error::{Error, Result};
use crate::fixed_point::stationarity_residual;
use crate::mortality::MortalityModel;

/// Largest admissible step, `0.2 / (1 + max m)` on the grid of `f`.
pub fn dt_max(f: &DensityState, model: &MortalityModel) -> f64 {
    let raw = model.raw();
    let top = f.nodes().iter().map(|&z| raw.eval(z)).fold(f64::NEG_INFINITY, f64::max);
    0.2 / (1.0 + top.max(0.0))
}

/// Negative mass (relative) tolerated before a step is refused.
const CLAMP_TOL: f64 = 1e-12;

/// One step; returns the renormalized density and the growth rate of the
/// unnormalized update.
pub fn step(f: &DensityState, model: &MortalityModel, eps: f64, dt: f64) -> Result<(DensityState, f64)> {
    let limit = dt_max(f, model);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Stability(format!("dt = {dt} exceeds dt_max = {limit}; use a smaller step")));
    }
    let b = apply_b(f, eps)?;
    let raw = model.raw();
    let h = f.spacing();
    let mut negative = 0.0;
    let values: Vec<f64> = f
        .nodes()
        .iter()
        .zip(f.values().iter().zip(b.values()))
        .map(|(&z, (&fv, &bv))| {
            let g = fv + dt * (bv - raw.eval(z) * fv);
            if g < 0.0 {
                negative -= g * h;
                0.0
            } else {
                g
            }
        })
        .collect();
    let mass_f = f.mass();
    if negative > CLAMP_TOL * mass_f {
        return Err(Error::Stability(format!("step produced negative mass {negative:e}; use a smaller step")));
    }
    let g = f.with_values(values);
    let mass_g = g.mass();
    let lambda_hat = (mass_g - mass_f) / (dt * mass_f);
    Ok((g.normalized()?, lambda_hat))
}

/// Settings of [`run_to_equilibrium`].
#[derive(Debug, Clone, Serialize)]
pub struct MarchConfig {
    /// Time step; `None` uses `dt_max`.
    pub dt: Option<f64>,
    pub equil_tol: f64,
    pub max_steps: usize,
    /// Record one trace row every this many steps.
    pub trace_every: usize,
}

impl Default for MarchConfig {
    fn default() -> Self {
        Self { dt: None, equil_tol: 1e-7, max_steps: 200_000, trace_every: 100 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub lambda_hat: f64,
    /// `||f_{n+1} - f_n||_1 / dt`.
    pub increment: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarchOutcome {
    #[serde(skip)]
    pub density: DensityState,
    pub lambda_hat: f64,
    pub converged: bool,
    pub steps: usize,
    pub time: f64,
    pub dt: f64,
    pub trace: Vec<TraceRow>,
}

/// Steps until `||f_{n+1} - f_n||_1 / dt <= equil_tol` or `max_steps`.
///
/// Running out of steps is not an error; the outcome is flagged instead.
pub fn run_to_equilibrium(
    init: &DensityState,
    model: &MortalityModel,
    eps: f64,
    cfg: &MarchConfig,
) -> Result<MarchOutcome> {
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => dt_max(init, model),
    };
    let mut f = init.normalized()?;
    let mut trace = Vec::new();
    let mut lambda_hat = f64::NAN;
    let every = cfg.trace_every.max(1);
    for n in 1..=cfg.max_steps {
        let (g, lh) = step(&f, model, eps, dt)?;
        let inc = g.l1_distance(&f)? / dt;
        lambda_hat = lh;
        f = g;
        let done = inc <= cfg.equil_tol;
        if n % every == 0 || done {
            trace.push(TraceRow { t: n as f64 * dt, lambda_hat, increment: inc });
            debug!("t = {:.2}: lambda_hat = {lambda_hat}, increment = {inc:e}", n as f64 * dt);
        }
        if done {
            info!("equilibrium after {n} steps (t = {:.2}), lambda_hat = {lambda_hat}", n as f64 * dt);
            return Ok(MarchOutcome {
                density: f,
                lambda_hat,
                converged: true,
                steps: n,
                time: n as f64 * dt,
                dt,
                trace,
            });
        }
    }
    Ok(MarchOutcome {
        density: f,
        lambda_hat,
        converged: false,
        steps: cfg.max_steps,
        time: cfg.max_steps as f64 * dt,
        dt,
        trace,
    })
}

/// Stationarity residual of a computed equilibrium.
pub fn equilibrium_certificate(f: &DensityState, lambda: f64, model: &MortalityModel, eps: f64) -> Result<f64> {
    stationarity_residual(f, lambda, model, eps)
}
