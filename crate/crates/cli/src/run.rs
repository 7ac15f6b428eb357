//! The `stationary`, `march` and `converge` subcommands.
//!
//! Each returns `Ok(true)` when every computation converged and every
//! certificate passed, `Ok(false)` when results were written but a check
//! failed.

use std::path::Path;

use anyhow::{Context, Result};
use infmodel::density::DensityState;
use infmodel::fixed_point::{picard_solve, reconstruct_f, stationarity_residual};
use infmodel::limit::{convergence_report, COLUMN_NAMES};
use infmodel::march::{equilibrium_certificate, run_to_equilibrium};
use log::info;
use rayon::prelude::*;
use serde_json::json;

use crate::config::Config;
use crate::output::{ensure_dir, write_f, write_json, write_profile, write_rows, write_trace, write_u};

pub fn stationary(cfg: &Config, out: &Path) -> Result<bool> {
    let model = cfg.model()?;
    let solver = cfg.solver()?;
    let eps = cfg.solver.eps;
    let sol = picard_solve(&model, eps, &solver).context("stationary solve failed")?;
    let d = &cfg.discretization;
    let f = reconstruct_f(&sol, &model, d.density_half_width, d.density_samples)?;
    let cert = stationarity_residual(&f, sol.lambda, &model, eps)?;
    let passed = cert <= cfg.solver.certificate_tol;
    ensure_dir(out)?;
    write_json(
        &out.join("solution.json"),
        &json!({
            "eps": sol.eps,
            "lambda": sol.lambda,
            "gamma": sol.gamma,
            "iterations": sol.iterations,
            "residual": sol.residual,
            "critical_point": model.critical_point(),
            "stationarity_residual": cert,
            "certificate_passed": passed,
            "diagnostics": &sol,
        }),
    )?;
    write_u(&out.join("U.csv"), &sol, &model)?;
    write_f(&out.join("F.csv"), &f, &sol, &model)?;
    println!(
        "eps = {eps}: lambda = {:.10}, gamma = {:.10}, {} iterations, residual {:.2e}, stationarity residual {cert:.2e}",
        sol.lambda, sol.gamma, sol.iterations, sol.residual
    );
    Ok(passed)
}

pub fn march(cfg: &Config, out: &Path) -> Result<bool> {
    let models = cfg.all_minima()?;
    // only the raw polynomial enters the evolution
    let model = &models[0];
    let m = &cfg.march;
    let eps = m.eps;
    let centres: Vec<f64> =
        if m.inits.is_empty() { models.iter().map(|mm| mm.critical_point()).collect() } else { m.inits.clone() };
    let d = &cfg.discretization;
    let mcfg = cfg.march();
    let runs = centres
        .par_iter()
        .map(|&c| {
            let init = DensityState::gaussian(c, eps * eps, d.density_half_width, d.density_samples, eps)?;
            let outcome = run_to_equilibrium(&init, model, eps, &mcfg)?;
            let cert = equilibrium_certificate(&outcome.density, outcome.lambda_hat, model, eps)?;
            info!("init {c}: lambda_hat {}, certificate {cert:e}", outcome.lambda_hat);
            Ok((c, outcome, cert))
        })
        .collect::<Result<Vec<_>, infmodel::Error>>()
        .context("time march failed")?;

    ensure_dir(out)?;
    let mut summary = Vec::new();
    let mut passed = true;
    for (k, (c, o, cert)) in runs.iter().enumerate() {
        write_trace(&out.join(format!("march_{k}_trace.csv")), &o.trace)?;
        write_profile(&out.join(format!("march_{k}_profile.csv")), &o.density)?;
        let ok = o.converged && *cert <= m.certificate_tol;
        passed &= ok;
        println!(
            "run {k} (init {c}): {} after t = {:.2}, lambda_hat = {:.8}, mean = {:.5}, certificate {cert:.2e}",
            if o.converged { "equilibrium" } else { "NOT converged" },
            o.time,
            o.lambda_hat,
            o.density.mean()
        );
        summary.push(json!({
            "init": c,
            "converged": o.converged,
            "steps": o.steps,
            "time": o.time,
            "dt": o.dt,
            "lambda_hat": o.lambda_hat,
            "mean": o.density.mean(),
            "certificate": cert,
            "certificate_passed": ok,
        }));
    }
    let mut distances = Vec::new();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let dist = runs[i].1.density.l1_distance(&runs[j].1.density)?;
            println!("L1 distance between runs {i} and {j}: {dist:.6}");
            distances.push(json!({ "runs": [i, j], "l1": dist }));
        }
    }
    write_json(&out.join("march.json"), &json!({ "eps": eps, "runs": summary, "distances": distances }))?;
    Ok(passed)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn converge(cfg: &Config, out: &Path) -> Result<bool> {
    let model = cfg.model()?;
    let solver = cfg.solver()?;
    let sols = cfg
        .sweep
        .eps
        .par_iter()
        .map(|&e| picard_solve(&model, e, &solver))
        .collect::<Result<Vec<_>, _>>()
        .context("sweep solve failed")?;
    let report = convergence_report(&sols, &model, cfg.sweep.region, solver.series_tol)?;

    let mut rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![r.eps.to_string()];
            v.extend(r.columns().iter().map(|x| x.to_string()));
            v.push(r.err_d3_window.to_string());
            v
        })
        .collect();
    let mut slope = vec!["slope".to_string()];
    slope.extend(report.slopes.iter().map(|s| fmt_opt(*s)));
    rows.push(slope);
    let mut mono = vec!["monotone".to_string()];
    mono.extend(report.monotone.iter().map(|b| b.to_string()));
    rows.push(mono);
    let passed = report.all_monotone();
    rows.push(vec!["pass".into(), passed.to_string()]);
    let mut header = vec!["eps"];
    header.extend(COLUMN_NAMES);
    header.push("err_d3V_window");
    ensure_dir(out)?;
    write_rows(&out.join("converge.csv"), &header, &rows)?;

    for r in &report.rows {
        println!(
            "eps = {:<6} U {:.3e}  dU {:.3e}  d2U {:.3e}  lambda {:.3e}  gamma {:.3e}",
            r.eps, r.err_u0, r.err_du0, r.err_d2u0, r.err_lambda, r.err_gamma
        );
    }
    let slopes: Vec<String> = report.slopes.iter().map(|s| s.map_or("-".into(), |v| format!("{v:.2}"))).collect();
    println!("slopes: {}", slopes.join(" "));
    println!("all columns monotone: {passed}");
    Ok(passed)
}
