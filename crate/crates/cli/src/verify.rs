//! The invariant suite behind `infmodel verify`. Nothing here is random, so
//! the report is the same on every run.

use anyhow::Result;
use infmodel::density::{apply_b, DensityState};
use infmodel::gamma::{eval_j, solve_gamma};
use infmodel::limit::{pu0_residual, v0_series};
use infmodel::operator::eval_w;
use infmodel::{GridFunction, QuadratureRule};

use crate::config::Config;

struct Item {
    name: String,
    ok: bool,
    detail: String,
}

fn item(name: impl Into<String>, value: f64, tol: f64) -> Item {
    Item {
        name: name.into(),
        ok: value.is_finite() && value.abs() <= tol,
        detail: format!("{value:.2e} (tol {tol:.0e})"),
    }
}

fn moments(rule: &QuadratureRule) -> Result<Vec<Item>> {
    let e = |g: &dyn Fn(f64, f64) -> f64| rule.gauss_q2d(g);
    Ok(vec![
        item("quadrature: normalization", e(&|_, _| 1.0)? - 1.0, 1e-10),
        item("quadrature: E[y1 + y2] = 0", e(&|a, b| a + b)?, 1e-10),
        item("quadrature: E[y1 y2] = -1/4", e(&|a, b| a * b)? + 0.25, 1e-10),
        item("quadrature: E[y1^2 + y2^2] = 3/2", e(&|a, b| a * a + b * b)? - 1.5, 1e-10),
        item("quadrature: E[(y1 + y2)^4] = 3", e(&|a, b| (a + b).powi(4))? - 3.0, 1e-10),
        item("quadrature: E[(y1 - y2)^4] = 12", e(&|a, b| (a - b).powi(4))? - 12.0, 1e-10),
    ])
}

fn gaussian_invariance() -> Result<Vec<Item>> {
    let mut items = Vec::new();
    for eps in [0.05, 0.1, 0.2] {
        let g = DensityState::gaussian(0.0, eps * eps, 5.0, 4096, eps)?;
        let b = apply_b(&g, eps)?;
        items.push(item(format!("B: Gaussian invariance at eps = {eps}"), b.l1_distance(&g)?, 1e-6));
        items.push(item(format!("B: mass drift at eps = {eps}"), b.mass() - g.mass(), 1e-10));
    }
    let g = DensityState::gaussian(0.3, 0.02, 5.0, 1024, 0.1)?;
    let b = apply_b(&g, 0.1)?;
    let b2 = apply_b(&g.scaled(2.5)?, 0.1)?;
    let hom = b2.values().iter().zip(b.values()).fold(0.0_f64, |a, (x, y)| a.max((x - 2.5 * y).abs()));
    items.push(item("B: homogeneity", hom, 1e-12));
    Ok(items)
}

fn symmetry(cfg: &Config, rule: &QuadratureRule) -> Result<Vec<Item>> {
    let model = cfg.model()?;
    let solver = cfg.solver()?;
    let eps = cfg.solver.eps;
    let v = v0_series(&model, solver.half_width, solver.samples, solver.series_tol)?;
    let r = v.reflect();
    let mut worst = 0.0_f64;
    for g in [-0.5, 0.1, 0.7] {
        worst = worst.max((eval_j(g, &v, eps, rule)? + eval_j(-g, &r, eps, rule)?).abs());
    }
    let a = solve_gamma(&v, model.mu0(), eps, solver.alpha, rule)?;
    let b = solve_gamma(&r, model.mu0(), eps, solver.alpha, rule)?;
    let even = GridFunction::from_fn(|z| z * z / 2.0, solver.half_width, solver.samples)?;
    let e = solve_gamma(&even, 1.0, eps, solver.alpha, rule)?;
    let w1 = eval_w(&v, a.gamma, eps, 0.0, 1, rule)?;
    Ok(vec![
        item("J: odd under reflection of V", worst, 1e-10),
        item("gamma: flips under reflection of V", a.gamma + b.gamma, 1e-8),
        item("gamma: zero for even V", e.gamma, 1e-8),
        Item {
            name: "J: decreasing on the bracket".into(),
            ok: a.monotone && b.monotone && e.monotone,
            detail: format!("{} monotone samples per solve", if a.monotone { "all" } else { "not all" }),
        },
        item("W1 vanishes at the origin for the root gamma", w1, 1e-8),
    ])
}

/// Prints one line per item; `Ok(true)` when all pass.
pub fn verify(cfg: &Config) -> Result<bool> {
    let d = &cfg.discretization;
    let rule = QuadratureRule::new(d.quad_order)?;
    let model = cfg.model()?;
    let mut items = moments(&rule)?;
    items.extend(gaussian_invariance()?);
    match symmetry(cfg, &rule) {
        Ok(more) => items.extend(more),
        Err(e) => items.push(Item { name: "symmetry checks".into(), ok: false, detail: format!("{e:#}") }),
    }
    items.push(item("limit equation residual on |z| <= 2", pu0_residual(&model, 2.0, 401, cfg.solver.series_tol)?, 1e-8));
    let mut all = true;
    for it in &items {
        all &= it.ok;
        println!("{} {}: {}", if it.ok { "PASS" } else { "FAIL" }, it.name, it.detail);
    }
    println!("{} of {} checks passed", items.iter().filter(|i| i.ok).count(), items.len());
    Ok(all)
}
