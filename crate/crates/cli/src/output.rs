use std::fs::{self, File};
use std::path::Path;

use anyhow::{Context, Result};
use infmodel::density::DensityState;
use infmodel::fixed_point::StationarySolution;
use infmodel::march::TraceRow;
use infmodel::MortalityModel;
use serde::Serialize;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::WriterBuilder::new().flexible(true).from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// `z, value, d1, d2` of `U` in the raw trait variable.
pub fn write_u(path: &Path, sol: &StationarySolution, model: &MortalityModel) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["z", "value", "d1", "d2"])?;
    let u = &sol.u;
    let z0 = model.critical_point();
    for (i, h) in u.nodes().into_iter().enumerate() {
        w.serialize((z0 + h, u.values()[i], u.deriv1()[i], u.deriv2()[i]))?;
    }
    w.flush()?;
    Ok(())
}

/// `z, value, d1, d2` of the normalized `F`; the derivatives follow from
/// `log F = -h²/(2 eps²) - U(h) + const` with `h = z - z0`.
pub fn write_f(path: &Path, f: &DensityState, sol: &StationarySolution, model: &MortalityModel) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["z", "value", "d1", "d2"])?;
    let e2 = sol.eps * sol.eps;
    let z0 = model.critical_point();
    for (&z, &v) in f.nodes().iter().zip(f.values()) {
        let h = z - z0;
        let g1 = -h / e2 - sol.u.eval(h, 1);
        let g2 = -1.0 / e2 - sol.u.eval(h, 2);
        w.serialize((z, v, v * g1, v * (g1 * g1 + g2)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_profile(path: &Path, f: &DensityState) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["z", "f"])?;
    for (z, v) in f.nodes().iter().zip(f.values()) {
        w.serialize((z, v))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut w = writer(path)?;
    for row in trace {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Plain rows of strings; rows may differ in length.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
