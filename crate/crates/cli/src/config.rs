//! The TOML run description.
//!
//! Every section but `[model]` may be omitted; missing keys take the values
//! of the acceptance runs.

use std::path::Path;

use anyhow::{bail, Context, Result};
use infmodel::fixed_point::SolverConfig;
use infmodel::march::MarchConfig;
use infmodel::{AlphaParameter, MortalityModel, Polynomial, Preset};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub discretization: Discretization,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub march: MarchSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// `quadratic`, `cubic_perturbed` or `double_well`.
    pub preset: Option<String>,
    /// Raw polynomial coefficients, constant term first.
    pub coefficients: Option<Vec<f64>>,
    /// Which preset minimum to expand around.
    #[serde(default)]
    pub minimum: usize,
    /// Starting point of the critical point search for `coefficients`.
    pub guess: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Discretization {
    pub half_width: f64,
    pub samples: usize,
    pub quad_order: usize,
    pub density_half_width: f64,
    pub density_samples: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            half_width: s.half_width,
            samples: s.samples,
            quad_order: s.quad_order,
            density_half_width: 2.5,
            density_samples: 4096,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub eps: f64,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub series_tol: f64,
    pub eps_cap: f64,
    /// Largest accepted stationarity residual of the reconstructed density.
    pub certificate_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            eps: 0.05,
            alpha: s.alpha.value(),
            tol: s.picard_tol,
            max_iter: s.max_iter,
            series_tol: s.series_tol,
            eps_cap: s.eps_cap,
            certificate_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarchSection {
    pub eps: f64,
    pub dt: Option<f64>,
    pub equil_tol: f64,
    pub max_steps: usize,
    pub trace_every: usize,
    /// Centres of the Gaussian initial data (variance `eps^2`); empty means
    /// the critical points of the model.
    pub inits: Vec<f64>,
    pub certificate_tol: f64,
}

impl Default for MarchSection {
    fn default() -> Self {
        let m = MarchConfig::default();
        Self {
            eps: 0.1,
            dt: m.dt,
            equil_tol: m.equil_tol,
            max_steps: m.max_steps,
            trace_every: m.trace_every,
            inits: Vec::new(),
            certificate_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub eps: Vec<f64>,
    /// Errors against the limit are taken on `|z| <= region`.
    pub region: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { eps: vec![0.2, 0.1, 0.05, 0.025], region: 1.0 }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self {
            model: Some(ModelSection { preset: Some("quadratic".into()), ..Default::default() }),
            discretization: Discretization::default(),
            solver: SolverSection::default(),
            march: MarchSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).context("configuration error")?;
        cfg.model_section()?;
        Ok(cfg)
    }

    fn model_section(&self) -> Result<&ModelSection> {
        let Some(m) = &self.model else {
            bail!("configuration error: missing [model] section (set model.preset or model.coefficients)");
        };
        match (&m.preset, &m.coefficients) {
            (None, None) => bail!("configuration error: missing key model.preset (or model.coefficients)"),
            (Some(_), Some(_)) => bail!("configuration error: model.preset and model.coefficients are exclusive"),
            _ => Ok(m),
        }
    }

    /// The raw mortality polynomial and the starting guesses of its minima.
    pub fn raw_model(&self) -> Result<(Polynomial, Vec<f64>)> {
        let m = self.model_section()?;
        if let Some(name) = &m.preset {
            let p = Preset::from_name(name)?;
            Ok((p.polynomial(), p.minimum_guesses()))
        } else {
            let c = m.coefficients.clone().expect("checked in model_section");
            Ok((Polynomial::new(c), vec![m.guess.unwrap_or(0.0)]))
        }
    }

    /// The model expanded around the selected minimum.
    pub fn model(&self) -> Result<MortalityModel> {
        let m = self.model_section()?;
        if let Some(name) = &m.preset {
            return Ok(MortalityModel::from_preset(Preset::from_name(name)?, m.minimum)?);
        }
        let (raw, guesses) = self.raw_model()?;
        Ok(MortalityModel::locate(raw, guesses[0])?)
    }

    /// One model per minimum of the raw polynomial.
    pub fn all_minima(&self) -> Result<Vec<MortalityModel>> {
        let (raw, guesses) = self.raw_model()?;
        guesses.into_iter().map(|g| MortalityModel::locate(raw.clone(), g).map_err(Into::into)).collect()
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let d = &self.discretization;
        let s = &self.solver;
        Ok(SolverConfig {
            alpha: AlphaParameter::new(s.alpha)?,
            picard_tol: s.tol,
            max_iter: s.max_iter,
            series_tol: s.series_tol,
            quad_order: d.quad_order,
            half_width: d.half_width,
            samples: d.samples,
            eps_cap: s.eps_cap,
        })
    }

    pub fn march(&self) -> MarchConfig {
        let m = &self.march;
        MarchConfig { dt: m.dt, equil_tol: m.equil_tol, max_steps: m.max_steps, trace_every: m.trace_every }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sections_take_defaults() {
        let cfg = Config::parse("[model]\npreset = \"cubic_perturbed\"\n").unwrap();
        assert_eq!(cfg.discretization.samples, 513);
        assert_eq!(cfg.sweep.eps.len(), 4);
        assert!((cfg.model().unwrap().d3m(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_model_names_the_key() {
        let err = Config::parse("[solver]\neps = 0.1\n").unwrap_err();
        assert!(format!("{err:#}").contains("model.preset"));
        let err = Config::parse("[model]\nminimum = 1\n").unwrap_err();
        assert!(format!("{err:#}").contains("model.preset"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::parse("[model]\npreset = \"quadratic\"\n[solver]\nepsilon = 0.1\n").is_err());
    }

    #[test]
    fn coefficients_locate_their_minimum() {
        let cfg = Config::parse("[model]\ncoefficients = [1.0, 0.25, -2.0, 0.0, 1.0]\nguess = 1.0\n").unwrap();
        let m = cfg.model().unwrap();
        assert!(m.critical_point() > 0.9 && m.critical_point() < 1.0);
    }
}
