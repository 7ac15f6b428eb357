//! Trait densities on a periodic grid and the reproduction operator `B_eps`.
//!
//! `B_eps(f)` is evaluated as the law of the parental midpoint followed by a
//! Gaussian blur of variance `eps²/2`. Both steps are linear convolutions done
//! with zero-padded FFTs of length `2 N`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use log::debug;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};

/// Kernel reach in units of `eps`; the blur is negligible beyond it.
pub const KERNEL_REACH: f64 = 6.0;

/// A nonnegative density sampled at `z_i = -L + i h`, `h = 2L/N`, `N` a power of two.
#[derive(Debug, Clone, Serialize)]
pub struct DensityState {
    half_width: f64,
    values: Vec<f64>,
    epsilon: f64,
}

impl DensityState {
    pub fn new(values: Vec<f64>, half_width: f64, epsilon: f64) -> Result<Self> {
        let n = values.len();
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Config(format!("density grid size must be a power of two >= 16, got {n}")));
        }
        if !(half_width > 0.0) {
            return Err(Error::Config(format!("density half-width must be positive, got {half_width}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Input(format!("density value {} at index {i} is not a nonnegative number", values[i])));
        }
        Ok(Self { half_width, values, epsilon })
    }

    pub fn from_fn(f: impl Fn(f64) -> f64, half_width: f64, n: usize, epsilon: f64) -> Result<Self> {
        let h = 2.0 * half_width / n as f64;
        Self::new((0..n).map(|i| f(-half_width + i as f64 * h)).collect(), half_width, epsilon)
    }

    /// Normal density with the given mean and variance.
    pub fn gaussian(mean: f64, variance: f64, half_width: f64, n: usize, epsilon: f64) -> Result<Self> {
        let c = 1.0 / (2.0 * PI * variance).sqrt();
        Self::from_fn(|z| c * (-(z - mean).powi(2) / (2.0 * variance)).exp(), half_width, n, epsilon)
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
        2.0 * self.half_width / self.len() as f64
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.len()).map(|i| -self.half_width + i as f64 * h).collect()
    }

    /// Trapezoid rule on the periodic grid.
    pub fn mass(&self) -> f64 {
        self.spacing() * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        let h = self.spacing();
        self.nodes().iter().zip(&self.values).map(|(z, f)| z * f).sum::<f64>() * h / self.mass()
    }

    /// Expectation of `g` under the normalized density.
    pub fn expectation(&self, g: impl Fn(f64) -> f64) -> f64 {
        let h = self.spacing();
        self.nodes().iter().zip(&self.values).map(|(&z, f)| g(z) * f).sum::<f64>() * h / self.mass()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| c * v).collect(), self.half_width, self.epsilon)
    }

    pub fn normalized(&self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(Error::Input("density has zero mass".into()));
        }
        self.scaled(1.0 / m)
    }

    /// `∫ |f - g|` on a shared grid.
    pub fn l1_distance(&self, other: &DensityState) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.spacing() * self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// Shift by `k` cells, filling with zeros.
    pub fn shifted(&self, k: isize) -> Self {
        let n = self.len() as isize;
        let values = (0..n)
            .map(|i| {
                let j = i - k;
                if (0..n).contains(&j) {
                    self.values[j as usize]
                } else {
                    0.0
                }
            })
            .collect();
        Self { values, ..self.clone() }
    }

    fn same_grid(&self, other: &DensityState) -> Result<()> {
        if self.len() != other.len() || (self.half_width - other.half_width).abs() > 1e-12 * self.half_width {
            return Err(Error::Input("densities live on different grids".into()));
        }
        Ok(())
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        Self { values, ..self.clone() }
    }
}

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(len: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("FFT plan cache poisoned");
    map.entry(len)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(len), planner.plan_fft_inverse(len))
        })
        .clone()
}

fn padded(values: &[f64]) -> Vec<Complex<f64>> {
    let mut buf = vec![Complex::new(0.0, 0.0); 2 * values.len()];
    for (b, v) in buf.iter_mut().zip(values) {
        b.re = *v;
    }
    buf
}

/// Clamp FFT ringing below zero, returning the clamped mass.
fn clamp(values: &mut [f64], h: f64) -> f64 {
    let mut clamped = 0.0;
    for v in values.iter_mut() {
        if *v < 0.0 {
            clamped -= *v;
            *v = 0.0;
        }
    }
    if clamped > 0.0 {
        debug!("clamped negative mass {:e}", clamped * h);
    }
    clamped * h
}

/// Law of the midpoint of two independent draws: `p(w) = 2 (f * f)(2w) / mass(f)`.
pub fn midpoint_density(f: &DensityState) -> Result<DensityState> {
    let mass = f.mass();
    if !(mass > 0.0) {
        return Err(Error::Input("midpoint law of a zero-mass density".into()));
    }
    let n = f.len();
    let h = f.spacing();
    let (fwd, inv) = plans(2 * n);
    let mut buf = padded(&f.values);
    fwd.process(&mut buf);
    for c in buf.iter_mut() {
        *c = *c * *c;
    }
    inv.process(&mut buf);
    // buf[k] / (2n) is Σ f_i f_{k-i}; the sum z_i + z_j sits at -2L + k h
    let scale = 2.0 * h / (2 * n) as f64 / mass;
    let mut values: Vec<f64> = (0..n).map(|m| buf[2 * m].re * scale).collect();
    clamp(&mut values, h);
    Ok(f.with_values(values))
}

/// Convolution with `exp(-x²/eps²) / (eps √π)`, the kernel sampled and
/// normalized to unit discrete mass.
pub fn gaussian_blur(f: &DensityState, eps: f64) -> Result<DensityState> {
    check_reach(f, eps)?;
    let n = f.len();
    let h = f.spacing();
    let (fwd, inv) = plans(2 * n);
    let mut kernel = vec![Complex::new(0.0, 0.0); 2 * n];
    let mut total = 0.0;
    for (j, k) in kernel.iter_mut().enumerate() {
        let off = if j < n { j as f64 } else { j as f64 - 2.0 * n as f64 };
        let x = off * h;
        k.re = (-(x * x) / (eps * eps)).exp();
        total += k.re;
    }
    for k in kernel.iter_mut() {
        k.re /= total;
    }
    fwd.process(&mut kernel);
    let mut buf = padded(&f.values);
    fwd.process(&mut buf);
    for (b, k) in buf.iter_mut().zip(&kernel) {
        *b *= *k;
    }
    inv.process(&mut buf);
    let norm = 1.0 / (2 * n) as f64;
    let mut values: Vec<f64> = buf[..n].iter().map(|c| c.re * norm).collect();
    clamp(&mut values, h);
    Ok(f.with_values(values))
}

fn check_reach(f: &DensityState, eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    if KERNEL_REACH * eps > f.half_width / 4.0 {
        return Err(Error::Config(format!(
            "density window too narrow: {KERNEL_REACH} eps = {} exceeds L/4 = {}",
            KERNEL_REACH * eps,
            f.half_width / 4.0
        )));
    }
    Ok(())
}

/// `B_eps(f)`.
pub fn apply_b(f: &DensityState, eps: f64) -> Result<DensityState> {
    check_reach(f, eps)?;
    gaussian_blur(&midpoint_density(f)?, eps)
}
