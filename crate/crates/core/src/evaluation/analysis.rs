//! Autocorrelation, peak sidelobe level and the ambiguity function.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::Waveform;

/// Aperiodic autocorrelation over lags `−(N−1) ..= N−1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autocorrelation {
    pub lags: Vec<isize>,
    pub values: Vec<Complex64>,
    /// `20 log10(max_{τ≠0} |r(τ)| / |r(0)|)`; `−∞` for a single sample.
    pub psl_db: f64,
}

impl Autocorrelation {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn at(&self, lag: isize) -> Complex64 {
        let n = (self.values.len() as isize + 1) / 2;
        self.values[(lag + n - 1) as usize]
    }
}

/// `χ(τ, ν) = Σ_n s_n s*_{n−τ} e^{j2πνn}` for zero-based `n`.
fn chi(s: &[Complex64], tau: isize, nu: f64) -> Complex64 {
    let n = s.len() as isize;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in tau.max(0)..n.min(n + tau) {
        let term = s[i as usize] * s[(i - tau) as usize].conj();
        acc += if nu == 0.0 { term } else { term * Complex64::from_polar(1.0, 2.0 * PI * nu * i as f64) };
    }
    acc
}

/// `r(τ) = Σ_n s_n s*_{n−τ}` and its peak sidelobe level.
pub fn autocorrelation(s: &Waveform) -> Autocorrelation {
    let x = s.samples();
    let n = x.len() as isize;
    let lags: Vec<isize> = (-(n - 1)..n).collect();
    let values: Vec<Complex64> = lags.iter().map(|&t| chi(x, t, 0.0)).collect();
    let peak = values[(n - 1) as usize].norm();
    let side = values
        .iter()
        .zip(&lags)
        .filter(|(_, &t)| t != 0)
        .map(|(v, _)| v.norm())
        .fold(0.0_f64, f64::max);
    let psl_db = if n > 1 { 20.0 * (side / peak).log10() } else { f64::NEG_INFINITY };
    Autocorrelation { lags, values, psl_db }
}

/// Normalized ambiguity magnitude, rows indexed by Doppler and columns by
/// delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySurface {
    pub delays: Vec<isize>,
    pub doppler: Vec<f64>,
    pub magnitude: Vec<Vec<f64>>,
}

impl AmbiguitySurface {
    pub fn at(&self, doppler_index: usize, delay: isize) -> f64 {
        let n = (self.delays.len() as isize + 1) / 2;
        self.magnitude[doppler_index][(delay + n - 1) as usize]
    }
}

/// `points` equally spaced normalized Doppler values over `[−0.5, 0.5]`.
pub fn doppler_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| -0.5 + i as f64 / (points - 1) as f64).collect(),
    }
}

pub const DEFAULT_DOPPLER_POINTS: usize = 129;

/// `|χ(τ, ν)| / |χ(0, 0)|` over all delays and the given Doppler values.
pub fn ambiguity(s: &Waveform, doppler: &[f64]) -> Result<AmbiguitySurface> {
    if doppler.is_empty() {
        return Err(Error::Validation("Doppler grid is empty".into()));
    }
    let x = s.samples();
    let n = x.len() as isize;
    let delays: Vec<isize> = (-(n - 1)..n).collect();
    let peak = chi(x, 0, 0.0).norm();
    let magnitude = crate::par::map_slice(doppler, |_, &nu| {
        delays.iter().map(|&t| if t == 0 && nu == 0.0 { 1.0 } else { chi(x, t, nu).norm() / peak }).collect()
    });
    Ok(AmbiguitySurface { delays, doppler: doppler.to_vec(), magnitude })
}
