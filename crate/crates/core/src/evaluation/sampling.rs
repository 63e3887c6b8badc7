//! Draws from zero-mean complex Gaussian mixtures.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gmd::GmdModel;
use crate::linalg::{psd_factor, CMat};

/// `CN(0, 1)` sample: real and imaginary parts `N(0, 1/2)`.
pub fn standard_complex_normal(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Precomputed square-root factors of every component.
///
/// Each draw consumes one uniform for the component index followed by
/// `n` complex normals, whatever the covariances are. Two samplers of the
/// same shape fed identical streams therefore see identical underlying
/// randomness, which is what common-random-number comparisons rely on.
#[derive(Debug, Clone)]
pub struct GmdSampler {
    cumulative: Vec<f64>,
    factors: Vec<CMat>,
    dim: usize,
}

impl GmdSampler {
    pub fn new(model: &GmdModel) -> Result<Self> {
        if model.is_empty() {
            return Err(Error::Model("cannot sample an empty mixture".into()));
        }
        let mut acc = 0.0;
        let cumulative = model
            .weights()
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let factors = model.components().iter().map(|c| psd_factor(&c.covariance)).collect::<Result<_>>()?;
        Ok(Self { cumulative, factors, dim: model.dim() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn choose(&self, u: f64) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let target = u * total;
        self.cumulative.iter().position(|&c| target < c).unwrap_or(self.cumulative.len() - 1)
    }

    /// Returns the component index and the sample.
    pub fn sample(&self, rng: &mut impl Rng) -> (usize, Vec<Complex64>) {
        let k = self.choose(rng.random::<f64>());
        let z: Vec<Complex64> = (0..self.dim).map(|_| standard_complex_normal(rng)).collect();
        let f = &self.factors[k];
        let x = (0..self.dim)
            .map(|i| (0..self.dim).fold(Complex64::new(0.0, 0.0), |acc, j| acc + f[(i, j)] * z[j]))
            .collect();
        (k, x)
    }
}

/// One draw from `model`.
pub fn sample_gmd(model: &GmdModel, rng: &mut impl Rng) -> Result<Vec<Complex64>> {
    Ok(GmdSampler::new(model)?.sample(rng).1)
}
