//! Gaussian-mixture models for the target impulse response and the
//! clutter-plus-noise process.
//!
//! Component covariances are synthesized from power spectral densities on
//! the normalized frequency axis. A target model is calibrated against a
//! clutter model by scaling every target covariance by one common factor.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_deviation, hermitian_eigenvalues, trace_re, CMat};

/// Relative loading applied when a spectrum does not specify its floor.
pub const DEFAULT_RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandShape {
    /// Gaussian bump; `width` is the full width at half maximum.
    #[default]
    Gaussian,
    /// Flat over `|f - center| <= width / 2` (circular distance).
    Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdBand {
    pub center: f64,
    pub width: f64,
    pub power: f64,
    #[serde(default)]
    pub shape: BandShape,
}

impl PsdBand {
    pub fn gaussian(center: f64, width: f64, power: f64) -> Self {
        Self { center, width, power, shape: BandShape::Gaussian }
    }

    pub fn rect(center: f64, width: f64, power: f64) -> Self {
        Self { center, width, power, shape: BandShape::Rect }
    }

    fn value(&self, f: f64) -> f64 {
        let d = circular_distance(f, self.center);
        match self.shape {
            BandShape::Gaussian => {
                let sigma = self.width / (2.0 * (2.0 * 2f64.ln()).sqrt());
                self.power * (-0.5 * (d / sigma).powi(2)).exp()
            }
            BandShape::Rect => {
                if d <= 0.5 * self.width {
                    self.power
                } else {
                    0.0
                }
            }
        }
    }
}

fn circular_distance(f: f64, center: f64) -> f64 {
    ((f - center + 0.5).rem_euclid(1.0) - 0.5).abs()
}

/// Normalized frequency of DFT bin `i` of `n`, mapped into `[-0.5, 0.5)`.
pub fn bin_frequency(i: usize, n: usize) -> f64 {
    let f = i as f64 / n as f64;
    if f >= 0.5 {
        f - 1.0
    } else {
        f
    }
}

/// A power spectral density sampled on `n` DFT bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdSpec {
    pub bands: Vec<PsdBand>,
    pub n: usize,
    /// Absolute loading added to every bin.
    pub floor: f64,
}

impl PsdSpec {
    pub fn new(bands: Vec<PsdBand>, n: usize, floor: f64) -> Self {
        Self { bands, n, floor }
    }

    /// Floor set to `relative` times the mean of the unloaded spectrum.
    pub fn with_relative_floor(bands: Vec<PsdBand>, n: usize, relative: f64) -> Self {
        let mut spec = Self::new(bands, n, 0.0);
        let raw = spec.sample();
        spec.floor = relative * raw.iter().sum::<f64>() / n.max(1) as f64;
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::Validation("PSD has an empty band list".into()));
        }
        if self.n == 0 {
            return Err(Error::Validation("PSD dimension must be positive".into()));
        }
        for (i, b) in self.bands.iter().enumerate() {
            if !(b.width > 0.0) || !b.width.is_finite() {
                return Err(Error::Validation(format!("band {i}: width must be > 0")));
            }
            if !(b.power >= 0.0) || !b.power.is_finite() {
                return Err(Error::Validation(format!("band {i}: power must be >= 0")));
            }
            if !b.center.is_finite() {
                return Err(Error::Validation(format!("band {i}: center must be finite")));
            }
        }
        if !(self.floor >= 0.0) || !self.floor.is_finite() {
            return Err(Error::Validation("PSD floor must be >= 0".into()));
        }
        Ok(())
    }

    /// The loaded PSD at each bin. These are the exact eigenvalues of the
    /// synthesized covariance.
    pub fn sample(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let f = bin_frequency(i, self.n);
                self.floor + self.bands.iter().map(|b| b.value(f)).sum::<f64>()
            })
            .collect()
    }
}

/// Validation bounds on component eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for EigenBounds {
    fn default() -> Self {
        Self { min: 1e-8, max: 1e8 }
    }
}

/// Hermitian Toeplitz covariance whose first column is the inverse DFT of
/// the sampled PSD.
///
/// With a real PSD the Toeplitz extension coincides with the circulant
/// matrix of the same first column, so its eigenvalues are exactly the
/// sampled PSD values and positivity of the PSD gives positive definiteness.
pub fn synth_covariance_from_psd(spec: &PsdSpec, bounds: EigenBounds) -> Result<CMat> {
    spec.validate()?;
    let n = spec.n;
    let psd = spec.sample();
    let (lo, hi) = psd
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo > 0.0) {
        return Err(Error::Model(format!(
            "PSD is not strictly positive after loading (min bin {lo:e})"
        )));
    }
    if lo < bounds.min || hi > bounds.max {
        return Err(Error::Model(format!(
            "covariance eigenvalues [{lo:e}, {hi:e}] fall outside [{:e}, {:e}]",
            bounds.min, bounds.max
        )));
    }
    let first: Vec<Complex64> = (0..n)
        .map(|k| {
            let acc = psd.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (i, &p)| {
                let f = bin_frequency(i, n);
                acc + Complex64::from_polar(p, 2.0 * PI * f * k as f64)
            });
            acc / n as f64
        })
        .collect();
    Ok(CMat::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(first[0].re, 0.0)
        } else if i > j {
            first[i - j]
        } else {
            first[j - i].conj()
        }
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub covariance: CMat,
}

impl GaussianComponent {
    pub fn new(weight: f64, covariance: CMat) -> Self {
        Self { weight, covariance }
    }
}

/// Zero-mean complex Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GmdModel {
    components: Vec<GaussianComponent>,
}

impl GmdModel {
    /// Builds a model after structural validation: nonempty, equal square
    /// dimensions, positive weights summing to one, Hermitian covariances.
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        let model = Self { components };
        let diag = validate_model(&model, EigenBounds { min: f64::NEG_INFINITY, max: f64::INFINITY });
        match diag.issues.first() {
            None => Ok(model),
            Some(issue) => Err(Error::Validation(issue.to_string())),
        }
    }

    /// Skips validation; callers are expected to run [`validate_model`].
    pub fn new_unchecked(components: Vec<GaussianComponent>) -> Self {
        Self { components }
    }

    pub fn single(covariance: CMat) -> Self {
        Self { components: vec![GaussianComponent::new(1.0, covariance)] }
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.covariance.nrows())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    /// `Σ w_i C_i`.
    pub fn mixture_covariance(&self) -> CMat {
        let n = self.dim();
        self.components.iter().fold(CMat::zeros(n, n), |acc, c| {
            acc + &c.covariance * Complex64::new(c.weight, 0.0)
        })
    }

    /// `Σ w_i tr(C_i)`.
    pub fn total_power(&self) -> f64 {
        self.components.iter().map(|c| c.weight * trace_re(&c.covariance)).sum()
    }

    /// Same weights, every covariance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let f = Complex64::new(factor, 0.0);
        Self {
            components: self
                .components
                .iter()
                .map(|c| GaussianComponent::new(c.weight, &c.covariance * f))
                .collect(),
        }
    }

    /// Largest eigenvalue over all component covariances.
    pub fn lambda_max(&self) -> f64 {
        self.components
            .iter()
            .filter_map(|c| hermitian_eigenvalues(&c.covariance).last().copied())
            .fold(0.0, f64::max)
    }
}

/// Builds a model from per-component PSDs.
pub fn model_from_psds(parts: &[(f64, PsdSpec)], bounds: EigenBounds) -> Result<GmdModel> {
    let components = parts
        .iter()
        .map(|(w, spec)| Ok(GaussianComponent::new(*w, synth_covariance_from_psd(spec, bounds)?)))
        .collect::<Result<Vec<_>>>()?;
    GmdModel::new(components)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelIssue {
    Empty,
    NotSquare { index: usize },
    DimensionMismatch { index: usize, expected: usize, found: usize },
    NonPositiveWeight { index: usize, weight: f64 },
    WeightSum { sum: f64 },
    NotHermitian { index: usize, deviation: f64 },
    EigenvalueOutOfBounds { index: usize, min: f64, max: f64 },
}

impl std::fmt::Display for ModelIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelIssue::Empty => write!(f, "model has no components"),
            ModelIssue::NotSquare { index } => write!(f, "component {index}: covariance is not square"),
            ModelIssue::DimensionMismatch { index, expected, found } => {
                write!(f, "component {index}: dimension {found}, expected {expected}")
            }
            ModelIssue::NonPositiveWeight { index, weight } => {
                write!(f, "component {index}: weight {weight} is not strictly positive")
            }
            ModelIssue::WeightSum { sum } => write!(f, "weights sum to {sum}, expected 1"),
            ModelIssue::NotHermitian { index, deviation } => {
                write!(f, "component {index}: Hermitian deviation {deviation:e}")
            }
            ModelIssue::EigenvalueOutOfBounds { index, min, max } => {
                write!(f, "component {index}: eigenvalues [{min:e}, {max:e}] outside bounds")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentDiagnostics {
    pub index: usize,
    pub weight: f64,
    pub hermitian_deviation: f64,
    pub eigen_min: f64,
    pub eigen_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDiagnostics {
    pub weight_sum: f64,
    pub weight_sum_deviation: f64,
    pub components: Vec<ComponentDiagnostics>,
    pub issues: Vec<ModelIssue>,
}

impl ModelDiagnostics {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }
}

const WEIGHT_SUM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-10;

/// Reports structural and spectral diagnostics. Never fails; the caller
/// decides what to do with the issues.
pub fn validate_model(model: &GmdModel, bounds: EigenBounds) -> ModelDiagnostics {
    let mut issues = Vec::new();
    if model.components.is_empty() {
        issues.push(ModelIssue::Empty);
    }
    let dim = model.dim();
    let weight_sum: f64 = model.components.iter().map(|c| c.weight).sum();
    let check_eigen = bounds.min.is_finite() || bounds.max.is_finite();
    let mut components = Vec::with_capacity(model.components.len());
    for (index, c) in model.components.iter().enumerate() {
        let cov = &c.covariance;
        if cov.nrows() != cov.ncols() {
            issues.push(ModelIssue::NotSquare { index });
            continue;
        }
        if cov.nrows() != dim {
            issues.push(ModelIssue::DimensionMismatch { index, expected: dim, found: cov.nrows() });
        }
        if !(c.weight > 0.0) || !c.weight.is_finite() {
            issues.push(ModelIssue::NonPositiveWeight { index, weight: c.weight });
        }
        let deviation = hermitian_deviation(cov);
        if !(deviation <= HERMITIAN_TOL) {
            issues.push(ModelIssue::NotHermitian { index, deviation });
        }
        let (eigen_min, eigen_max) = if check_eigen {
            let ev = hermitian_eigenvalues(cov);
            (ev.first().copied().unwrap_or(f64::NAN), ev.last().copied().unwrap_or(f64::NAN))
        } else {
            (f64::NAN, f64::NAN)
        };
        if check_eigen && !(eigen_min >= bounds.min && eigen_max <= bounds.max) {
            issues.push(ModelIssue::EigenvalueOutOfBounds { index, min: eigen_min, max: eigen_max });
        }
        components.push(ComponentDiagnostics {
            index,
            weight: c.weight,
            hermitian_deviation: deviation,
            eigen_min,
            eigen_max,
        });
    }
    let weight_sum_deviation = (weight_sum - 1.0).abs();
    if !model.components.is_empty() && !(weight_sum_deviation <= WEIGHT_SUM_TOL) {
        issues.push(ModelIssue::WeightSum { sum: weight_sum });
    }
    ModelDiagnostics { weight_sum, weight_sum_deviation, components, issues }
}

/// `10 log10(target power / clutter power)` using mixture-weighted traces.
pub fn scr_db(target: &GmdModel, clutter: &GmdModel) -> f64 {
    10.0 * (target.total_power() / clutter.total_power()).log10()
}

/// The common factor that brings the target model to `scr_db`.
pub fn scr_scale_factor(target: &GmdModel, clutter: &GmdModel, scr_db: f64) -> Result<f64> {
    let pt = target.total_power();
    let pc = clutter.total_power();
    if !(pt > 0.0) || !pt.is_finite() {
        return Err(Error::Calibration(format!("target power {pt} is not positive")));
    }
    if !(pc > 0.0) || !pc.is_finite() {
        return Err(Error::Calibration(format!("clutter power {pc} is not positive")));
    }
    if !scr_db.is_finite() {
        return Err(Error::Calibration("SCR must be finite".into()));
    }
    Ok(10f64.powf(scr_db / 10.0) * pc / pt)
}

/// Scales every target covariance so that the model's SCR equals `scr_db`.
pub fn calibrate_scr(target: &GmdModel, clutter: &GmdModel, scr_db: f64) -> Result<GmdModel> {
    let factor = scr_scale_factor(target, clutter, scr_db)?;
    Ok(target.scaled(factor))
}

/// Clutter, target, code length and energy of one design problem.
#[derive(Debug, Clone)]
pub struct Scenario {
    target: GmdModel,
    clutter: GmdModel,
    code_len: usize,
    energy: f64,
    scr_db: f64,
}

impl Scenario {
    /// Validates dimensions and calibrates the target to `scr_db`.
    pub fn new(target: GmdModel, clutter: GmdModel, code_len: usize, energy: f64, scr_db: f64) -> Result<Self> {
        let target = calibrate_scr(&target, &clutter, scr_db)?;
        let mut s = Self::uncalibrated(target, clutter, code_len, energy)?;
        s.scr_db = scr_db;
        Ok(s)
    }

    /// Uses the target model as given; the SCR is whatever it happens to be
    /// (negative infinity for a zero target).
    pub fn uncalibrated(target: GmdModel, clutter: GmdModel, code_len: usize, energy: f64) -> Result<Self> {
        if code_len == 0 {
            return Err(Error::Validation("code length must be positive".into()));
        }
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(Error::Validation("energy must be positive".into()));
        }
        if target.is_empty() || clutter.is_empty() {
            return Err(Error::Validation("target and clutter models must be nonempty".into()));
        }
        let taps = target.dim();
        if taps == 0 {
            return Err(Error::Validation("target dimension must be positive".into()));
        }
        let expected = code_len + taps - 1;
        if clutter.dim() != expected {
            return Err(Error::Validation(format!(
                "clutter dimension {} does not equal N + N_T - 1 = {expected}",
                clutter.dim()
            )));
        }
        let scr = scr_db(&target, &clutter);
        Ok(Self { target, clutter, code_len, energy, scr_db: scr })
    }

    /// Recalibrates the target to a different SCR.
    pub fn with_scr(&self, scr_db: f64) -> Result<Self> {
        Self::new(self.target.clone(), self.clutter.clone(), self.code_len, self.energy, scr_db)
    }

    pub fn target(&self) -> &GmdModel {
        &self.target
    }

    pub fn clutter(&self) -> &GmdModel {
        &self.clutter
    }

    pub fn code_len(&self) -> usize {
        self.code_len
    }

    /// Target impulse response length `N_T`.
    pub fn taps(&self) -> usize {
        self.target.dim()
    }

    /// Observation length `N + N_T - 1`.
    pub fn obs_dim(&self) -> usize {
        self.code_len + self.taps() - 1
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Per-sample magnitude `sqrt(E_s / N)`.
    pub fn magnitude(&self) -> f64 {
        (self.energy / self.code_len as f64).sqrt()
    }

    pub fn scr_db(&self) -> f64 {
        self.scr_db
    }

    pub fn achieved_scr_db(&self) -> f64 {
        scr_db(&self.target, &self.clutter)
    }
}

/// One mixture component described by its weight and spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    pub bands: Vec<PsdBand>,
    /// Absolute loading; defaults to a small fraction of the mean PSD.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

impl ComponentSpec {
    pub fn psd(&self, n: usize) -> PsdSpec {
        match self.floor {
            Some(f) => PsdSpec::new(self.bands.clone(), n, f),
            None => PsdSpec::with_relative_floor(self.bands.clone(), n, DEFAULT_RELATIVE_FLOOR),
        }
    }
}

/// Declarative description of a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub code_len: usize,
    pub taps: usize,
    pub energy: f64,
    pub scr_db: f64,
    pub target: Vec<ComponentSpec>,
    pub clutter: Vec<ComponentSpec>,
    #[serde(default = "default_lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
}

fn default_lambda_min() -> f64 {
    EigenBounds::default().min
}

fn default_lambda_max() -> f64 {
    EigenBounds::default().max
}

/// Noise power added to every clutter component (clutter-to-noise 10 dB
/// at the band peaks).
const DEFAULT_NOISE_POWER: f64 = 0.1;

impl ScenarioSpec {
    /// Two target and two clutter components with partially overlapping
    /// Gaussian spectra, `β = [0.8, 0.2]`, `α = [0.2, 0.8]`.
    pub fn default_spectra(code_len: usize, taps: usize, scr_db: f64) -> Self {
        let noise = PsdBand::rect(0.0, 1.0, DEFAULT_NOISE_POWER);
        Self {
            code_len,
            taps,
            energy: 1.0,
            scr_db,
            target: vec![
                ComponentSpec { weight: 0.8, bands: vec![PsdBand::gaussian(0.15, 0.12, 1.0)], floor: None },
                ComponentSpec { weight: 0.2, bands: vec![PsdBand::gaussian(-0.2, 0.15, 1.0)], floor: None },
            ],
            clutter: vec![
                ComponentSpec {
                    weight: 0.2,
                    bands: vec![PsdBand::gaussian(-0.15, 0.15, 1.0), noise.clone()],
                    floor: None,
                },
                ComponentSpec {
                    weight: 0.8,
                    bands: vec![PsdBand::gaussian(0.3, 0.12, 1.0), noise],
                    floor: None,
                },
            ],
            lambda_min: default_lambda_min(),
            lambda_max: default_lambda_max(),
        }
    }

    /// Full-size problem: `N = 64`, `N_T = 16`, SCR 0 dB.
    pub fn full_scale() -> Self {
        Self::default_spectra(64, 16, 0.0)
    }

    /// Small problem for oracle checks: `N = 4`, `N_T = 3`.
    pub fn toy() -> Self {
        Self::default_spectra(4, 3, 0.0)
    }

    pub fn bounds(&self) -> EigenBounds {
        EigenBounds { min: self.lambda_min, max: self.lambda_max }
    }

    pub fn obs_dim(&self) -> usize {
        self.code_len + self.taps.max(1) - 1
    }

    pub fn target_model(&self) -> Result<GmdModel> {
        let parts: Vec<_> = self.target.iter().map(|c| (c.weight, c.psd(self.taps))).collect();
        model_from_psds(&parts, self.bounds())
    }

    pub fn clutter_model(&self) -> Result<GmdModel> {
        let n = self.obs_dim();
        let parts: Vec<_> = self.clutter.iter().map(|c| (c.weight, c.psd(n))).collect();
        model_from_psds(&parts, self.bounds())
    }

    pub fn build(&self) -> Result<Scenario> {
        if self.taps == 0 {
            return Err(Error::Validation("taps must be positive".into()));
        }
        Scenario::new(self.target_model()?, self.clutter_model()?, self.code_len, self.energy, self.scr_db)
    }
}
