//! Likelihood-ratio detection and ROC estimation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::sampling::GmdSampler;
use crate::error::{Error, Result};
use crate::gmd::{GmdModel, Scenario};
use crate::linalg::{log_sum_exp, Cholesky};
use crate::objective::{composite_covariances, CompositeLikelihood};
use crate::par;
use crate::rng::{purpose, stream};
use crate::waveform::{convolution_matrix, ConvolutionMatrix, Waveform};

/// `log p(y)` for a zero-mean complex Gaussian mixture.
#[derive(Debug, Clone)]
pub struct MixtureDensity {
    /// `ln w_i − n ln π − log det Σ_i`
    offsets: Vec<f64>,
    factors: Vec<Cholesky>,
    dim: usize,
}

impl MixtureDensity {
    pub fn new(model: &GmdModel) -> Result<Self> {
        let dim = model.dim();
        let mut offsets = Vec::with_capacity(model.len());
        let mut factors = Vec::with_capacity(model.len());
        for c in model.components() {
            let ch = Cholesky::with_context(&c.covariance, "likelihood covariance")?;
            offsets.push(c.weight.ln() - dim as f64 * PI.ln() - ch.logdet());
            factors.push(ch);
        }
        Ok(Self { offsets, factors, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Per-component `ln w_i + ln CN(y; 0, Σ_i)`.
    pub fn component_log_densities(&self, y: &[Complex64]) -> Vec<f64> {
        self.offsets.iter().zip(&self.factors).map(|(o, ch)| o - ch.quad_form(y)).collect()
    }

    pub fn log_density(&self, y: &[Complex64]) -> f64 {
        log_sum_exp(&self.component_log_densities(y))
    }
}

/// `log p₁(y) − log p₀(y)` with both densities precomputed.
#[derive(Debug, Clone)]
pub struct LlrDetector {
    h1: MixtureDensity,
    h0: MixtureDensity,
}

impl LlrDetector {
    pub fn new(composite: &CompositeLikelihood, clutter: &GmdModel) -> Result<Self> {
        if composite.dim() != clutter.dim() {
            return Err(Error::Validation(format!(
                "composite dimension {} does not match clutter dimension {}",
                composite.dim(),
                clutter.dim()
            )));
        }
        Ok(Self { h1: MixtureDensity::new(&composite.to_model())?, h0: MixtureDensity::new(clutter)? })
    }

    pub fn for_waveform(scenario: &Scenario, s: &Waveform) -> Result<Self> {
        let conv = convolution_matrix(s, scenario.taps())?;
        Self::new(&composite_covariances(&conv, scenario.target(), scenario.clutter())?, scenario.clutter())
    }

    pub fn statistic(&self, y: &[Complex64]) -> Result<f64> {
        if y.len() != self.h0.dim() {
            return Err(Error::Validation(format!("observation length {} != {}", y.len(), self.h0.dim())));
        }
        Ok(self.h1.log_density(y) - self.h0.log_density(y))
    }
}

/// One-shot LLR; builds the densities on every call.
pub fn llr_statistic(y: &[Complex64], composite: &CompositeLikelihood, clutter: &GmdModel) -> Result<f64> {
    LlrDetector::new(composite, clutter)?.statistic(y)
}

/// Monte-Carlo ROC settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionRun {
    /// Trials per hypothesis.
    pub trials: usize,
    /// Smallest false-alarm rate the run must resolve.
    pub min_pfa: f64,
    /// Require `trials ≥ 10 / min_pfa`.
    pub enforce_trial_guard: bool,
    /// Explicit thresholds; `None` sweeps every pooled statistic value.
    pub thresholds: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for DetectionRun {
    fn default() -> Self {
        Self { trials: 10_000, min_pfa: 1e-3, enforce_trial_guard: true, thresholds: None, seed: 0 }
    }
}

impl DetectionRun {
    pub fn required_trials(&self) -> usize {
        (10.0 / self.min_pfa).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Validation("trial count must be positive".into()));
        }
        if !(self.min_pfa > 0.0 && self.min_pfa <= 1.0) {
            return Err(Error::Validation(format!("min_pfa {} outside (0, 1]", self.min_pfa)));
        }
        if self.enforce_trial_guard && self.trials < self.required_trials() {
            return Err(Error::Validation(format!(
                "{} trials cannot resolve P_fa = {:e}; need at least {}",
                self.trials,
                self.min_pfa,
                self.required_trials()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub pfa: f64,
    pub pd: f64,
    pub se_pfa: f64,
    pub se_pd: f64,
}

/// Points ordered by decreasing threshold, from `(0, 0)` to `(1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub trials_h0: usize,
    pub trials_h1: usize,
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

impl RocCurve {
    /// Builds the curve from raw statistics; detection is `stat ≥ threshold`.
    pub fn from_statistics(h0: &[f64], h1: &[f64], thresholds: Option<&[f64]>) -> Result<Self> {
        if h0.is_empty() || h1.is_empty() {
            return Err(Error::Validation("ROC needs samples under both hypotheses".into()));
        }
        if h0.iter().chain(h1).any(|v| v.is_nan()) {
            return Err(Error::Numerical("NaN detection statistic".into()));
        }
        let mut s0 = h0.to_vec();
        let mut s1 = h1.to_vec();
        s0.sort_by(|a, b| b.total_cmp(a));
        s1.sort_by(|a, b| b.total_cmp(a));

        let mut grid: Vec<f64> = match thresholds {
            Some(t) => t.to_vec(),
            None => s0.iter().chain(&s1).copied().collect(),
        };
        grid.push(f64::INFINITY);
        grid.push(f64::NEG_INFINITY);
        grid.sort_by(|a, b| b.total_cmp(a));
        grid.dedup();

        let (n0, n1) = (s0.len(), s1.len());
        let (mut i0, mut i1) = (0, 0);
        let mut points = Vec::with_capacity(grid.len());
        for &t in &grid {
            // +∞ detects nothing
            if t < f64::INFINITY {
                while i0 < n0 && s0[i0] >= t {
                    i0 += 1;
                }
                while i1 < n1 && s1[i1] >= t {
                    i1 += 1;
                }
            }
            let pfa = i0 as f64 / n0 as f64;
            let pd = i1 as f64 / n1 as f64;
            points.push(RocPoint { threshold: t, pfa, pd, se_pfa: binomial_se(pfa, n0), se_pd: binomial_se(pd, n1) });
        }
        Ok(Self { points, trials_h0: n0, trials_h1: n1 })
    }

    /// The operating point with the largest `P_fa ≤ target`.
    pub fn operating_point(&self, target_pfa: f64) -> RocPoint {
        *self
            .points
            .iter()
            .filter(|p| p.pfa <= target_pfa)
            .max_by(|a, b| a.pfa.total_cmp(&b.pfa).then(a.pd.total_cmp(&b.pd)))
            .expect("the (0, 0) endpoint always qualifies")
    }

    /// `(P_d, SE)` at the largest achievable `P_fa ≤ target`.
    pub fn pd_at_pfa(&self, target_pfa: f64) -> (f64, f64) {
        let p = self.operating_point(target_pfa);
        (p.pd, p.se_pd)
    }

    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1].pfa - w[0].pfa) * 0.5 * (w[1].pd + w[0].pd)).sum()
    }
}

/// Raw LLR samples for both hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionStatistics {
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
}

/// Per-trial draws shared across waveforms: the target response and the
/// clutter under H₁ and an independent clutter draw under H₀.
pub(crate) fn trial_stream(seed: u64, hypothesis: u64, trial: usize) -> crate::rng::StreamRng {
    stream(seed, &[purpose::TRIAL, hypothesis, trial as u64])
}

fn simulate_h1(
    conv: &ConvolutionMatrix,
    target: &GmdSampler,
    clutter: &GmdSampler,
    seed: u64,
    trial: usize,
) -> Vec<Complex64> {
    let mut rng = trial_stream(seed, 1, trial);
    let (_, x) = target.sample(&mut rng);
    let (_, w) = clutter.sample(&mut rng);
    conv.apply(&x).iter().zip(&w).map(|(a, b)| a + b).collect()
}

/// Simulate `trials` observations per hypothesis and return the LLR values.
pub fn detection_statistics(scenario: &Scenario, s: &Waveform, run: &DetectionRun) -> Result<DetectionStatistics> {
    run.validate()?;
    let conv = convolution_matrix(s, scenario.taps())?;
    let detector = LlrDetector::new(
        &composite_covariances(&conv, scenario.target(), scenario.clutter())?,
        scenario.clutter(),
    )?;
    let target = GmdSampler::new(scenario.target())?;
    let clutter = GmdSampler::new(scenario.clutter())?;
    let h0 = par::try_map_range(run.trials, |i| {
        let mut rng = trial_stream(run.seed, 0, i);
        detector.statistic(&clutter.sample(&mut rng).1)
    })?;
    let h1 = par::try_map_range(run.trials, |i| detector.statistic(&simulate_h1(&conv, &target, &clutter, run.seed, i)))?;
    Ok(DetectionStatistics { h0, h1 })
}

/// Monte-Carlo ROC of the exact mixture LLR detector.
pub fn roc_curve(scenario: &Scenario, s: &Waveform, run: &DetectionRun) -> Result<RocCurve> {
    let stats = detection_statistics(scenario, s, run)?;
    RocCurve::from_statistics(&stats.h0, &stats.h1, run.thresholds.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmd::{GaussianComponent, ScenarioSpec};
    use crate::linalg::CMat;
    use crate::rng::stream;
    use crate::waveform::PhaseVector;
    use rand::Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn scalar_llr_at_origin() {
        let clutter = GmdModel::single(CMat::from_element(1, 1, c(1.0)));
        let h1 = GmdModel::single(CMat::from_element(1, 1, c(2.0)));
        let det = LlrDetector { h1: MixtureDensity::new(&h1).unwrap(), h0: MixtureDensity::new(&clutter).unwrap() };
        assert!((det.statistic(&[c(0.0)]).unwrap() + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn identical_models_give_zero() {
        let sc = ScenarioSpec::toy().build().unwrap();
        let det = LlrDetector { h1: MixtureDensity::new(sc.clutter()).unwrap(), h0: MixtureDensity::new(sc.clutter()).unwrap() };
        let mut rng = stream(1, &[]);
        for _ in 0..20 {
            let y: Vec<Complex64> = (0..6).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>())).collect();
            assert_eq!(det.statistic(&y).unwrap(), 0.0);
        }
    }

    /// Direct `Σ w_i exp(−yᴴΣ⁻¹y) / (πⁿ det Σ)` through dense inverse and
    /// determinant.
    fn naive_density(model: &GmdModel, y: &[Complex64]) -> f64 {
        let n = y.len();
        let yv = crate::linalg::CVec::from_column_slice(y);
        model
            .components()
            .iter()
            .map(|comp| {
                let inv = comp.covariance.clone().try_inverse().unwrap();
                let q = (yv.adjoint() * &inv * &yv)[(0, 0)].re;
                let det = comp.covariance.determinant().re;
                comp.weight * (-q).exp() / (PI.powi(n as i32) * det)
            })
            .sum()
    }

    #[test]
    fn log_domain_matches_naive_density() {
        let sc = Scenario::uncalibrated(
            ScenarioSpec::default_spectra(2, 3, 0.0).target_model().unwrap(),
            ScenarioSpec::default_spectra(2, 3, 0.0).clutter_model().unwrap(),
            2,
            1.0,
        )
        .unwrap();
        let mut rng = stream(2, &[]);
        let s = Waveform::with_energy(PhaseVector::wrap(&[0.3, -1.2]).unwrap(), 1.0).unwrap();
        let comp = composite_covariances(&convolution_matrix(&s, 3).unwrap(), sc.target(), sc.clutter()).unwrap();
        for _ in 0..20 {
            let y: Vec<Complex64> = (0..4).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let got = llr_statistic(&y, &comp, sc.clutter()).unwrap();
            let oracle = (naive_density(&comp.to_model(), &y) / naive_density(sc.clutter(), &y)).ln();
            assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
        }
    }

    #[test]
    fn roc_endpoints_and_monotonicity() {
        let roc = RocCurve::from_statistics(&[0.1, 0.5, -1.0, 0.5], &[2.0, 0.3, 0.5], None).unwrap();
        let first = roc.points.first().unwrap();
        let last = roc.points.last().unwrap();
        assert_eq!((first.pfa, first.pd), (0.0, 0.0));
        assert_eq!((last.pfa, last.pd), (1.0, 1.0));
        assert!(roc.points.windows(2).all(|w| w[1].pfa >= w[0].pfa && w[1].pd >= w[0].pd));
        // threshold 0.5 detects {0.5, 0.5} under H0 and {2.0, 0.5} under H1
        let p = roc.points.iter().find(|p| p.threshold == 0.5).unwrap();
        assert_eq!((p.pfa, p.pd), (0.5, 2.0 / 3.0));
        assert!(RocCurve::from_statistics(&[f64::NAN], &[0.0], None).is_err());
    }

    #[test]
    fn trial_guard() {
        let run = DetectionRun { trials: 1000, min_pfa: 1e-2, ..DetectionRun::default() };
        assert!(run.validate().is_ok());
        let run = DetectionRun { trials: 999, ..run };
        assert!(run.validate().is_err());
        assert!(DetectionRun { enforce_trial_guard: false, ..run }.validate().is_ok());
    }

    #[test]
    fn no_separability_gives_diagonal() {
        let sc = ScenarioSpec::toy().build().unwrap();
        let zero = GmdModel::new_unchecked(
            sc.target().components().iter().map(|c| GaussianComponent::new(c.weight, c.covariance.scale(0.0))).collect(),
        );
        let z = Scenario::uncalibrated(zero, sc.clutter().clone(), 4, 1.0).unwrap();
        let s = Waveform::with_energy(PhaseVector::zeros(4), 1.0).unwrap();
        let run = DetectionRun { trials: 4000, min_pfa: 1e-2, seed: 3, ..DetectionRun::default() };
        let roc = roc_curve(&z, &s, &run).unwrap();
        for p in &roc.points {
            let se = (p.se_pfa.powi(2) + p.se_pd.powi(2)).sqrt().max(1e-3);
            assert!((p.pd - p.pfa).abs() <= 4.0 * se + 1e-3, "{p:?}");
        }
        let auc_se = (1.0 / (12.0 * 4000.0) * 2.0f64).sqrt();
        assert!((roc.auc() - 0.5).abs() < 3.0 * auc_se, "{}", roc.auc());
    }

    #[test]
    fn roc_is_reproducible() {
        let sc = ScenarioSpec::toy().build().unwrap();
        let s = Waveform::with_energy(PhaseVector::wrap(&[0.1, 1.0, -2.0, 0.5]).unwrap(), 1.0).unwrap();
        let run = DetectionRun { trials: 500, min_pfa: 0.05, seed: 4, ..DetectionRun::default() };
        let a = roc_curve(&sc, &s, &run).unwrap();
        assert_eq!(a, roc_curve(&sc, &s, &run).unwrap());
        assert!(a.auc() > 0.5);
    }
}
