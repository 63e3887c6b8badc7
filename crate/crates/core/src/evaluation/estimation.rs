//! Mixture MMSE reconstruction of the target impulse response.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::detection::trial_stream;
use super::sampling::GmdSampler;
use crate::error::{Error, Result};
use crate::gmd::{GmdModel, Scenario};
use crate::linalg::{log_sum_exp, CMat, Cholesky};
use crate::par;
use crate::waveform::{convolution_matrix, ConvolutionMatrix, Waveform};

/// Conditional-mean estimator under the mixture prior:
/// `x̂ = Σ_ℓ w_ℓ(y) Q_m Sᴴ Σ_ℓ⁻¹ y` with posterior weights
/// `w_ℓ ∝ γ_ℓ CN(y; 0, Σ_ℓ)`.
#[derive(Debug, Clone)]
pub struct MmseEstimator {
    offsets: Vec<f64>,
    factors: Vec<Cholesky>,
    gains: Vec<CMat>,
    obs_dim: usize,
}

impl MmseEstimator {
    pub fn new(conv: &ConvolutionMatrix, target: &GmdModel, clutter: &GmdModel) -> Result<Self> {
        let composite = crate::objective::composite_covariances(conv, target, clutter)?;
        let s = conv.to_matrix();
        let sh = s.adjoint();
        let mut offsets = Vec::with_capacity(composite.len());
        let mut factors = Vec::with_capacity(composite.len());
        let mut gains = Vec::with_capacity(composite.len());
        for e in composite.entries() {
            let ch = Cholesky::with_context(&e.covariance, "composite covariance")?;
            let q = &target.components()[e.target_index].covariance;
            gains.push(q * &sh * ch.inverse());
            offsets.push(e.weight.ln() - ch.logdet());
            factors.push(ch);
        }
        Ok(Self { offsets, factors, gains, obs_dim: conv.rows() })
    }

    pub fn for_waveform(scenario: &Scenario, s: &Waveform) -> Result<Self> {
        Self::new(&convolution_matrix(s, scenario.taps())?, scenario.target(), scenario.clutter())
    }

    /// Posterior component probabilities given `y`.
    pub fn posterior(&self, y: &[Complex64]) -> Vec<f64> {
        let logw: Vec<f64> = self.offsets.iter().zip(&self.factors).map(|(o, ch)| o - ch.quad_form(y)).collect();
        let norm = log_sum_exp(&logw);
        logw.iter().map(|l| (l - norm).exp()).collect()
    }

    pub fn estimate(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        if y.len() != self.obs_dim {
            return Err(Error::Validation(format!("observation length {} != {}", y.len(), self.obs_dim)));
        }
        let w = self.posterior(y);
        let nt = self.gains[0].nrows();
        let mut x = vec![Complex64::new(0.0, 0.0); nt];
        for (g, &wl) in self.gains.iter().zip(&w) {
            if wl == 0.0 {
                continue;
            }
            for (i, xi) in x.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, yj) in y.iter().enumerate() {
                    acc += g[(i, j)] * yj;
                }
                *xi += acc * wl;
            }
        }
        Ok(x)
    }
}

/// One-shot estimate; rebuilds the estimator on every call.
pub fn mmse_estimate(
    y: &[Complex64],
    conv: &ConvolutionMatrix,
    target: &GmdModel,
    clutter: &GmdModel,
) -> Result<Vec<Complex64>> {
    MmseEstimator::new(conv, target, clutter)?.estimate(y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationRun {
    pub trials: usize,
    pub seed: u64,
}

impl Default for EstimationRun {
    fn default() -> Self {
        Self { trials: 10_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseEstimate {
    pub mse: f64,
    pub se: f64,
    /// `Σ β_m tr(Q_m)`, the zero estimator's MSE.
    pub prior_power: f64,
}

impl MseEstimate {
    pub fn normalized(&self) -> f64 {
        if self.prior_power > 0.0 {
            self.mse / self.prior_power
        } else {
            0.0
        }
    }
}

/// Per-trial squared errors `‖x̂ − x‖²`.
pub fn squared_errors(scenario: &Scenario, s: &Waveform, run: &EstimationRun) -> Result<Vec<f64>> {
    if run.trials == 0 {
        return Err(Error::Validation("trial count must be positive".into()));
    }
    let conv = convolution_matrix(s, scenario.taps())?;
    let est = MmseEstimator::new(&conv, scenario.target(), scenario.clutter())?;
    let target = GmdSampler::new(scenario.target())?;
    let clutter = GmdSampler::new(scenario.clutter())?;
    par::try_map_range(run.trials, |i| {
        let mut rng = trial_stream(run.seed, 2, i);
        let (_, x) = target.sample(&mut rng);
        let (_, w) = clutter.sample(&mut rng);
        let y: Vec<Complex64> = conv.apply(&x).iter().zip(&w).map(|(a, b)| a + b).collect();
        let xh = est.estimate(&y)?;
        Ok(xh.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum())
    })
}

/// Monte-Carlo MSE of the mixture MMSE estimator.
pub fn estimation_mse(scenario: &Scenario, s: &Waveform, run: &EstimationRun) -> Result<MseEstimate> {
    let (mse, se) = par::mean_and_se(&squared_errors(scenario, s, run)?);
    Ok(MseEstimate { mse, se, prior_power: scenario.target().total_power() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub scr_db: f64,
    pub label: String,
    pub mse: f64,
    pub se: f64,
    pub prior_power: f64,
}

/// MSE for every (SCR, waveform) pair. Trial `i` uses the same underlying
/// draws across all waveforms and SCR points.
pub fn mse_vs_scr(
    base: &Scenario,
    scr_grid: &[f64],
    waveforms: &[(String, Waveform)],
    run: &EstimationRun,
) -> Result<Vec<MseRow>> {
    let mut rows = Vec::with_capacity(scr_grid.len() * waveforms.len());
    for &scr in scr_grid {
        let sc = base.with_scr(scr)?;
        for (label, s) in waveforms {
            let m = estimation_mse(&sc, s, run)?;
            rows.push(MseRow { scr_db: scr, label: label.clone(), mse: m.mse, se: m.se, prior_power: m.prior_power });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmd::{GaussianComponent, ScenarioSpec};
    use crate::waveform::PhaseVector;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn code(theta: &[f64]) -> Waveform {
        Waveform::with_energy(PhaseVector::wrap(theta).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn zero_observation_gives_zero_estimate() {
        let sc = ScenarioSpec::toy().build().unwrap();
        let est = MmseEstimator::for_waveform(&sc, &code(&[0.1, 0.2, -1.0, 2.0])).unwrap();
        assert!(est.estimate(&[c(0.0); 6]).unwrap().iter().all(|v| v.norm() == 0.0));
        assert!(est.estimate(&[c(0.0); 5]).is_err());
    }

    #[test]
    fn vanishing_clutter_inverts_the_channel() {
        let s = code(&[0.3, -0.7, 1.9, 2.5, -2.0]);
        let conv = convolution_matrix(&s, 3).unwrap();
        let target = GmdModel::single(CMat::identity(3, 3));
        let clutter = GmdModel::single(CMat::identity(7, 7) * c(1e-9));
        let x = vec![Complex64::new(1.0, -0.5), Complex64::new(0.2, 0.3), Complex64::new(-0.7, 0.1)];
        let xh = mmse_estimate(&conv.apply(&x), &conv, &target, &clutter).unwrap();
        for (a, b) in xh.iter().zip(&x) {
            assert!((a - b).norm() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn gaussian_mse_matches_closed_form() {
        let spec = ScenarioSpec::default_spectra(6, 3, 0.0);
        let q = spec.target_model().unwrap().mixture_covariance();
        let r = spec.clutter_model().unwrap().mixture_covariance();
        let sc = Scenario::new(GmdModel::single(q), GmdModel::single(r), 6, 1.0, 0.0).unwrap();
        let s = code(&[0.0, 1.0, -2.0, 0.4, 3.0, -0.5]);

        let sm = convolution_matrix(&s, 3).unwrap().to_matrix();
        let qc = &sc.target().components()[0].covariance;
        let sigma = &sm * qc * sm.adjoint() + &sc.clutter().components()[0].covariance;
        let post = qc - qc * sm.adjoint() * sigma.try_inverse().unwrap() * &sm * qc;
        let analytic = post.trace().re;

        let m = estimation_mse(&sc, &s, &EstimationRun { trials: 10_000, seed: 5 }).unwrap();
        assert!((m.mse / analytic - 1.0).abs() < 0.03, "{} vs {analytic}", m.mse);
        assert!(m.mse <= m.prior_power);
    }

    #[test]
    fn zero_target_has_zero_error() {
        let sc = ScenarioSpec::toy().build().unwrap();
        let zero = GmdModel::new_unchecked(
            sc.target().components().iter().map(|c| GaussianComponent::new(c.weight, c.covariance.scale(0.0))).collect(),
        );
        let z = Scenario::uncalibrated(zero, sc.clutter().clone(), 4, 1.0).unwrap();
        let m = estimation_mse(&z, &code(&[0.0, 1.0, 2.0, 3.0]), &EstimationRun { trials: 200, seed: 6 }).unwrap();
        assert_eq!(m.mse, 0.0);
        assert_eq!(m.normalized(), 0.0);
    }

    #[test]
    fn mixture_mmse_beats_zero_estimator() {
        let sc = ScenarioSpec::default_spectra(8, 4, 0.0).build().unwrap();
        let s = code(&[0.0, 0.5, 1.8, -2.2, 0.9, 3.0, -1.0, 0.2]);
        let m = estimation_mse(&sc, &s, &EstimationRun { trials: 4000, seed: 7 }).unwrap();
        assert!(m.mse <= m.prior_power + 3.0 * m.se);
    }

    #[test]
    fn normalized_mse_non_increasing_in_scr() {
        let sc = ScenarioSpec::default_spectra(8, 4, 0.0).build().unwrap();
        let s = code(&[0.0, 0.5, 1.8, -2.2, 0.9, 3.0, -1.0, 0.2]);
        let run = EstimationRun { trials: 4000, seed: 8 };
        let rows = mse_vs_scr(&sc, &[-10.0, 0.0, 10.0], &[("x".into(), s)], &run).unwrap();
        assert_eq!(rows.len(), 3);
        for w in rows.windows(2) {
            let (a, b) = (w[0].mse / w[0].prior_power, w[1].mse / w[1].prior_power);
            let se = (w[0].se / w[0].prior_power).hypot(w[1].se / w[1].prior_power);
            assert!(b <= a + 3.0 * se, "{a} -> {b}");
        }
    }
}
