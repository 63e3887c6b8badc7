//! The MIUB surrogate `F(s) = D̄(s) + Ē(s)` and the benchmark objectives.
//!
//! `Ē` is the log-determinant approximation of the mutual information
//! between the target response and the echo; `D̄` is the matched-component
//! approximation of the KL divergence between the target-present and
//! clutter-only likelihoods. Everything is evaluated in the log domain:
//! `det(Σ)⁻¹` underflows long before the observation length gets large.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmd::{GaussianComponent, GmdModel, Scenario};
use crate::linalg::{log_sum_exp, trace_product, trace_re, CMat, Cholesky};
use crate::waveform::{convolution_matrix, ConvolutionMatrix, Waveform};

/// `log det A` via Cholesky.
pub use crate::linalg::logdet_hermitian_pd;

/// One component `γ_ℓ CN(0, Σ_ℓ)` of the target-present likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeEntry {
    pub weight: f64,
    pub covariance: CMat,
    pub clutter_index: usize,
    pub target_index: usize,
}

/// The `L = M K` pairs `(γ_ℓ, Σ_ℓ)`, ordered `ℓ = k·M + m` (zero-based).
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeLikelihood {
    entries: Vec<CompositeEntry>,
    target_count: usize,
    clutter_count: usize,
}

impl CompositeLikelihood {
    pub fn entries(&self) -> &[CompositeEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, clutter_index: usize, target_index: usize) -> usize {
        clutter_index * self.target_count + target_index
    }

    pub fn target_count(&self) -> usize {
        self.target_count
    }

    pub fn clutter_count(&self) -> usize {
        self.clutter_count
    }

    pub fn dim(&self) -> usize {
        self.entries.first().map_or(0, |e| e.covariance.nrows())
    }

    /// The likelihood as a plain mixture model.
    pub fn to_model(&self) -> GmdModel {
        GmdModel::new_unchecked(
            self.entries
                .iter()
                .map(|e| GaussianComponent::new(e.weight, e.covariance.clone()))
                .collect(),
        )
    }

    /// `C_y = Σ γ_ℓ Σ_ℓ`.
    pub fn aggregate_covariance(&self) -> CMat {
        self.to_model().mixture_covariance()
    }
}

fn check_dims(conv: &ConvolutionMatrix, target: &GmdModel, clutter: &GmdModel) -> Result<()> {
    if target.dim() != conv.taps() {
        return Err(Error::Validation(format!(
            "target dimension {} does not match N_T = {}",
            target.dim(),
            conv.taps()
        )));
    }
    if clutter.dim() != conv.rows() {
        return Err(Error::Validation(format!(
            "clutter dimension {} does not match N + N_T - 1 = {}",
            clutter.dim(),
            conv.rows()
        )));
    }
    Ok(())
}

/// `Σ_ℓ = S Q_m Sᴴ + R_k`, `γ_ℓ = α_k β_m`.
pub fn composite_covariances(conv: &ConvolutionMatrix, target: &GmdModel, clutter: &GmdModel) -> Result<CompositeLikelihood> {
    check_dims(conv, target, clutter)?;
    let signal: Vec<CMat> = target.components().iter().map(|c| conv.sandwich(&c.covariance)).collect();
    let mut entries = Vec::with_capacity(target.len() * clutter.len());
    for (k, rk) in clutter.components().iter().enumerate() {
        for (m, qm) in target.components().iter().enumerate() {
            entries.push(CompositeEntry {
                weight: rk.weight * qm.weight,
                covariance: &signal[m] + &rk.covariance,
                clutter_index: k,
                target_index: m,
            });
        }
    }
    Ok(CompositeLikelihood { entries, target_count: target.len(), clutter_count: clutter.len() })
}

/// `D_KL(CN(0,A) ‖ CN(0,B)) = tr(B⁻¹A) − log det(B⁻¹A) − n`.
pub fn gaussian_kl(a: &CMat, b: &CMat) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Validation("gaussian_kl: dimension mismatch".into()));
    }
    let chb = Cholesky::with_context(b, "gaussian_kl")?;
    let cha = Cholesky::with_context(a, "gaussian_kl")?;
    let tr = trace_product(&chb.inverse(), a);
    Ok(kl_from_parts(tr, cha.logdet(), chb.logdet(), a.nrows()))
}

#[inline]
fn kl_from_parts(trace: f64, logdet_a: f64, logdet_b: f64, n: usize) -> f64 {
    // tiny negatives are rounding; the divergence is nonnegative
    (trace - (logdet_a - logdet_b) - n as f64).max(0.0)
}

/// Per-component quantities of the clutter model that do not depend on
/// the waveform.
#[derive(Debug, Clone)]
pub struct ClutterStats {
    weights: Vec<f64>,
    inverses: Vec<CMat>,
    logdets: Vec<f64>,
    /// `log Σ_k α_k det(R_k)⁻¹`
    log_h0_term: f64,
}

impl ClutterStats {
    pub fn new(clutter: &GmdModel) -> Result<Self> {
        let mut inverses = Vec::with_capacity(clutter.len());
        let mut logdets = Vec::with_capacity(clutter.len());
        for c in clutter.components() {
            let ch = Cholesky::with_context(&c.covariance, "clutter covariance")?;
            logdets.push(ch.logdet());
            inverses.push(ch.inverse());
        }
        let weights = clutter.weights();
        let terms: Vec<f64> = weights.iter().zip(&logdets).map(|(w, ld)| w.ln() - ld).collect();
        Ok(Self { weights, inverses, logdets, log_h0_term: log_sum_exp(&terms) })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn logdet(&self, k: usize) -> f64 {
        self.logdets[k]
    }

    /// `D_KL(CN(0, Σ) ‖ CN(0, R_k))` given `log det Σ`.
    pub fn kl_to(&self, k: usize, sigma: &CMat, logdet_sigma: f64) -> f64 {
        kl_from_parts(trace_product(&self.inverses[k], sigma), logdet_sigma, self.logdets[k], sigma.nrows())
    }
}

fn composite_logdets(composite: &CompositeLikelihood) -> Result<Vec<f64>> {
    composite
        .entries
        .iter()
        .map(|e| Ok(Cholesky::with_context(&e.covariance, "composite covariance")?.logdet()))
        .collect()
}

fn mi_from_logdets(composite: &CompositeLikelihood, stats: &ClutterStats, logdets: &[f64]) -> f64 {
    let terms: Vec<f64> = composite.entries.iter().zip(logdets).map(|(e, ld)| e.weight.ln() - ld).collect();
    stats.log_h0_term - log_sum_exp(&terms)
}

/// Result of the matched-component KL approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct KlApproximation {
    pub value: f64,
    /// `k*(ℓ)` for each composite component.
    pub matches: Vec<usize>,
    /// Matching costs `J(k, ℓ)`, indexed `[ℓ][k]`.
    pub costs: Vec<Vec<f64>>,
}

fn kl_from_logdets(composite: &CompositeLikelihood, stats: &ClutterStats, logdets: &[f64]) -> KlApproximation {
    let mut value = 0.0;
    let mut matches = Vec::with_capacity(composite.len());
    let mut costs = Vec::with_capacity(composite.len());
    for (e, &ld) in composite.entries.iter().zip(logdets) {
        let row: Vec<f64> = (0..stats.len())
            .map(|k| (e.weight / stats.weights[k]).ln() + stats.kl_to(k, &e.covariance, ld))
            .collect();
        // strict comparison keeps the smallest index on ties
        let best = row
            .iter()
            .enumerate()
            .fold(0, |best, (k, &j)| if j < row[best] { k } else { best });
        value += e.weight * row[best];
        matches.push(best);
        costs.push(row);
    }
    KlApproximation { value, matches, costs }
}

/// `Ē = log Σ_k α_k det(R_k)⁻¹ − log Σ_ℓ γ_ℓ det(Σ_ℓ)⁻¹`.
pub fn mi_approx(composite: &CompositeLikelihood, clutter: &GmdModel) -> Result<f64> {
    let stats = ClutterStats::new(clutter)?;
    Ok(mi_from_logdets(composite, &stats, &composite_logdets(composite)?))
}

/// `D̄ = Σ_ℓ γ_ℓ min_k J(k, ℓ)` with `J(k, ℓ) = log(γ_ℓ/α_k) + D_KL(Σ_ℓ ‖ R_k)`.
pub fn kl_approx(composite: &CompositeLikelihood, clutter: &GmdModel) -> Result<KlApproximation> {
    let stats = ClutterStats::new(clutter)?;
    Ok(kl_from_logdets(composite, &stats, &composite_logdets(composite)?))
}

/// `F = D̄ + Ē` with its parts, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub f_total: f64,
    pub d_bar: f64,
    pub e_bar: f64,
    pub matches: Vec<usize>,
}

/// Precomputed evaluator for one scenario. Construction factors the
/// clutter covariances once; each evaluation then costs `M` band-limited
/// sandwich products and `L` Cholesky factorizations.
#[derive(Debug, Clone)]
pub struct MiubEvaluator {
    target: GmdModel,
    clutter: GmdModel,
    stats: ClutterStats,
    taps: usize,
}

impl MiubEvaluator {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Ok(Self {
            target: scenario.target().clone(),
            clutter: scenario.clutter().clone(),
            stats: ClutterStats::new(scenario.clutter())?,
            taps: scenario.taps(),
        })
    }

    pub fn composite(&self, s: &Waveform) -> Result<CompositeLikelihood> {
        composite_covariances(&convolution_matrix(s, self.taps)?, &self.target, &self.clutter)
    }

    pub fn breakdown(&self, s: &Waveform) -> Result<ObjectiveBreakdown> {
        let composite = self.composite(s)?;
        let logdets = composite_logdets(&composite)?;
        let e_bar = mi_from_logdets(&composite, &self.stats, &logdets);
        let kl = kl_from_logdets(&composite, &self.stats, &logdets);
        Ok(ObjectiveBreakdown { f_total: kl.value + e_bar, d_bar: kl.value, e_bar, matches: kl.matches })
    }

    /// `Ē` alone.
    pub fn mi(&self, s: &Waveform) -> Result<f64> {
        let composite = self.composite(s)?;
        let logdets = composite_logdets(&composite)?;
        Ok(mi_from_logdets(&composite, &self.stats, &logdets))
    }

    /// Output signal-to-clutter ratio in dB.
    pub fn scr(&self, s: &Waveform) -> Result<f64> {
        output_scr_db(s, &self.target, &self.clutter)
    }
}

/// `F(s)` for a calibrated scenario.
pub fn miub_objective(s: &Waveform, scenario: &Scenario) -> Result<ObjectiveBreakdown> {
    MiubEvaluator::new(scenario)?.breakdown(s)
}

/// `tr(S Q Sᴴ) = Σ_{a,b} Q[a,b] r(b − a)` where `r` is the aperiodic
/// autocorrelation of `s`.
fn signal_power(samples: &[Complex64], q: &CMat) -> f64 {
    let n = samples.len() as isize;
    let nt = q.nrows() as isize;
    let r = |tau: isize| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let j = i - tau;
            if (0..n).contains(&j) {
                acc += samples[i as usize] * samples[j as usize].conj();
            }
        }
        acc
    };
    let lags: Vec<Complex64> = (-(nt - 1)..nt).map(r).collect();
    let mut acc = 0.0;
    for a in 0..nt {
        for b in 0..nt {
            acc += (q[(a as usize, b as usize)] * lags[(b - a + nt - 1) as usize]).re;
        }
    }
    acc
}

fn output_scr_db(s: &Waveform, target: &GmdModel, clutter: &GmdModel) -> Result<f64> {
    if target.dim() == 0 {
        return Err(Error::Validation("empty target model".into()));
    }
    let q = target.mixture_covariance();
    let num = signal_power(s.samples(), &q);
    let den = trace_re(&clutter.mixture_covariance());
    Ok(10.0 * (num / den).log10())
}

/// `10 log10(tr(S Q̄ Sᴴ) / tr(R̄))` with `Q̄`, `R̄` the mixture covariances.
pub fn scr_objective(s: &Waveform, scenario: &Scenario) -> Result<f64> {
    output_scr_db(s, scenario.target(), scenario.clutter())
}

/// `w·f_SCR + (1 − w)·Ē`.
pub fn wsm_objective(s: &Waveform, scenario: &Scenario, w: f64) -> Result<f64> {
    WsmObjective::new(scenario, w)?.evaluate(s)
}

/// Covariance-map Lipschitz constant `2 N_T sqrt(E_s) λ_max`.
pub fn lipschitz_local_bound(taps: usize, energy: f64, lambda_max: f64) -> f64 {
    2.0 * taps as f64 * energy.sqrt() * lambda_max
}

/// [`lipschitz_local_bound`] with `λ_max` the largest eigenvalue over the
/// target covariances (the only ones that enter `Σ_ℓ(s₁) − Σ_ℓ(s₂)`).
pub fn scenario_lipschitz_bound(scenario: &Scenario) -> f64 {
    lipschitz_local_bound(scenario.taps(), scenario.energy(), scenario.target().lambda_max())
}

/// A fitness function over waveforms; larger is better.
pub trait Objective: Sync {
    fn evaluate(&self, s: &Waveform) -> Result<f64>;
}

impl<F> Objective for F
where
    F: Fn(&Waveform) -> Result<f64> + Sync,
{
    fn evaluate(&self, s: &Waveform) -> Result<f64> {
        self(s)
    }
}

/// `F(s)`.
#[derive(Debug, Clone)]
pub struct MiubObjective(MiubEvaluator);

impl MiubObjective {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Ok(Self(MiubEvaluator::new(scenario)?))
    }
}

impl Objective for MiubObjective {
    fn evaluate(&self, s: &Waveform) -> Result<f64> {
        Ok(self.0.breakdown(s)?.f_total)
    }
}

/// `Ē(s)` only; the MI-maximization benchmark.
#[derive(Debug, Clone)]
pub struct MiObjective(MiubEvaluator);

impl MiObjective {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Ok(Self(MiubEvaluator::new(scenario)?))
    }
}

impl Objective for MiObjective {
    fn evaluate(&self, s: &Waveform) -> Result<f64> {
        self.0.mi(s)
    }
}

/// Weighted SCR–MI benchmark.
#[derive(Debug, Clone)]
pub struct WsmObjective {
    evaluator: MiubEvaluator,
    weight: f64,
}

impl WsmObjective {
    pub fn new(scenario: &Scenario, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::Validation(format!("WSM weight {weight} outside [0, 1]")));
        }
        Ok(Self { evaluator: MiubEvaluator::new(scenario)?, weight })
    }
}

impl Objective for WsmObjective {
    fn evaluate(&self, s: &Waveform) -> Result<f64> {
        let w = self.weight;
        let scr = if w > 0.0 { self.evaluator.scr(s)? } else { 0.0 };
        let mi = if w < 1.0 { self.evaluator.mi(s)? } else { 0.0 };
        Ok(w * scr + (1.0 - w) * mi)
    }
}
