//! Brute-force Monte-Carlo references for the closed-form approximations
//! and a sampling probe for the Lipschitz bounds. Intended for small
//! observation dimensions.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{GmdSampler, MixtureDensity};
use crate::gmd::{GmdModel, Scenario};
use crate::objective::{gaussian_kl, scenario_lipschitz_bound, CompositeLikelihood, MiubEvaluator};
use crate::par;
use crate::rng::{purpose, stream};
use crate::waveform::{convolution_matrix, PhaseVector, Waveform};

const TAG_KL: u64 = 1;
const TAG_MI: u64 = 2;
const TAG_MIUB: u64 = 3;
const TAG_LIPSCHITZ: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    /// Sample standard deviation over `sqrt(samples)`.
    pub se: f64,
    pub samples: usize,
    pub seed: u64,
}

impl McEstimate {
    fn from_values(values: &[f64], seed: u64) -> Self {
        let (value, se) = par::mean_and_se(values);
        Self { value, se, samples: values.len(), seed }
    }

    /// `|self − other|` in combined standard errors.
    pub fn z_distance(&self, other: f64, other_se: f64) -> f64 {
        (self.value - other).abs() / self.se.hypot(other_se)
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 2 {
        return Err(Error::Validation("at least two Monte-Carlo samples are required".into()));
    }
    Ok(())
}

/// `E_p[log p(y) − log q(y)]` with `y ~ p`.
pub fn mc_kl(p: &GmdModel, q: &GmdModel, samples: usize, seed: u64) -> Result<McEstimate> {
    check_samples(samples)?;
    if p.dim() != q.dim() {
        return Err(Error::Validation("mc_kl: dimension mismatch".into()));
    }
    let sampler = GmdSampler::new(p)?;
    let dp = MixtureDensity::new(p)?;
    let dq = MixtureDensity::new(q)?;
    let values = par::map_range(samples, |i| {
        let mut rng = stream(seed, &[purpose::ORACLE, TAG_KL, i as u64]);
        let (_, y) = sampler.sample(&mut rng);
        dp.log_density(&y) - dq.log_density(&y)
    });
    Ok(McEstimate::from_values(&values, seed))
}

/// Shared pieces of the joint `(x, y)` simulation.
struct JointModel {
    conv: crate::waveform::ConvolutionMatrix,
    target: GmdSampler,
    clutter: GmdSampler,
    /// `p(w)`, so `p(y|x) = p_w(y − Sx)`.
    noise: MixtureDensity,
    h0: MixtureDensity,
    h1: MixtureDensity,
}

impl JointModel {
    fn new(scenario: &Scenario, s: &Waveform) -> Result<Self> {
        let conv = convolution_matrix(s, scenario.taps())?;
        let composite = crate::objective::composite_covariances(&conv, scenario.target(), scenario.clutter())?;
        Ok(Self {
            target: GmdSampler::new(scenario.target())?,
            clutter: GmdSampler::new(scenario.clutter())?,
            noise: MixtureDensity::new(scenario.clutter())?,
            h0: MixtureDensity::new(scenario.clutter())?,
            h1: MixtureDensity::new(&composite.to_model())?,
            conv,
        })
    }

    /// `(Sx, y)` for one joint draw.
    fn draw(&self, rng: &mut impl Rng, x_fixed: Option<&[Complex64]>) -> (Vec<Complex64>, Vec<Complex64>) {
        let sx = match x_fixed {
            Some(x) => self.conv.apply(x),
            None => self.conv.apply(&self.target.sample(rng).1),
        };
        let (_, w) = self.clutter.sample(rng);
        let y = sx.iter().zip(&w).map(|(a, b)| a + b).collect();
        (sx, y)
    }

    fn log_conditional(&self, y: &[Complex64], sx: &[Complex64]) -> f64 {
        let w: Vec<Complex64> = y.iter().zip(sx).map(|(a, b)| a - b).collect();
        self.noise.log_density(&w)
    }
}

/// `I(x; y) = E[log p(y|x) − log p₁(y)]` over joint draws.
pub fn mc_mutual_information(scenario: &Scenario, s: &Waveform, samples: usize, seed: u64) -> Result<McEstimate> {
    check_samples(samples)?;
    let jm = JointModel::new(scenario, s)?;
    let values = par::map_range(samples, |i| {
        let mut rng = stream(seed, &[purpose::ORACLE, TAG_MI, i as u64]);
        let (sx, y) = jm.draw(&mut rng, None);
        jm.log_conditional(&y, &sx) - jm.h1.log_density(&y)
    });
    Ok(McEstimate::from_values(&values, seed))
}

/// Nested sample counts for [`mc_miub`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedSamples {
    pub outer: usize,
    pub inner: usize,
}

impl Default for NestedSamples {
    fn default() -> Self {
        Self { outer: 200, inner: 500 }
    }
}

/// `E_x[D_KL(p(y|x) ‖ p₀(y))]`: outer draws of `x`, inner draws of
/// `y ~ p(y|x)`. The standard error is taken over the outer means.
pub fn mc_miub(scenario: &Scenario, s: &Waveform, counts: NestedSamples, seed: u64) -> Result<McEstimate> {
    check_samples(counts.outer)?;
    if counts.inner == 0 {
        return Err(Error::Validation("inner sample count must be positive".into()));
    }
    let jm = JointModel::new(scenario, s)?;
    let outer = par::map_range(counts.outer, |j| {
        let mut rng = stream(seed, &[purpose::ORACLE, TAG_MIUB, j as u64]);
        let (_, x) = jm.target.sample(&mut rng);
        let inner: Vec<f64> = (0..counts.inner)
            .map(|_| {
                let (sx, y) = jm.draw(&mut rng, Some(&x));
                jm.log_conditional(&y, &sx) - jm.h0.log_density(&y)
            })
            .collect();
        par::mean(&inner)
    });
    let mut est = McEstimate::from_values(&outer, seed);
    est.samples = counts.outer * counts.inner;
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationReport {
    pub approx: f64,
    pub oracle: McEstimate,
    /// `approx − oracle`
    pub gap: f64,
    /// `|gap|` in oracle standard errors.
    pub gap_in_se: f64,
    /// Per composite component, `min_{k ≠ k*(ℓ)} D_KL(Σ_ℓ ‖ R_k)`; `+∞`
    /// when the clutter has a single component.
    pub separation: Vec<f64>,
    /// `tr(C_y)` with `C_y = Σ γ_ℓ Σ_ℓ`.
    pub trace_cy: f64,
}

impl ApproximationReport {
    fn new(approx: f64, oracle: McEstimate, separation: Vec<f64>, trace_cy: f64) -> Self {
        let gap = approx - oracle.value;
        Self { approx, oracle, gap, gap_in_se: gap.abs() / oracle.se, separation, trace_cy }
    }

    pub fn min_separation(&self) -> f64 {
        self.separation.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `min_{k ≠ k*(ℓ)} D_KL(Σ_ℓ ‖ R_k)` for each `ℓ`.
pub fn component_separation(composite: &CompositeLikelihood, clutter: &GmdModel, matches: &[usize]) -> Result<Vec<f64>> {
    composite
        .entries()
        .iter()
        .zip(matches)
        .map(|(e, &kstar)| {
            let mut best = f64::INFINITY;
            for (k, rk) in clutter.components().iter().enumerate() {
                if k != kstar {
                    best = best.min(gaussian_kl(&e.covariance, &rk.covariance)?);
                }
            }
            Ok(best)
        })
        .collect()
}

/// MI and KL approximation errors against the Monte-Carlo references.
pub fn approximation_error_report(
    scenario: &Scenario,
    s: &Waveform,
    samples: usize,
    seed: u64,
) -> Result<(ApproximationReport, ApproximationReport)> {
    let ev = MiubEvaluator::new(scenario)?;
    let composite = ev.composite(s)?;
    let breakdown = ev.breakdown(s)?;
    let separation = component_separation(&composite, scenario.clutter(), &breakdown.matches)?;
    let trace_cy = crate::linalg::trace_re(&composite.aggregate_covariance());

    let mi = mc_mutual_information(scenario, s, samples, seed)?;
    let kl = mc_kl(&composite.to_model(), scenario.clutter(), samples, seed)?;
    Ok((
        ApproximationReport::new(breakdown.e_bar, mi, separation.clone(), trace_cy),
        ApproximationReport::new(breakdown.d_bar, kl, separation, trace_cy),
    ))
}

/// Sampled Lipschitz ratios over random feasible pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub pairs: usize,
    /// `2 N_T sqrt(E_s) λ_max`
    pub bound: f64,
    /// `max_ℓ ‖Σ_ℓ(s₁) − Σ_ℓ(s₂)‖_F / ‖s₁ − s₂‖` per pair.
    pub covariance_ratios: Vec<f64>,
    /// `|F(s₁) − F(s₂)| / ‖s₁ − s₂‖` per pair.
    pub objective_ratios: Vec<f64>,
    pub violations: usize,
}

impl LipschitzReport {
    pub fn max_covariance_ratio(&self) -> f64 {
        self.covariance_ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_objective_ratio(&self) -> f64 {
        self.objective_ratios.iter().copied().fold(0.0, f64::max)
    }
}

const MIN_PAIR_DISTANCE: f64 = 1e-6;

fn sample_pair(space_len: usize, energy: f64, near: bool, rng: &mut impl Rng) -> Result<(Waveform, Waveform, f64)> {
    loop {
        let a: Vec<f64> = (0..space_len).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
        let b: Vec<f64> = if near {
            let scale = 10f64.powf(rng.random_range(-4.0..-1.0));
            a.iter().map(|x| x + scale * rng.random_range(-1.0..1.0)).collect()
        } else {
            (0..space_len).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
        };
        let s1 = Waveform::with_energy(PhaseVector::wrap(&a)?, energy)?;
        let s2 = Waveform::with_energy(PhaseVector::wrap(&b)?, energy)?;
        let d = s1.samples().iter().zip(s2.samples()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        if d >= MIN_PAIR_DISTANCE {
            return Ok((s1, s2, d));
        }
    }
}

/// Half the pairs are independent draws, half are small perturbations of
/// a random code (where local ratios are largest).
pub fn lipschitz_probe(scenario: &Scenario, pairs: usize, seed: u64) -> Result<LipschitzReport> {
    let ev = MiubEvaluator::new(scenario)?;
    let bound = scenario_lipschitz_bound(scenario);
    let ratios = par::try_map_range(pairs, |i| {
        let mut rng = stream(seed, &[purpose::ORACLE, TAG_LIPSCHITZ, i as u64]);
        let (s1, s2, d) = sample_pair(scenario.code_len(), scenario.energy(), i % 2 == 1, &mut rng)?;
        let c1 = ev.composite(&s1)?;
        let c2 = ev.composite(&s2)?;
        let cov = c1
            .entries()
            .iter()
            .zip(c2.entries())
            .map(|(a, b)| (&a.covariance - &b.covariance).norm())
            .fold(0.0, f64::max)
            / d;
        let f = (ev.breakdown(&s1)?.f_total - ev.breakdown(&s2)?.f_total).abs() / d;
        Ok::<_, Error>((cov, f))
    })?;
    let (covariance_ratios, objective_ratios): (Vec<f64>, Vec<f64>) = ratios.into_iter().unzip();
    let violations = covariance_ratios.iter().filter(|&&r| r > bound).count();
    Ok(LipschitzReport { pairs, bound, covariance_ratios, objective_ratios, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmd::ScenarioSpec;
    use crate::linalg::CMat;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn toy_code() -> Waveform {
        Waveform::with_energy(PhaseVector::wrap(&[0.4, -1.3, 2.2, 0.9]).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn kl_of_identical_models_is_zero() {
        let m = ScenarioSpec::toy().clutter_model().unwrap();
        let e = mc_kl(&m, &m, 2000, 1).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn kl_matches_closed_form_for_single_gaussians() {
        let a = CMat::from_row_slice(2, 2, &[c(2.0), Complex64::new(0.3, 0.2), Complex64::new(0.3, -0.2), c(1.0)]);
        let b = CMat::identity(2, 2);
        let est = mc_kl(&GmdModel::single(a.clone()), &GmdModel::single(b.clone()), 20_000, 2).unwrap();
        let exact = gaussian_kl(&a, &b).unwrap();
        assert!(est.z_distance(exact, 0.0) < 3.0, "{est:?} vs {exact}");
        assert!(est.value >= -3.0 * est.se);
    }

    #[test]
    fn gaussian_mi_and_miub_match_closed_forms() {
        let spec = ScenarioSpec::default_spectra(4, 3, 0.0);
        let q = spec.target_model().unwrap().mixture_covariance();
        let r = spec.clutter_model().unwrap().mixture_covariance();
        let sc = Scenario::new(GmdModel::single(q), GmdModel::single(r), 4, 1.0, 0.0).unwrap();
        let s = toy_code();
        let b = miub_objective_parts(&sc, &s);

        let mi = mc_mutual_information(&sc, &s, 20_000, 3).unwrap();
        assert!(mi.z_distance(b.e_bar, 0.0) < 3.0, "{mi:?} vs {}", b.e_bar);

        // single components: MIUB = tr(R⁻¹SQSᴴ) = F
        let miub = mc_miub(&sc, &s, NestedSamples { outer: 200, inner: 200 }, 4).unwrap();
        assert!(miub.z_distance(b.f_total, 0.0) < 3.0, "{miub:?} vs {}", b.f_total);
    }

    fn miub_objective_parts(sc: &Scenario, s: &Waveform) -> crate::objective::ObjectiveBreakdown {
        crate::objective::miub_objective(s, sc).unwrap()
    }

    #[test]
    fn zero_target_gives_zero_information() {
        let sc = ScenarioSpec::toy().build().unwrap();
        let zero = GmdModel::new_unchecked(
            sc.target()
                .components()
                .iter()
                .map(|c| crate::gmd::GaussianComponent::new(c.weight, c.covariance.scale(0.0)))
                .collect(),
        );
        let z = Scenario::uncalibrated(zero, sc.clutter().clone(), 4, 1.0).unwrap();
        let mi = mc_mutual_information(&z, &toy_code(), 1000, 5).unwrap();
        assert!(mi.value.abs() < 1e-12);
        let miub = mc_miub(&z, &toy_code(), NestedSamples { outer: 20, inner: 20 }, 6).unwrap();
        assert!(miub.value.abs() < 1e-12);
    }

    #[test]
    fn estimates_are_reproducible() {
        let sc = ScenarioSpec::toy().build().unwrap();
        let a = mc_mutual_information(&sc, &toy_code(), 500, 7).unwrap();
        let b = mc_mutual_information(&sc, &toy_code(), 500, 7).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn single_component_report_has_small_gaps() {
        let spec = ScenarioSpec::default_spectra(4, 3, 0.0);
        let q = spec.target_model().unwrap().mixture_covariance();
        let r = spec.clutter_model().unwrap().mixture_covariance();
        let sc = Scenario::new(GmdModel::single(q), GmdModel::single(r), 4, 1.0, 0.0).unwrap();
        let (mi, kl) = approximation_error_report(&sc, &toy_code(), 20_000, 8).unwrap();
        assert!(mi.gap_in_se < 3.0, "{mi:?}");
        assert!(kl.gap_in_se < 3.0, "{kl:?}");
        assert_eq!(kl.min_separation(), f64::INFINITY);
        assert!(kl.trace_cy > 0.0);
    }

    #[test]
    fn scaling_all_covariances_leaves_single_component_mi_unchanged() {
        let spec = ScenarioSpec::default_spectra(4, 3, 0.0);
        let q = spec.target_model().unwrap().mixture_covariance();
        let r = spec.clutter_model().unwrap().mixture_covariance();
        let a = Scenario::uncalibrated(GmdModel::single(q.clone()), GmdModel::single(r.clone()), 4, 1.0).unwrap();
        let b = Scenario::uncalibrated(GmdModel::single(q.scale(7.0)), GmdModel::single(r.scale(7.0)), 4, 1.0).unwrap();
        let s = toy_code();
        assert!((miub_objective_parts(&a, &s).e_bar - miub_objective_parts(&b, &s).e_bar).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_probe_respects_bound() {
        let sc = ScenarioSpec::default_spectra(8, 4, 0.0).build().unwrap();
        let rep = lipschitz_probe(&sc, 200, 9).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.max_covariance_ratio() <= rep.bound);
        assert!(rep.max_objective_ratio().is_finite());
        assert_eq!(rep.covariance_ratios.len(), 200);
    }
}
