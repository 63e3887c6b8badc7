//! Fixtures shared by the acceptance suite, plus the one-line reporter it
//! uses for each criterion.

use miub_core::evaluation::standard_complex_normal;
use miub_core::gmd::{GaussianComponent, GmdModel, Scenario, ScenarioSpec};
use miub_core::linalg::CMat;
use miub_core::optimizer::OptimizerConfig;
use miub_core::rng::{stream, StreamRng};
use num_complex::Complex64;

/// Prints `ACnn PASS|FAIL name: detail` and returns `pass`.
pub fn report(id: u8, name: &str, pass: bool, detail: impl AsRef<str>) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("AC{id:02} {verdict} {name}: {}", detail.as_ref());
    pass
}

/// `G Gᴴ / n + loading·I` with standard complex normal `G`.
pub fn random_pd(n: usize, loading: f64, rng: &mut StreamRng) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| standard_complex_normal(rng));
    let mut m = &g * g.adjoint() / Complex64::new(n as f64, 0.0);
    for i in 0..n {
        m[(i, i)] += Complex64::new(loading, 0.0);
    }
    m
}

/// `K = M = 1` with random positive definite `Q` and `R`.
pub fn single_component_scenario(code_len: usize, taps: usize, seed: u64) -> Scenario {
    let mut rng = stream(seed, &[1]);
    let q = random_pd(taps, 0.1, &mut rng);
    let r = random_pd(code_len + taps - 1, 0.1, &mut rng);
    Scenario::uncalibrated(GmdModel::single(q), GmdModel::single(r), code_len, 1.0)
        .expect("single-component scenario is well formed")
}

/// Clutter pair used to probe the KL approximation: the toy clutter
/// components as given, and a variant whose second component nearly
/// coincides with the first (`R₂ = R₁ + 10⁻³ I`). The target is the
/// single Gaussian with the toy target's mixture covariance.
pub fn separation_scenarios(scr_db: f64) -> (Scenario, Scenario) {
    let spec = ScenarioSpec::toy();
    let target = GmdModel::single(spec.target_model().expect("toy target").mixture_covariance());
    let clutter = spec.clutter_model().expect("toy clutter");
    let weights = clutter.weights();
    let r1 = clutter.components()[0].covariance.clone();
    let n = r1.nrows();
    let r2 = &r1 + CMat::identity(n, n) * Complex64::new(1e-3, 0.0);
    let overlapping = GmdModel::new(vec![GaussianComponent::new(weights[0], r1), GaussianComponent::new(weights[1], r2)])
        .expect("overlapping clutter is well formed");
    let build = |c: GmdModel| Scenario::new(target.clone(), c, spec.code_len, spec.energy, scr_db).expect("scenario");
    (build(clutter), build(overlapping))
}

/// Reduced PC-DOA budget used for the comparative checks.
pub fn desk_budget(seed: u64) -> OptimizerConfig {
    OptimizerConfig { population: 50, iterations: 300, seed, ..OptimizerConfig::default() }
}

/// Combined standard error of independent estimates.
pub fn combined_se(parts: &[f64]) -> f64 {
    parts.iter().map(|s| s * s).sum::<f64>().sqrt()
}
