//! Model diagnostics and Monte-Carlo cross-checks of the objective.

use std::fmt;
use std::io::Write;
use std::path::Path;

use miub_core::gmd::{synth_covariance_from_psd, validate_model, ComponentSpec, GaussianComponent, GmdModel, Scenario};
use miub_core::io::fmt_f64;
use miub_core::objective::MiubEvaluator;
use miub_core::oracle::{lipschitz_probe, mc_kl, mc_miub, mc_mutual_information, McEstimate, NestedSamples};
use miub_core::rng::derive_key;
use miub_core::waveform::Waveform;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{ResultManifest, Role};
use crate::pipeline::{reference_code, stage, stage_seed, VALIDATION_FILE};

/// Agreement threshold in combined standard errors.
pub const Z_LIMIT: f64 = 3.0;
/// Tolerance on the exactly-zero MI approximation for a zero target.
pub const ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported for reference; never fails the run.
    Info,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Info => "info",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub estimate: f64,
    pub se: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, estimate: f64, se: f64, detail: impl Into<String>) -> Self {
        let status = if pass { Status::Pass } else { Status::Fail };
        Self { name: name.into(), status, estimate, se, detail: detail.into() }
    }

    fn info(name: &str, estimate: f64, se: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), status: Status::Info, estimate, se, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail).collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write(&self, w: &mut impl Write, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# check, status, estimate, se, detail")?;
        for c in &self.checks {
            let detail = c.detail.replace(',', ";");
            writeln!(w, "{}, {}, {}, {}, {detail}", c.name, c.status, fmt_f64(c.estimate), fmt_f64(c.se))?;
        }
        Ok(())
    }
}

/// Builds a model without the structural checks so every issue can be reported.
fn raw_model(components: &[ComponentSpec], n: usize, spec_bounds: miub_core::gmd::EigenBounds) -> miub_core::Result<GmdModel> {
    let parts = components
        .iter()
        .map(|c| Ok(GaussianComponent::new(c.weight, synth_covariance_from_psd(&c.psd(n), spec_bounds)?)))
        .collect::<miub_core::Result<Vec<_>>>()?;
    Ok(GmdModel::new_unchecked(parts))
}

fn model_check(label: &str, components: &[ComponentSpec], n: usize, config: &ExperimentConfig) -> Check {
    let name = format!("{label}_model");
    let bounds = config.scenario.bounds();
    match raw_model(components, n, bounds) {
        Err(e) => Check::new(&name, false, f64::NAN, 0.0, format!("{label} model: {e}")),
        Ok(model) => {
            let diag = validate_model(&model, bounds);
            let issues: Vec<String> = diag.issues.iter().map(|i| format!("{label} model: {i}")).collect();
            let detail = if issues.is_empty() { format!("{label} model: {} components ok", model.len()) } else { issues.join("; ") };
            Check::new(&name, diag.passed(), diag.weight_sum, 0.0, detail)
        }
    }
}

fn z_check(name: &str, lhs: f64, rhs: f64, se: f64, detail: &str) -> Check {
    let z = if se > 0.0 { (lhs - rhs).abs() / se } else if lhs == rhs { 0.0 } else { f64::INFINITY };
    Check::new(name, z <= Z_LIMIT, lhs - rhs, se, format!("{detail}; z = {z:.3}"))
}

fn combined_se(parts: &[&McEstimate]) -> f64 {
    parts.iter().map(|e| e.se * e.se).sum::<f64>().sqrt()
}

/// Runs every check. Model problems are reported as failures, not errors.
pub fn run_checks(config: &ExperimentConfig) -> CliResult<ValidationReport> {
    let mut report = ValidationReport::default();
    let spec = &config.scenario;
    report.checks.push(model_check("target", &spec.target, spec.taps, config));
    report.checks.push(model_check("clutter", &spec.clutter, spec.obs_dim(), config));
    if !report.passed() {
        return Ok(report);
    }
    let scenario = match spec.build() {
        Ok(s) => s,
        Err(e) => {
            report.checks.push(Check::new("scenario", false, f64::NAN, 0.0, e.to_string()));
            return Ok(report);
        }
    };

    let seed = stage_seed(config.seed, stage::VALIDATION);
    let s = reference_code(&scenario, seed)?;
    report.checks.extend(oracle_checks(config, &scenario, &s, seed)?);
    report.checks.extend(zero_target_checks(config, &scenario, &s, derive_key(seed, &[9]))?);
    Ok(report)
}

fn oracle_checks(config: &ExperimentConfig, scenario: &Scenario, s: &Waveform, seed: u64) -> CliResult<Vec<Check>> {
    let v = &config.validation;
    let ev = MiubEvaluator::new(scenario)?;
    let breakdown = ev.breakdown(s)?;
    let composite = ev.composite(s)?;
    let nested = NestedSamples { outer: v.nested_outer, inner: v.nested_inner };

    let miub = mc_miub(scenario, s, nested, derive_key(seed, &[1]))?;
    let mi = mc_mutual_information(scenario, s, v.samples, derive_key(seed, &[2]))?;
    let kl = mc_kl(&composite.to_model(), scenario.clutter(), v.samples, derive_key(seed, &[3]))?;

    let mut checks = vec![
        z_check(
            "miub_decomposition",
            miub.value,
            mi.value + kl.value,
            combined_se(&[&miub, &mi, &kl]),
            &format!("mc_miub {} vs mc_mi + mc_kl {}", fmt_f64(miub.value), fmt_f64(mi.value + kl.value)),
        ),
        Check::new(
            "kl_nonnegative",
            kl.value >= -Z_LIMIT * kl.se,
            kl.value,
            kl.se,
            "Monte-Carlo KL(H1 || H0) above -3 SE",
        ),
        Check::info("mi_approximation_gap", breakdown.e_bar - mi.value, mi.se, format!("approx {}", fmt_f64(breakdown.e_bar))),
        Check::info("kl_approximation_gap", breakdown.d_bar - kl.value, kl.se, format!("approx {}", fmt_f64(breakdown.d_bar))),
    ];

    let probe = lipschitz_probe(scenario, v.lipschitz_pairs, derive_key(seed, &[4]))?;
    checks.push(Check::new(
        "covariance_lipschitz",
        probe.violations == 0,
        probe.max_covariance_ratio(),
        0.0,
        format!("bound {} over {} pairs; {} violations", fmt_f64(probe.bound), probe.pairs, probe.violations),
    ));
    Ok(checks)
}

/// With the target switched off both hypotheses coincide: MI and the true
/// upper bound vanish.
fn zero_target_checks(config: &ExperimentConfig, scenario: &Scenario, s: &Waveform, seed: u64) -> CliResult<Vec<Check>> {
    let v = &config.validation;
    let zero = Scenario::uncalibrated(
        scenario.target().scaled(0.0),
        scenario.clutter().clone(),
        scenario.code_len(),
        scenario.energy(),
    )?;
    let e_bar = MiubEvaluator::new(&zero)?.breakdown(s)?.e_bar;
    let mi = mc_mutual_information(&zero, s, v.samples, derive_key(seed, &[1]))?;
    let nested = NestedSamples { outer: v.nested_outer, inner: v.nested_inner };
    let miub = mc_miub(&zero, s, nested, derive_key(seed, &[2]))?;
    Ok(vec![
        Check::new("zero_target_mi_approx", e_bar.abs() <= ZERO_TOL, e_bar, 0.0, "closed-form MI approximation"),
        Check::new(
            "zero_target_mc_mi",
            mi.value.abs() <= Z_LIMIT * mi.se + ZERO_TOL,
            mi.value,
            mi.se,
            "Monte-Carlo MI",
        ),
        Check::new(
            "zero_target_mc_miub",
            miub.value.abs() <= Z_LIMIT * miub.se + ZERO_TOL,
            miub.value,
            miub.se,
            "Monte-Carlo MIUB",
        ),
    ])
}

/// The `validate` command: writes the report and fails with the names of
/// the failing checks.
pub fn execute(config: &ExperimentConfig, out_dir: &Path) -> CliResult<ResultManifest> {
    if i64::try_from(config.seed).is_err() {
        return Err(CliError::config("seed", "must be below 2^63"));
    }
    let hash = config.hash()?;
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Write { path: out_dir.into(), source })?;
    let mut manifest = ResultManifest::open(out_dir, &hash, config.seed);
    manifest.write(out_dir)?;

    let report = run_checks(config)?;
    let header = vec![
        format!("miub {}", env!("CARGO_PKG_VERSION")),
        format!("config_hash: {hash}"),
        format!("seed: {}", config.seed),
    ];
    let path = out_dir.join(VALIDATION_FILE);
    let mut buf = Vec::new();
    report.write(&mut buf, &header).map_err(|source| CliError::Write { path: path.clone(), source })?;
    std::fs::write(&path, buf).map_err(|source| CliError::Write { path, source })?;
    manifest.add(VALIDATION_FILE, Role::Validation);
    if !manifest.stages.iter().any(|s| s == "validate") {
        manifest.stages.push("validate".into());
    }
    manifest.finish();
    manifest.write(out_dir)?;

    let failures = report.failures();
    if failures.is_empty() {
        Ok(manifest)
    } else {
        let names: Vec<String> = failures.iter().map(|c| format!("{} ({})", c.name, c.detail)).collect();
        Err(CliError::ValidationFailed(names.join(", ")))
    }
}
