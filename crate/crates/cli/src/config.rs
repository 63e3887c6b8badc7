//! Experiment configuration file.

use std::fmt;
use std::path::{Path, PathBuf};

use miub_core::evaluation::{DetectionRun, DEFAULT_DOPPLER_POINTS};
use miub_core::gmd::{Scenario, ScenarioSpec};
use miub_core::optimizer::{OptimizerConfig, PsoConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    #[default]
    Miub,
    Mi,
    Wsm,
    /// No design: a single random phase code.
    Rpc,
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectiveKind::Miub => "miub",
            ObjectiveKind::Mi => "mi",
            ObjectiveKind::Wsm => "wsm",
            ObjectiveKind::Rpc => "rpc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    /// WSM weight on the MI term.
    pub weight: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self { kind: ObjectiveKind::Miub, weight: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Pcdoa,
    Pso,
    /// Best of `rpc_draws` random phase codes under the objective.
    Rpc,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Pcdoa => "pcdoa",
            Algorithm::Pso => "pso",
            Algorithm::Rpc => "rpc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub algorithm: Algorithm,
    pub rpc_draws: usize,
    /// The `seed` fields of the nested blocks are replaced by values
    /// derived from the top-level seed.
    pub pcdoa: OptimizerConfig,
    pub pso: PsoConfig,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Pcdoa,
            rpc_draws: 1000,
            pcdoa: OptimizerConfig::default(),
            pso: PsoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Detection trials per hypothesis.
    pub trials: usize,
    pub min_pfa: f64,
    /// Operating points written to the ROC file; empty writes the full curve.
    pub pfa_grid: Vec<f64>,
    pub scr_grid: Vec<f64>,
    pub mse_trials: usize,
    pub doppler_points: usize,
    /// Also evaluate a seeded random phase code for comparison.
    pub rpc_reference: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            min_pfa: 1e-3,
            pfa_grid: vec![1e-3, 1e-2, 1e-1],
            scr_grid: vec![-5.0, -2.5, 0.0, 2.5, 5.0],
            mse_trials: 2000,
            doppler_points: DEFAULT_DOPPLER_POINTS,
            rpc_reference: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    /// Draws for the plain Monte-Carlo MI and KL estimates.
    pub samples: usize,
    pub nested_outer: usize,
    pub nested_inner: usize,
    pub lipschitz_pairs: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { samples: 20_000, nested_outer: 4000, nested_inner: 100, lipschitz_pairs: 1000 }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Not part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioSpec) -> Self {
        Self {
            seed: 0,
            output_dir: None,
            scenario,
            objective: ObjectiveConfig::default(),
            optimizer: OptimizerSection::default(),
            evaluation: EvaluationConfig::default(),
            validation: ValidationConfig::default(),
        }
    }

    /// Full-size setup: `N = 64`, `N_p = 200`, `η = 0.3`, `α = 0.9`.
    pub fn full_scale() -> Self {
        Self::new(ScenarioSpec::full_scale())
    }

    /// `N = 4`, `N_T = 3` with budgets small enough for a quick run.
    pub fn toy() -> Self {
        let mut c = Self::new(ScenarioSpec::toy());
        c.optimizer.pcdoa.population = 20;
        c.optimizer.pcdoa.iterations = 30;
        c.optimizer.pso.population = 20;
        c.optimizer.pso.iterations = 30;
        c.optimizer.rpc_draws = 100;
        c.evaluation.trials = 2000;
        c.evaluation.min_pfa = 1e-2;
        c.evaluation.pfa_grid = vec![1e-2, 1e-1];
        c.evaluation.mse_trials = 500;
        c.evaluation.doppler_points = 17;
        c.validation.samples = 20_000;
        c.validation.nested_outer = 4000;
        c.validation.nested_inner = 100;
        c.validation.lipschitz_pairs = 200;
        c
    }

    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml_string(&self) -> CliResult<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
        Self::from_toml_str(&text)
    }

    /// Hex SHA-256 of the canonical serialization, output directory excluded.
    pub fn hash(&self) -> CliResult<String> {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let text = canonical.to_toml_string()?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }

    pub fn detection_run(&self, seed: u64) -> DetectionRun {
        DetectionRun {
            trials: self.evaluation.trials,
            min_pfa: self.evaluation.min_pfa,
            enforce_trial_guard: true,
            thresholds: None,
            seed,
        }
    }

    /// Checks every block through its owning module and builds the scenario.
    pub fn prepare(&self) -> CliResult<Scenario> {
        if i64::try_from(self.seed).is_err() {
            return Err(CliError::config("seed", "must be below 2^63"));
        }
        self.scenario.target_model().map_err(|e| CliError::config("scenario.target", e))?;
        self.scenario.clutter_model().map_err(|e| CliError::config("scenario.clutter", e))?;
        let scenario = self.scenario.build().map_err(|e| CliError::config("scenario", e))?;

        let w = self.objective.weight;
        if !(0.0..=1.0).contains(&w) {
            return Err(CliError::config("objective.weight", format!("{w} outside [0, 1]")));
        }

        let opt = &self.optimizer;
        opt.pcdoa.validate().map_err(|e| CliError::config("optimizer.pcdoa", e))?;
        opt.pso.validate().map_err(|e| CliError::config("optimizer.pso", e))?;
        if opt.rpc_draws == 0 {
            return Err(CliError::config("optimizer.rpc_draws", "must be positive"));
        }

        let ev = &self.evaluation;
        self.detection_run(0).validate().map_err(|e| CliError::config("evaluation", e))?;
        for (i, &p) in ev.pfa_grid.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) {
                return Err(CliError::config(format!("evaluation.pfa_grid[{i}]"), format!("{p} outside (0, 1]")));
            }
            if p < ev.min_pfa {
                return Err(CliError::config(
                    format!("evaluation.pfa_grid[{i}]"),
                    format!("{p} below min_pfa {}", ev.min_pfa),
                ));
            }
        }
        for (i, &s) in ev.scr_grid.iter().enumerate() {
            if !s.is_finite() {
                return Err(CliError::config(format!("evaluation.scr_grid[{i}]"), "must be finite"));
            }
        }
        if ev.mse_trials == 0 {
            return Err(CliError::config("evaluation.mse_trials", "must be positive"));
        }
        if ev.doppler_points == 0 {
            return Err(CliError::config("evaluation.doppler_points", "must be positive"));
        }

        let v = &self.validation;
        for (name, n) in [
            ("samples", v.samples),
            ("nested_outer", v.nested_outer),
            ("nested_inner", v.nested_inner),
            ("lipschitz_pairs", v.lipschitz_pairs),
        ] {
            if n == 0 {
                return Err(CliError::config(format!("validation.{name}"), "must be positive"));
            }
        }
        Ok(scenario)
    }
}
