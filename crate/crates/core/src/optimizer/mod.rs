//! Population optimizers over the phase torus `[−π, π)^N`.

mod init;
mod pcdoa;
mod pso;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmd::Scenario;
use crate::objective::Objective;
use crate::par;
use crate::waveform::{PhaseVector, Waveform};

pub use init::{
    chaos_phase, init_chaos, init_lfm, init_random, is_degenerate_chaos_seed, lfm_phases, logistic_iterate,
};
pub use pcdoa::{explore_k_range, explore_step, exploit_k_max, exploit_step, run_pcdoa, ExploreGuide};
pub use pso::{random_phase_code, rpc_search, run_pso, PsoConfig, RpcSearch};

/// PC-DOA settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// `N_p`
    pub population: usize,
    /// `T`
    pub iterations: usize,
    /// `η`, share of LFM-seeded individuals.
    pub lfm_fraction: f64,
    /// `α`, exploration runs while `t ≤ αT`.
    pub explore_fraction: f64,
    /// `G`
    pub groups: usize,
    /// `K_chaos`
    pub chaos_iterations: usize,
    /// `Δ`, bound on the LFM phase jitter.
    pub lfm_perturbation: f64,
    pub seed: u64,
    pub elitism: usize,
    pub explore_guide: ExploreGuide,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            population: 200,
            iterations: 2000,
            lfm_fraction: 0.3,
            explore_fraction: 0.9,
            groups: 5,
            chaos_iterations: 100,
            lfm_perturbation: PI / 20.0,
            seed: 0,
            elitism: 2,
            explore_guide: ExploreGuide::Own,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.population == 0 {
            return bad("population must be positive".into());
        }
        if self.iterations == 0 {
            return bad("iteration count must be positive".into());
        }
        if !(self.lfm_fraction > 0.0 && self.lfm_fraction < 1.0) {
            return bad(format!("lfm fraction {} outside (0, 1)", self.lfm_fraction));
        }
        if !(self.explore_fraction > 0.0 && self.explore_fraction <= 1.0) {
            return bad(format!("explore fraction {} outside (0, 1]", self.explore_fraction));
        }
        if self.groups == 0 || self.groups > self.population {
            return bad(format!("group count {} must lie in [1, N_p]", self.groups));
        }
        if self.chaos_iterations == 0 {
            return bad("chaos iterations must be positive".into());
        }
        if !(self.lfm_perturbation > 0.0 && self.lfm_perturbation < PI) {
            return bad(format!("lfm perturbation {} outside (0, π)", self.lfm_perturbation));
        }
        if self.elitism > self.population {
            return bad(format!("elitism count {} exceeds the population", self.elitism));
        }
        Ok(())
    }

    /// `(N_LFM, N_chaos, N_rand)`.
    pub fn partition_counts(&self) -> (usize, usize, usize) {
        partition_counts(self.population, self.lfm_fraction)
    }

    /// Last exploration iteration, `⌊αT⌋`.
    pub fn explore_until(&self) -> usize {
        (self.explore_fraction * self.iterations as f64).floor() as usize
    }
}

/// `N_LFM = ⌊η N_p⌋`, `N_chaos = ⌊(N_p − N_LFM)/2⌋`, remainder random.
pub fn partition_counts(population: usize, lfm_fraction: f64) -> (usize, usize, usize) {
    let lfm = ((lfm_fraction * population as f64).floor() as usize).min(population);
    let chaos = (population - lfm) / 2;
    (lfm, chaos, population - lfm - chaos)
}

/// `(cos(πt/T) + 1)/2`.
pub fn cosine_schedule(t: usize, total: usize) -> Result<f64> {
    if total == 0 || t > total {
        return Err(Error::Validation(format!("schedule step {t} outside [0, {total}]")));
    }
    if t == total {
        return Ok(0.0);
    }
    Ok(0.5 * ((PI * t as f64 / total as f64).cos() + 1.0))
}

/// Code length and energy shared by every candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    pub code_len: usize,
    pub energy: f64,
}

impl SearchSpace {
    pub fn new(code_len: usize, energy: f64) -> Result<Self> {
        if code_len == 0 {
            return Err(Error::Validation("code length must be positive".into()));
        }
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(Error::Validation(format!("energy {energy} must be positive")));
        }
        Ok(Self { code_len, energy })
    }

    pub fn waveform(&self, phases: PhaseVector) -> Result<Waveform> {
        Waveform::with_energy(phases, self.energy)
    }
}

impl From<&Scenario> for SearchSpace {
    fn from(sc: &Scenario) -> Self {
        Self { code_len: sc.code_len(), energy: sc.energy() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub phases: PhaseVector,
    pub fitness: Option<f64>,
}

impl Candidate {
    pub fn new(phases: PhaseVector) -> Self {
        Self { phases, fitness: None }
    }

    pub fn is_evaluated(&self) -> bool {
        self.fitness.is_some()
    }

    /// Fitness, or `−∞` when not yet evaluated.
    pub fn score(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Init,
    Explore,
    Exploit,
    Swarm,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Init => "init",
            Phase::Explore => "explore",
            Phase::Exploit => "exploit",
            Phase::Swarm => "swarm",
        })
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "init" => Ok(Phase::Init),
            "explore" => Ok(Phase::Explore),
            "exploit" => Ok(Phase::Exploit),
            "swarm" => Ok(Phase::Swarm),
            other => Err(Error::Format(format!("unknown phase label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub best_f: f64,
    pub mean_f: f64,
    pub phase: Phase,
}

/// Per-iteration history plus the final best candidate. Row 0 is the
/// initial population.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub best: Candidate,
    pub evaluations: usize,
}

impl RunTrace {
    pub fn best_fitness(&self) -> f64 {
        self.best.score()
    }

    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].best_f >= w[0].best_f)
    }

    pub fn best_waveform(&self, space: SearchSpace) -> Result<Waveform> {
        space.waveform(self.best.phases.clone())
    }
}

/// Evaluate every candidate; the first failure (by index) aborts with the
/// offending phases attached.
pub(crate) fn evaluate_all<O: Objective + ?Sized>(
    objective: &O,
    space: SearchSpace,
    phases: &[PhaseVector],
) -> Result<Vec<f64>> {
    par::try_map_range(phases.len(), |i| {
        let p = &phases[i];
        let attach = |source: Error| Error::Objective { phases: p.as_slice().to_vec(), source: Box::new(source) };
        let s = space.waveform(p.clone())?;
        let f = objective.evaluate(&s).map_err(attach)?;
        if f.is_nan() {
            return Err(attach(Error::Numerical("objective returned NaN".into())));
        }
        Ok(f)
    })
}

pub(crate) fn mean_fitness(values: &[f64]) -> f64 {
    par::mean(values)
}

/// Index of the largest value; ties keep the earliest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    values.iter().enumerate().fold(0, |best, (i, &v)| if v > values[best] { i } else { best })
}
