//! Global-best particle swarm and random phase coding baselines.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::random_individual;
use super::{argmax, evaluate_all, mean_fitness, Candidate, Phase, RunTrace, SearchSpace, TraceRecord};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::par;
use crate::rng::{purpose, stream};
use crate::waveform::{phase_difference, wrap, PhaseVector, Waveform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoConfig {
    pub population: usize,
    pub iterations: usize,
    /// `ω`
    pub inertia: f64,
    /// `c₁`
    pub cognitive: f64,
    /// `c₂`
    pub social: f64,
    /// Velocities are clamped to `[−v_max, v_max]`.
    pub velocity_clamp: f64,
    /// Initial velocities are drawn from `U(−v₀, v₀)`; zero starts at rest.
    pub initial_velocity: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            population: 200,
            iterations: 2000,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            velocity_clamp: PI,
            initial_velocity: 0.0,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population == 0 || self.iterations == 0 {
            return Err(Error::Validation("PSO population and iterations must be positive".into()));
        }
        let finite = [self.inertia, self.cognitive, self.social, self.velocity_clamp, self.initial_velocity];
        if finite.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation("PSO coefficients must be finite and nonnegative".into()));
        }
        if self.velocity_clamp == 0.0 || self.velocity_clamp > PI {
            return Err(Error::Validation(format!("velocity clamp {} outside (0, π]", self.velocity_clamp)));
        }
        if self.initial_velocity > self.velocity_clamp {
            return Err(Error::Validation("initial velocity exceeds the clamp".into()));
        }
        Ok(())
    }
}

/// Canonical global-best PSO. Attractions use the shortest signed arc
/// `Ψ(p − x)`, so a particle never travels the long way round the circle.
pub fn run_pso<O: Objective + ?Sized>(objective: &O, space: SearchSpace, config: &PsoConfig) -> Result<RunTrace> {
    config.validate()?;
    let n = space.code_len;
    let np = config.population;
    let seed = config.seed;
    let v0 = config.initial_velocity;
    let vmax = config.velocity_clamp;

    let init: Vec<(PhaseVector, Vec<f64>)> = par::map_range(np, |i| {
        let mut rng = stream(seed, &[purpose::PSO, 0, i as u64]);
        let x = random_individual(n, &mut rng);
        let v = (0..n).map(|_| if v0 > 0.0 { rng.random_range(-v0..v0) } else { 0.0 }).collect();
        (x, v)
    });
    let (mut pos, mut vel): (Vec<PhaseVector>, Vec<Vec<f64>>) = init.into_iter().unzip();
    let mut fit = evaluate_all(objective, space, &pos)?;
    let mut evaluations = np;
    let mut pbest = pos.clone();
    let mut pbest_fit = fit.clone();

    let b = argmax(&pbest_fit);
    let mut gbest = Candidate { phases: pbest[b].clone(), fitness: Some(pbest_fit[b]) };
    let mut records = Vec::with_capacity(config.iterations + 1);
    records.push(TraceRecord { t: 0, best_f: pbest_fit[b], mean_f: mean_fitness(&fit), phase: Phase::Init });

    for t in 1..=config.iterations {
        let moved: Vec<(PhaseVector, Vec<f64>)> = par::map_range(np, |i| {
            let mut rng = stream(seed, &[purpose::PSO, t as u64, i as u64]);
            let x = pos[i].as_slice();
            let p = pbest[i].as_slice();
            let g = gbest.phases.as_slice();
            let mut v = vel[i].clone();
            let mut nx = Vec::with_capacity(n);
            for d in 0..n {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let vd = config.inertia * v[d]
                    + config.cognitive * r1 * phase_difference(p[d], x[d])
                    + config.social * r2 * phase_difference(g[d], x[d]);
                v[d] = vd.clamp(-vmax, vmax);
                nx.push(wrap(x[d] + v[d]));
            }
            (PhaseVector::from_wrapped(nx), v)
        });
        (pos, vel) = moved.into_iter().unzip();
        fit = evaluate_all(objective, space, &pos)?;
        evaluations += np;

        for i in 0..np {
            if fit[i] > pbest_fit[i] {
                pbest[i] = pos[i].clone();
                pbest_fit[i] = fit[i];
            }
        }
        let b = argmax(&pbest_fit);
        if pbest_fit[b] > gbest.score() {
            gbest = Candidate { phases: pbest[b].clone(), fitness: Some(pbest_fit[b]) };
        }
        records.push(TraceRecord { t, best_f: gbest.score(), mean_f: mean_fitness(&fit), phase: Phase::Swarm });
    }

    Ok(RunTrace { records, best: gbest, evaluations })
}

/// I.i.d. `U(−π, π)` phases at modulus `c`.
pub fn random_phase_code(n: usize, magnitude: f64, rng: &mut impl Rng) -> Result<Waveform> {
    if n == 0 {
        return Err(Error::Validation("code length must be positive".into()));
    }
    Waveform::new(random_individual(n, rng), magnitude)
}

/// Fitness of `draws` random phase codes, draw `i` from its own stream.
#[derive(Debug, Clone, PartialEq)]
pub struct RpcSearch {
    pub fitness: Vec<f64>,
    pub best: Candidate,
}

impl RpcSearch {
    pub fn max(&self) -> f64 {
        self.best.score()
    }

    pub fn mean(&self) -> f64 {
        par::mean(&self.fitness)
    }
}

pub fn rpc_search<O: Objective + ?Sized>(objective: &O, space: SearchSpace, draws: usize, seed: u64) -> Result<RpcSearch> {
    if draws == 0 {
        return Err(Error::Validation("at least one random draw is required".into()));
    }
    let codes: Vec<PhaseVector> = par::map_range(draws, |i| {
        random_individual(space.code_len, &mut stream(seed, &[purpose::RPC, i as u64]))
    });
    let fitness = evaluate_all(objective, space, &codes)?;
    let b = argmax(&fitness);
    Ok(RpcSearch { best: Candidate { phases: codes[b].clone(), fitness: Some(fitness[b]) }, fitness })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(target: Vec<f64>) -> impl Fn(&Waveform) -> Result<f64> + Sync {
        move |s: &Waveform| {
            Ok(-s.phases().as_slice().iter().zip(&target).map(|(a, b)| phase_difference(*a, *b).powi(2)).sum::<f64>())
        }
    }

    #[test]
    fn frozen_swarm_stays_put() {
        let space = SearchSpace::new(4, 1.0).unwrap();
        let cfg = PsoConfig { population: 10, iterations: 20, cognitive: 0.0, social: 0.0, seed: 1, ..PsoConfig::default() };
        let trace = run_pso(&sphere(vec![0.0; 4]), space, &cfg).unwrap();
        let first = trace.records[0].best_f;
        assert!(trace.records.iter().all(|r| r.best_f == first && r.mean_f == trace.records[0].mean_f));
    }

    #[test]
    fn sphere_converges() {
        let target = vec![2.0, -3.0, 0.5, 3.1];
        let space = SearchSpace::new(4, 1.0).unwrap();
        let cfg = PsoConfig { population: 30, iterations: 500, seed: 2, ..PsoConfig::default() };
        let trace = run_pso(&sphere(target.clone()), space, &cfg).unwrap();
        assert!(trace.is_monotone());
        for (a, b) in trace.best.phases.as_slice().iter().zip(&target) {
            assert!(phase_difference(*a, *b).abs() < 1e-2);
        }
        assert_eq!(trace, run_pso(&sphere(target), space, &cfg).unwrap());
    }

    #[test]
    fn random_codes_have_constant_modulus() {
        let mut rng = stream(3, &[]);
        let s = random_phase_code(16, 0.25, &mut rng).unwrap();
        assert!(s.samples().iter().all(|x| (x.norm() - 0.25).abs() < 1e-15));
        let again = random_phase_code(16, 0.25, &mut stream(3, &[])).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn rpc_search_reports_max() {
        let space = SearchSpace::new(3, 1.0).unwrap();
        let r = rpc_search(&sphere(vec![0.0; 3]), space, 50, 4).unwrap();
        assert_eq!(r.fitness.len(), 50);
        assert_eq!(r.max(), r.fitness.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        assert!(r.mean() <= r.max());
    }
}
