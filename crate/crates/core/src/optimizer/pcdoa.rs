//! PC-DOA: grouped exploration with cosine-annealed steps, then
//! global-best exploitation.

use std::f64::consts::PI;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::{chaos_individual, lfm_individual, random_individual};
use super::{
    argmax, cosine_schedule, evaluate_all, mean_fitness, Candidate, OptimizerConfig, Phase, RunTrace, SearchSpace,
    TraceRecord,
};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::par;
use crate::rng::{purpose, stream};
use crate::waveform::{wrap, PhaseVector};

/// Base point for perturbed coordinates during exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExploreGuide {
    /// Perturb the candidate's own phases.
    #[default]
    Own,
    /// Perturb around the best member of the candidate's group.
    LocalElite,
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Integer range for the exploration subset size, clamped to `[1, N]`.
pub fn explore_k_range(n: usize, groups: usize) -> (usize, usize) {
    let lo = ceil_div(n, 8 * groups).clamp(1, n.max(1));
    let hi = ceil_div(n, 3 * groups).clamp(lo, n.max(1));
    (lo, hi)
}

/// `max(2, ⌈N/3⌉)`, clamped to `N`.
pub fn exploit_k_max(n: usize) -> usize {
    ceil_div(n, 3).max(2).min(n.max(1))
}

/// Copy `candidate`, then for a random `k`-subset set
/// `θ_n = Ψ(base_n + scale·δ_n)`, `δ_n ~ U(−π, π)`.
fn perturb(candidate: &PhaseVector, base: &PhaseVector, k: usize, scale: f64, rng: &mut impl Rng) -> PhaseVector {
    let n = candidate.len();
    let mut theta = candidate.as_slice().to_vec();
    for idx in index::sample(rng, n, k.min(n)) {
        let delta = rng.random_range(-PI..PI);
        theta[idx] = wrap(base.as_slice()[idx] + scale * delta);
    }
    PhaseVector::from_wrapped(theta)
}

fn check_same_len(a: &PhaseVector, b: &PhaseVector) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Validation(format!("phase vector lengths {} and {} differ", a.len(), b.len())));
    }
    Ok(())
}

/// One exploration move at iteration `t` of `total`.
pub fn explore_step(
    candidate: &PhaseVector,
    groups: usize,
    t: usize,
    total: usize,
    rng: &mut impl Rng,
) -> Result<PhaseVector> {
    explore_around(candidate, candidate, groups, cosine_schedule(t, total)?, rng)
}

fn explore_around(
    candidate: &PhaseVector,
    base: &PhaseVector,
    groups: usize,
    scale: f64,
    rng: &mut impl Rng,
) -> Result<PhaseVector> {
    check_same_len(candidate, base)?;
    if groups == 0 {
        return Err(Error::Validation("group count must be positive".into()));
    }
    let (lo, hi) = explore_k_range(candidate.len(), groups);
    let k = rng.random_range(lo..=hi);
    Ok(perturb(candidate, base, k, scale, rng))
}

/// One exploitation move toward `global_best` at iteration `t` of `total`.
pub fn exploit_step(
    candidate: &PhaseVector,
    global_best: &PhaseVector,
    t: usize,
    total: usize,
    rng: &mut impl Rng,
) -> Result<PhaseVector> {
    check_same_len(candidate, global_best)?;
    let scale = cosine_schedule(t, total)?;
    let k = rng.random_range(1..=exploit_k_max(candidate.len()));
    Ok(perturb(candidate, global_best, k, scale, rng))
}

/// Contiguous blocks of a shuffled permutation; returns each member's
/// group id.
fn assign_groups(population: usize, groups: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..population).collect();
    perm.shuffle(rng);
    let mut group_of = vec![0; population];
    for g in 0..groups {
        for &member in &perm[g * population / groups..(g + 1) * population / groups] {
            group_of[member] = g;
        }
    }
    group_of
}

fn local_elites(group_of: &[usize], groups: usize, fitness: &[f64]) -> Vec<usize> {
    let mut elite: Vec<Option<usize>> = vec![None; groups];
    for (i, &g) in group_of.iter().enumerate() {
        match elite[g] {
            Some(e) if fitness[e] >= fitness[i] => {}
            _ => elite[g] = Some(i),
        }
    }
    elite.into_iter().map(|e| e.expect("groups are non-empty")).collect()
}

/// Greedy replacement followed by elitism over the union of parents and
/// offspring. Returns the surviving population and its fitness.
fn select(
    parents: Vec<PhaseVector>,
    parent_fit: Vec<f64>,
    offspring: Vec<PhaseVector>,
    offspring_fit: Vec<f64>,
    elitism: usize,
) -> (Vec<PhaseVector>, Vec<f64>) {
    let np = parents.len();
    // (fitness, is_offspring, index); parents sort first on ties
    let mut union: Vec<(f64, bool, usize)> = (0..np)
        .map(|i| (parent_fit[i], false, i))
        .chain((0..np).map(|i| (offspring_fit[i], true, i)))
        .collect();
    union.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut source: Vec<bool> = (0..np).map(|i| offspring_fit[i] > parent_fit[i]).collect();
    let mut fit: Vec<f64> = (0..np).map(|i| if source[i] { offspring_fit[i] } else { parent_fit[i] }).collect();
    let mut slot_of: Vec<Option<(bool, usize)>> = vec![None; np];
    let mut protected = vec![false; np];
    for i in 0..np {
        slot_of[i] = Some((source[i], i));
    }

    for &(f, from_offspring, idx) in union.iter().take(elitism) {
        let present = (0..np).find(|&s| slot_of[s] == Some((from_offspring, idx)));
        if let Some(s) = present {
            protected[s] = true;
            continue;
        }
        let worst = (0..np)
            .filter(|&s| !protected[s])
            .min_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(b.cmp(&a)));
        if let Some(w) = worst {
            if f > fit[w] {
                slot_of[w] = Some((from_offspring, idx));
                source[w] = from_offspring;
                fit[w] = f;
                protected[w] = true;
            }
        }
    }

    let pop = slot_of
        .iter()
        .map(|s| {
            let (from_offspring, idx) = s.expect("every slot is filled");
            if from_offspring {
                offspring[idx].clone()
            } else {
                parents[idx].clone()
            }
        })
        .collect();
    (pop, fit)
}

/// Run PC-DOA, maximizing `objective` over constant-modulus codes.
pub fn run_pcdoa<O: Objective + ?Sized>(objective: &O, space: SearchSpace, config: &OptimizerConfig) -> Result<RunTrace> {
    config.validate()?;
    let n = space.code_len;
    let np = config.population;
    let total = config.iterations;
    let seed = config.seed;
    let (n_lfm, n_chaos, _) = config.partition_counts();

    let mut pop: Vec<PhaseVector> = par::map_range(np, |i| {
        let mut rng = stream(seed, &[purpose::INIT, i as u64]);
        if i < n_lfm {
            lfm_individual(n, config.lfm_perturbation, &mut rng)
        } else if i < n_lfm + n_chaos {
            chaos_individual(n, config.chaos_iterations, &mut rng)
        } else {
            random_individual(n, &mut rng)
        }
    });
    let mut fit = evaluate_all(objective, space, &pop)?;
    let mut evaluations = np;

    let b = argmax(&fit);
    let mut best = Candidate { phases: pop[b].clone(), fitness: Some(fit[b]) };
    let mut records = Vec::with_capacity(total + 1);
    records.push(TraceRecord { t: 0, best_f: fit[b], mean_f: mean_fitness(&fit), phase: Phase::Init });

    let explore_until = config.explore_until();
    for t in 1..=total {
        let explore = t <= explore_until;
        let scale = cosine_schedule(t, total)?;
        let mut iter_rng = stream(seed, &[purpose::ITERATION, t as u64]);
        let group_of = assign_groups(np, config.groups, &mut iter_rng);
        let elites = local_elites(&group_of, config.groups, &fit);

        let offspring: Vec<PhaseVector> = par::try_map_range(np, |i| {
            let mut rng = stream(seed, &[purpose::OFFSPRING, t as u64, i as u64]);
            if explore {
                let base = match config.explore_guide {
                    ExploreGuide::Own => &pop[i],
                    ExploreGuide::LocalElite => &pop[elites[group_of[i]]],
                };
                explore_around(&pop[i], base, config.groups, scale, &mut rng)
            } else {
                let k = rng.random_range(1..=exploit_k_max(n));
                Ok(perturb(&pop[i], &best.phases, k, scale, &mut rng))
            }
        })?;
        let offspring_fit = evaluate_all(objective, space, &offspring)?;
        evaluations += np;

        let (next, next_fit) = select(pop, fit, offspring, offspring_fit, config.elitism);
        pop = next;
        fit = next_fit;

        let b = argmax(&fit);
        if fit[b] > best.score() {
            best = Candidate { phases: pop[b].clone(), fitness: Some(fit[b]) };
        }
        records.push(TraceRecord {
            t,
            best_f: best.score(),
            mean_f: mean_fitness(&fit),
            phase: if explore { Phase::Explore } else { Phase::Exploit },
        });
    }

    Ok(RunTrace { records, best, evaluations })
}
