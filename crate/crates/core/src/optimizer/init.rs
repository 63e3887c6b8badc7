//! Hybrid initialization: LFM-like chirps, logistic-map chaos and
//! uniform random phases.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::waveform::{wrap, PhaseVector};

/// `θ_n = Ψ(β π (n−1)²/(N−1) + δ_n)`, one-based `n`. For `N = 1` the
/// quadratic term is zero.
pub fn lfm_phases(beta: f64, jitter: &[f64]) -> PhaseVector {
    let n = jitter.len();
    let denom = n.saturating_sub(1) as f64;
    let theta = jitter
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let quad = if n > 1 { beta * PI * (i * i) as f64 / denom } else { 0.0 };
            wrap(quad + d)
        })
        .collect();
    PhaseVector::from_wrapped(theta)
}

/// `c ← 4c(1 − c)` applied `k` times.
pub fn logistic_iterate(mut c: f64, k: usize) -> f64 {
    for _ in 0..k {
        c = 4.0 * c * (1.0 - c);
    }
    c
}

/// Seeds that fall onto a fixed point or into the `0.5 → 1 → 0` orbit.
pub fn is_degenerate_chaos_seed(c: f64) -> bool {
    c <= 1e-9 || c >= 1.0 - 1e-9 || c == 0.25 || c == 0.5 || c == 0.75
}

/// `Ψ(−π + 2πc)`.
pub fn chaos_phase(c: f64) -> f64 {
    wrap(-PI + 2.0 * PI * c)
}

fn check_len(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::Validation("code length must be positive".into()))
    } else {
        Ok(())
    }
}

pub(crate) fn lfm_individual(n: usize, delta: f64, rng: &mut impl Rng) -> PhaseVector {
    let beta = rng.random_range(-1.0..1.0);
    let jitter: Vec<f64> = (0..n)
        .map(|_| if delta > 0.0 { rng.random_range(-delta..delta) } else { 0.0 })
        .collect();
    lfm_phases(beta, &jitter)
}

pub(crate) fn chaos_individual(n: usize, iterations: usize, rng: &mut impl Rng) -> PhaseVector {
    let theta = (0..n)
        .map(|_| {
            let mut c: f64 = rng.random();
            while is_degenerate_chaos_seed(c) {
                c = rng.random();
            }
            chaos_phase(logistic_iterate(c, iterations))
        })
        .collect();
    PhaseVector::from_wrapped(theta)
}

pub(crate) fn random_individual(n: usize, rng: &mut impl Rng) -> PhaseVector {
    PhaseVector::from_wrapped((0..n).map(|_| rng.random_range(-PI..PI)).collect())
}

/// `count` chirp-seeded phase vectors with jitter bound `delta`.
pub fn init_lfm(count: usize, n: usize, delta: f64, rng: &mut impl Rng) -> Result<Vec<PhaseVector>> {
    check_len(n)?;
    if !(0.0..PI).contains(&delta) {
        return Err(Error::Validation(format!("lfm perturbation {delta} outside [0, π)")));
    }
    Ok((0..count).map(|_| lfm_individual(n, delta, rng)).collect())
}

/// `count` logistic-map phase vectors after `iterations` map steps.
pub fn init_chaos(count: usize, n: usize, iterations: usize, rng: &mut impl Rng) -> Result<Vec<PhaseVector>> {
    check_len(n)?;
    Ok((0..count).map(|_| chaos_individual(n, iterations, rng)).collect())
}

/// `count` i.i.d. `U(−π, π)` phase vectors.
pub fn init_random(count: usize, n: usize, rng: &mut impl Rng) -> Result<Vec<PhaseVector>> {
    check_len(n)?;
    Ok((0..count).map(|_| random_individual(n, rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn lfm_examples() {
        let p = lfm_phases(1.0, &[0.0; 3]);
        let expect = [0.0, PI / 2.0, 0.0];
        for (a, b) in p.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!(lfm_phases(0.0, &[0.0; 7]).as_slice().iter().all(|&x| x == 0.0));
        assert_eq!(lfm_phases(0.7, &[0.1]).as_slice(), &[0.1]);
        assert!(init_lfm(1, 0, 0.1, &mut stream(0, &[])).is_err());
    }

    #[test]
    fn lfm_jitter_stays_bounded() {
        let mut rng = stream(3, &[]);
        let delta = PI / 20.0;
        for p in init_lfm(50, 16, delta, &mut rng).unwrap() {
            assert_eq!(p.len(), 16);
            assert!(p.as_slice().iter().all(|x| (-PI..PI).contains(x)));
            // n = 1 has no chirp term, so only jitter remains
            assert!(p.as_slice()[0].abs() < delta);
        }
    }

    #[test]
    fn logistic_examples() {
        assert!((logistic_iterate(0.3, 1) - 0.84).abs() < 1e-15);
        assert!((logistic_iterate(0.3, 2) - 0.5376).abs() < 1e-15);
        assert_eq!(logistic_iterate(0.5, 1), 1.0);
        assert_eq!(logistic_iterate(0.5, 2), 0.0);
        assert!(is_degenerate_chaos_seed(0.5));
        assert!(is_degenerate_chaos_seed(0.75));
        assert!(is_degenerate_chaos_seed(1e-10));
        assert!(!is_degenerate_chaos_seed(0.3));
    }

    #[test]
    fn chaos_phase_map() {
        assert_eq!(chaos_phase(0.0), -PI);
        assert_eq!(chaos_phase(0.5), 0.0);
        let eps = 1e-6;
        assert!((chaos_phase(1.0 - eps) - (PI - 2.0 * PI * eps)).abs() < 1e-12);
    }

    #[test]
    fn chaos_population_covers_the_circle() {
        let mut rng = stream(4, &[]);
        let pop = init_chaos(20, 32, 100, &mut rng).unwrap();
        let all: Vec<f64> = pop.iter().flat_map(|p| p.as_slice().to_vec()).collect();
        assert!(all.iter().all(|x| (-PI..PI).contains(x)));
        assert!(all.iter().any(|&x| x < -2.0) && all.iter().any(|&x| x > 2.0));
    }

    #[test]
    fn random_init_moments() {
        let mut rng = stream(5, &[]);
        let pop = init_random(1000, 100, &mut rng).unwrap();
        let all: Vec<f64> = pop.iter().flat_map(|p| p.as_slice().to_vec()).collect();
        assert!(all.iter().all(|x| (-PI..PI).contains(x)));
        let m = all.iter().sum::<f64>() / all.len() as f64;
        let v = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (all.len() - 1) as f64;
        assert!(m.abs() < 0.02);
        assert!((v / (PI * PI / 3.0) - 1.0).abs() < 0.02);

        let again = init_random(1000, 100, &mut stream(5, &[])).unwrap();
        assert_eq!(pop, again);
    }
}
