//! Constant-modulus phase-coded waveforms and their convolution matrices.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMat;

/// Wraps one phase into `[-π, π)`: `mod(θ + π, 2π) − π`.
///
/// Values already in range are returned unchanged, which makes the
/// operator exactly idempotent in floating point.
#[inline]
pub fn wrap(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let mut r = (theta + PI).rem_euclid(TAU);
    if r >= TAU {
        r = 0.0;
    }
    let out = r - PI;
    if out >= PI {
        -PI
    } else {
        out
    }
}

/// Phase vector with every entry in `[-π, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(Vec<f64>);

impl PhaseVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Wraps `raw` element-wise; rejects non-finite input.
    pub fn wrap(raw: &[f64]) -> Result<Self> {
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("phase {i} is not finite")));
        }
        Ok(Self(raw.iter().map(|&v| wrap(v)).collect()))
    }

    /// Builds from values that are already wrapped. Panics in debug builds
    /// if an entry is out of range.
    pub(crate) fn from_wrapped(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| (-PI..PI).contains(v)), "unwrapped phase");
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// `wrap_phase` over a vector.
pub fn wrap_phase(raw: &[f64]) -> Result<PhaseVector> {
    PhaseVector::wrap(raw)
}

/// Shortest signed arc from `b` to `a`, in `[-π, π)`.
#[inline]
pub fn phase_difference(a: f64, b: f64) -> f64 {
    wrap(a - b)
}

/// Waveform `s_n = c·exp(jθ_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    magnitude: f64,
    phases: PhaseVector,
    samples: Vec<Complex64>,
}

impl Waveform {
    pub fn new(phases: PhaseVector, magnitude: f64) -> Result<Self> {
        if !(magnitude > 0.0) || !magnitude.is_finite() {
            return Err(Error::Validation(format!("magnitude {magnitude} must be positive")));
        }
        let samples = phases.as_slice().iter().map(|&t| Complex64::from_polar(magnitude, t)).collect();
        Ok(Self { magnitude, phases, samples })
    }

    /// Magnitude chosen so that `‖s‖² = energy`.
    pub fn with_energy(phases: PhaseVector, energy: f64) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::Validation("waveform needs at least one sample".into()));
        }
        let c = (energy / phases.len() as f64).sqrt();
        Self::new(phases, c)
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn phases(&self) -> &PhaseVector {
        &self.phases
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `N c²`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Replaces the phases; samples are recomputed.
    pub fn set_phases(&mut self, phases: PhaseVector) {
        self.samples = phases.as_slice().iter().map(|&t| Complex64::from_polar(self.magnitude, t)).collect();
        self.phases = phases;
    }

    /// `e^{jφ}·s`.
    pub fn rotated(&self, phi: f64) -> Self {
        let p: Vec<f64> = self.phases.as_slice().iter().map(|&t| wrap(t + phi)).collect();
        Self::new(PhaseVector::from_wrapped(p), self.magnitude).expect("magnitude already validated")
    }
}

/// Banded Toeplitz matrix `S` of shape `(N + N_T − 1) × N_T` with
/// `S[i, j] = s[i − j]` (zero-based) inside the band.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionMatrix {
    samples: Vec<Complex64>,
    taps: usize,
}

impl ConvolutionMatrix {
    /// From arbitrary complex samples (not necessarily constant modulus).
    pub fn from_samples(samples: &[Complex64], taps: usize) -> Result<Self> {
        if taps == 0 {
            return Err(Error::Validation("N_T must be at least 1".into()));
        }
        if samples.is_empty() {
            return Err(Error::Validation("waveform is empty".into()));
        }
        Ok(Self { samples: samples.to_vec(), taps })
    }

    pub fn code_len(&self) -> usize {
        self.samples.len()
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn rows(&self) -> usize {
        self.samples.len() + self.taps - 1
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        if i >= j && i - j < self.samples.len() {
            self.samples[i - j]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn to_matrix(&self) -> CMat {
        CMat::from_fn(self.rows(), self.taps, |i, j| self.entry(i, j))
    }

    /// `S x`, i.e. the full linear convolution of `s` and `x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.taps, "tap count mismatch");
        let n = self.samples.len();
        let mut y = vec![Complex64::new(0.0, 0.0); self.rows()];
        for (j, xj) in x.iter().enumerate() {
            for (k, s) in self.samples.iter().enumerate() {
                y[j + k] += s * xj;
            }
        }
        debug_assert_eq!(y.len(), n + self.taps - 1);
        y
    }

    /// `S Q Sᴴ` for an `N_T × N_T` matrix `Q`, exploiting the band
    /// structure. The result is exactly Hermitian when `Q` is.
    pub fn sandwich(&self, q: &CMat) -> CMat {
        let n = self.samples.len();
        let nt = self.taps;
        let rows = self.rows();
        assert_eq!((q.nrows(), q.ncols()), (nt, nt), "Q must be N_T x N_T");
        // sq[i][b] = Σ_a S[i,a] Q[a,b], stored row-major
        let mut sq = vec![Complex64::new(0.0, 0.0); rows * nt];
        for b in 0..nt {
            let qcol = q.column(b);
            for a in 0..nt {
                let qab = qcol[a];
                if qab == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (k, s) in self.samples.iter().enumerate() {
                    sq[(a + k) * nt + b] += s * qab;
                }
            }
        }
        let mut out = CMat::zeros(rows, rows);
        for j in 0..rows {
            let b_lo = j.saturating_sub(n - 1);
            let b_hi = j.min(nt - 1);
            for i in j..rows {
                let row = &sq[i * nt..(i + 1) * nt];
                let mut acc = Complex64::new(0.0, 0.0);
                for b in b_lo..=b_hi {
                    acc += row[b] * self.samples[j - b].conj();
                }
                out[(i, j)] = acc;
            }
        }
        for j in 0..rows {
            out[(j, j)].im = 0.0;
            for i in (j + 1)..rows {
                out[(j, i)] = out[(i, j)].conj();
            }
        }
        out
    }
}

/// Convolution matrix of a waveform for `taps` target taps.
pub fn convolution_matrix(s: &Waveform, taps: usize) -> Result<ConvolutionMatrix> {
    ConvolutionMatrix::from_samples(s.samples(), taps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_phase(&[0.0, PI / 2.0]).unwrap().as_slice(), &[0.0, PI / 2.0]);
        assert_eq!(wrap_phase(&[PI]).unwrap().as_slice(), &[-PI]);
        let w = wrap_phase(&[3.0 * PI / 2.0, -3.0 * PI / 2.0, 5.0 * PI]).unwrap();
        let expect = [-PI / 2.0, PI / 2.0, -PI];
        for (g, e) in w.as_slice().iter().zip(expect) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
        }
        assert!(wrap_phase(&[f64::NAN]).is_err());
        assert!(wrap_phase(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn tiny_negative_values_stay_in_range() {
        for v in [-1e-300, -TAU, TAU - 1e-16, -PI - 1e-16, 1e300, -1e300] {
            let w = wrap(v);
            assert!((-PI..PI).contains(&w), "{v} -> {w}");
        }
    }

    #[test]
    fn waveform_examples() {
        let s = Waveform::new(PhaseVector::zeros(4), 0.5).unwrap();
        assert_eq!(s.samples(), &[c(0.5, 0.0); 4]);
        let s = Waveform::new(PhaseVector::wrap(&[0.0, PI / 2.0]).unwrap(), 1.0).unwrap();
        assert!((s.samples()[1] - c(0.0, 1.0)).norm() < 1e-15);
        let s = Waveform::new(PhaseVector::zeros(64), 0.125).unwrap();
        assert!((s.energy() - 1.0).abs() < 1e-12);
        assert!(Waveform::new(PhaseVector::zeros(4), 0.0).is_err());
        assert!(Waveform::new(PhaseVector::zeros(4), -1.0).is_err());
    }

    #[test]
    fn convolution_matrix_examples() {
        let (s1, s2) = (c(1.0, 2.0), c(-0.5, 0.25));
        let m = ConvolutionMatrix::from_samples(&[s1, s2], 2).unwrap().to_matrix();
        let z = c(0.0, 0.0);
        let expect = CMat::from_row_slice(3, 2, &[s1, z, s2, s1, z, s2]);
        assert_eq!(m, expect);

        let one = ConvolutionMatrix::from_samples(&[s1, s2], 1).unwrap().to_matrix();
        assert_eq!(one.as_slice(), &[s1, s2]);
        assert!(ConvolutionMatrix::from_samples(&[s1], 0).is_err());
    }

    #[test]
    fn sandwich_matches_dense_product() {
        let mut rng = crate::rng::stream(3, &[]);
        let s: Vec<Complex64> = (0..7).map(|_| c(rng.random(), rng.random())).collect();
        let b = CMat::from_fn(4, 4, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let q = &b * b.adjoint();
        let conv = ConvolutionMatrix::from_samples(&s, 4).unwrap();
        let sm = conv.to_matrix();
        let dense = &sm * &q * sm.adjoint();
        assert!((conv.sandwich(&q) - dense).norm() < 1e-12);
    }

    fn brute_conv(s: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
        let rows = s.len() + x.len() - 1;
        (0..rows)
            .map(|i| {
                let mut acc = c(0.0, 0.0);
                for (m, sm) in s.iter().enumerate() {
                    if i >= m && i - m < x.len() {
                        acc += sm * x[i - m];
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matrix_product_equals_brute_force_convolution() {
        let mut rng = crate::rng::stream(9, &[]);
        let theta: Vec<f64> = (0..8).map(|_| rng.random_range(-PI..PI)).collect();
        let s = Waveform::new(PhaseVector::wrap(&theta).unwrap(), 0.3).unwrap();
        let x: Vec<Complex64> = (0..3).map(|_| c(rng.random(), rng.random())).collect();
        let conv = convolution_matrix(&s, 3).unwrap();
        let oracle = brute_conv(s.samples(), &x);
        let dense = conv.to_matrix() * crate::linalg::CVec::from_vec(x.clone());
        for ((a, b), d) in conv.apply(&x).iter().zip(&oracle).zip(dense.iter()) {
            assert!((a - b).norm() < 1e-12);
            assert!((d - b).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent_and_periodic(theta in -1e3f64..1e3, k in -50i32..50) {
            let w = wrap(theta);
            prop_assert!((-PI..PI).contains(&w));
            prop_assert_eq!(wrap(w), w);
            let shifted = wrap(theta + TAU * k as f64);
            prop_assert!(phase_difference(shifted, w).abs() < 1e-9);
        }

        #[test]
        fn frobenius_norm_scales_with_taps(
            theta in proptest::collection::vec(-PI..PI, 1..20),
            taps in 1usize..8,
            mag in 0.01f64..3.0,
        ) {
            let s = Waveform::new(PhaseVector::wrap(&theta).unwrap(), mag).unwrap();
            let m = convolution_matrix(&s, taps).unwrap().to_matrix();
            let expect = (taps as f64 * s.energy()).sqrt();
            prop_assert!((m.norm() - expect).abs() <= 1e-12 * expect.max(1.0));
            for v in s.samples() {
                prop_assert!((v.norm() - mag).abs() <= 1e-12 * mag);
            }
        }

        #[test]
        fn apply_equals_convolution(
            re in proptest::collection::vec(-1.0f64..1.0, 1..12),
            xr in proptest::collection::vec(-1.0f64..1.0, 1..6),
        ) {
            let s: Vec<Complex64> = re.iter().map(|&r| c(r, 0.5 * r)).collect();
            let x: Vec<Complex64> = xr.iter().map(|&r| c(-r, r)).collect();
            let conv = ConvolutionMatrix::from_samples(&s, x.len()).unwrap();
            for (a, b) in conv.apply(&x).iter().zip(brute_conv(&s, &x)) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
