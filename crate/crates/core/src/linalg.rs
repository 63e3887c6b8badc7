//! Dense complex linear algebra kernels.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. The Cholesky factorization
//! is implemented here because it is the inner kernel of every objective
//! evaluation; the Hermitian eigen-solver from nalgebra is used only for
//! validation and as an independent cross-check.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Lower-triangular Cholesky factor `L` with `A = L Lᴴ`.
///
/// Stored row-major so that the inner products of the factorization and
/// the forward solve run over contiguous memory.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    rows: Vec<Complex64>,
}

impl Cholesky {
    /// Factorizes the Hermitian part `(A + Aᴴ)/2` of `a`.
    pub fn new(a: &CMat) -> Result<Self> {
        Self::with_context(a, "cholesky")
    }

    pub fn with_context(a: &CMat, context: &'static str) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Validation(format!(
                "cholesky needs a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let mut rows = vec![ZERO; n * n];
        for j in 0..n {
            let (head, tail) = rows.split_at_mut(j * n);
            let row_j = &mut tail[..n];
            // off-diagonal entries of row j, columns k < j
            for k in 0..j {
                let row_k = &head[k * n..k * n + k + 1];
                let a_jk = (a[(j, k)] + a[(k, j)].conj()) * 0.5;
                let mut acc = a_jk;
                for p in 0..k {
                    acc -= row_j[p] * row_k[p].conj();
                }
                row_j[k] = acc / row_k[k].re;
            }
            let mut d = a[(j, j)].re;
            for p in 0..j {
                d -= row_j[p].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { context, pivot: j });
            }
            row_j[j] = Complex64::new(d.sqrt(), 0.0);
        }
        Ok(Self { n, rows })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, k: usize) -> Complex64 {
        self.rows[i * self.n + k]
    }

    /// `log det A = 2 Σ log L_jj`.
    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.n).map(|j| self.at(j, j).re.ln()).sum::<f64>()
    }

    /// Solves `L z = b`.
    pub fn solve_lower(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            let row = &self.rows[i * n..i * n + i];
            let mut acc = z[i];
            for (l, zk) in row.iter().zip(&z[..i]) {
                acc -= l * zk;
            }
            z[i] = acc / self.at(i, i).re;
        }
        z
    }

    /// Solves `Lᴴ x = z` in place.
    fn solve_upper_in_place(&self, z: &mut [Complex64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let xi = z[i] / self.at(i, i).re;
            z[i] = xi;
            let row = &self.rows[i * n..i * n + i];
            for (zk, l) in z[..i].iter_mut().zip(row) {
                *zk -= l.conj() * xi;
            }
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut z = self.solve_lower(b);
        self.solve_upper_in_place(&mut z);
        z
    }

    /// `yᴴ A⁻¹ y = ‖L⁻¹ y‖²`.
    pub fn quad_form(&self, y: &[Complex64]) -> f64 {
        self.solve_lower(y).iter().map(|v| v.norm_sqr()).sum()
    }

    /// Dense `A⁻¹`, exactly Hermitian.
    pub fn inverse(&self) -> CMat {
        let n = self.n;
        let mut inv = CMat::zeros(n, n);
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = ZERO);
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.solve(&e);
            for i in j..n {
                inv[(i, j)] = col[i];
            }
        }
        for j in 0..n {
            inv[(j, j)] = Complex64::new(inv[(j, j)].re, 0.0);
            for i in (j + 1)..n {
                inv[(j, i)] = inv[(i, j)].conj();
            }
        }
        inv
    }

    /// The factor as a dense lower-triangular matrix.
    pub fn factor(&self) -> CMat {
        CMat::from_fn(self.n, self.n, |i, k| if k <= i { self.at(i, k) } else { ZERO })
    }

    /// `L z`.
    pub fn lower_mul(&self, z: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                self.rows[i * n..i * n + i + 1]
                    .iter()
                    .zip(z)
                    .fold(ZERO, |acc, (l, v)| acc + l * v)
            })
            .collect()
    }
}

/// `log det A` for Hermitian positive-definite `A`, in nats.
pub fn logdet_hermitian_pd(a: &CMat) -> Result<f64> {
    Ok(Cholesky::with_context(a, "logdet")?.logdet())
}

/// Real eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let h = hermitian_part(a);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Relative Hermitian deviation `‖A − Aᴴ‖_F / ‖A‖_F` (0 for the zero matrix).
pub fn hermitian_deviation(a: &CMat) -> f64 {
    let norm = a.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (a - a.adjoint()).norm() / norm
}

/// `Re tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..a.ncols() {
            let x = a[(i, j)] * b[(j, i)];
            acc += x.re;
        }
    }
    acc
}

pub fn trace_re(a: &CMat) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

/// Numerically stable `log Σ exp(v_i)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// A square-root factor `F` with `F Fᴴ = A` for Hermitian positive
/// semi-definite `A`. Uses Cholesky when possible and falls back to the
/// eigen-decomposition so that singular (e.g. all-zero) covariances work.
pub fn psd_factor(a: &CMat) -> Result<CMat> {
    if let Ok(ch) = Cholesky::new(a) {
        return Ok(ch.factor());
    }
    let h = hermitian_part(a);
    let scale = h.norm().max(f64::MIN_POSITIVE);
    let eig = h.symmetric_eigen();
    let mut f = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -1e-9 * scale {
            return Err(Error::Model(format!(
                "covariance has negative eigenvalue {lam:e}"
            )));
        }
        let s = Complex64::new(lam.max(0.0).sqrt(), 0.0);
        f.column_mut(j).iter_mut().for_each(|v| *v *= s);
    }
    Ok(f)
}
