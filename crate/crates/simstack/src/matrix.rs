//! Dense complex matrices and the small linear-algebra kernel used everywhere
//! else: multiplication, LU solves with partial pivoting, Hermitian
//! eigenvalues (cyclic Jacobi) and spectral norms.
//!
//! Matrices are stored row-major. Sizes in this crate are small (a few
//! hundred ports at most), so plain dense algorithms are a better fit than an
//! external solver.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tolerances;

/// Errors from low-level matrix computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix is numerically singular (reciprocal condition estimate {rcond:.3e})")]
    Singular { rcond: f64 },
    #[error("matrix {rows}x{cols} is not {expected}")]
    BadShape {
        rows: usize,
        cols: usize,
        expected: &'static str,
    },
    #[error("entry ({row},{col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("entry count {len} does not match {rows}x{cols}")]
    BadLength { len: usize, rows: usize, cols: usize },
}

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

/// Untyped form used to re-validate invariants on deserialization.
#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl TryFrom<RawMatrix> for ComplexMatrix {
    type Error = MatrixError;

    fn try_from(raw: RawMatrix) -> Result<Self, MatrixError> {
        ComplexMatrix::new(raw.rows, raw.cols, raw.entries)
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self, MatrixError> {
        if entries.len() != rows * cols {
            return Err(MatrixError::BadLength {
                len: entries.len(),
                rows,
                cols,
            });
        }
        let m = Self { rows, cols, entries };
        m.check_finite()?;
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &z) in diag.iter().enumerate() {
            m.set(i, i, z);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.entries[i * self.cols + j] = value;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    fn check_finite(&self) -> Result<(), MatrixError> {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = self.get(i, j);
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(MatrixError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn conjugate_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|a| a * factor).collect(),
        }
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "inner dimensions must agree: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + aik * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        if self.cols == 0 {
            return vec![Complex64::new(0.0, 0.0); self.rows];
        }
        self.entries
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest magnitude of an entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Writes `other` into the block with top-left corner (`row`, `col`).
    pub fn set_block(&mut self, row: usize, col: usize, other: &Self) {
        assert!(row + other.rows <= self.rows && col + other.cols <= self.cols);
        for i in 0..other.rows {
            for j in 0..other.cols {
                self.set(row + i, col + j, other.get(i, j));
            }
        }
    }

    /// Extracts the `rows` x `cols` block with top-left corner (`row`, `col`).
    pub fn block(&self, row: usize, col: usize, rows: usize, cols: usize) -> Self {
        assert!(row + rows <= self.rows && col + cols <= self.cols);
        Self::from_fn(rows, cols, |i, j| self.get(row + i, col + j))
    }

    /// Largest singular value.
    ///
    /// Uses a Jacobi eigendecomposition of the Gram matrix when the smaller
    /// dimension is at most 64, and power iteration on the Gram operator
    /// (stagnation threshold [`tolerances::POWER_ITER_REL`]) beyond that.
    pub fn spectral_norm(&self) -> f64 {
        if self.frobenius_norm() == 0.0 {
            return 0.0;
        }
        let (gram, n) = self.gram_smaller();
        if n <= 64 {
            let eigs = hermitian_eigenvalues(&gram);
            eigs.last().copied().unwrap_or(0.0).max(0.0).sqrt()
        } else {
            self.spectral_norm_power_iteration()
        }
    }

    /// Gram matrix over the smaller dimension: `A^H A` if cols <= rows,
    /// otherwise `A A^H`. Both share the nonzero singular values of `A`.
    fn gram_smaller(&self) -> (ComplexMatrix, usize) {
        if self.cols <= self.rows {
            let ah = self.conjugate_transpose();
            (ah.mul(self), self.cols)
        } else {
            let ah = self.conjugate_transpose();
            (self.mul(&ah), self.rows)
        }
    }

    fn spectral_norm_power_iteration(&self) -> f64 {
        let (gram, n) = self.gram_smaller();
        // Deterministic start with broad support over all coordinates.
        let mut v: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 0.7 * i as f64 + 0.3))
            .collect();
        normalize(&mut v);
        let mut lambda = 0.0_f64;
        for _ in 0..100_000 {
            let w = gram.mul_vec(&v);
            let new_lambda = v
                .iter()
                .zip(&w)
                .map(|(vi, wi)| (vi.conj() * wi).re)
                .sum::<f64>();
            let wnorm = norm2(&w);
            if wnorm == 0.0 {
                return 0.0;
            }
            v = w;
            normalize(&mut v);
            if (new_lambda - lambda).abs() <= tolerances::POWER_ITER_REL * new_lambda.abs() {
                return new_lambda.max(0.0).sqrt();
            }
            lambda = new_lambda;
        }
        lambda.max(0.0).sqrt()
    }
}

/// Euclidean norm of a complex vector.
pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [Complex64]) {
    let n = norm2(v);
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// Cyclic Jacobi with complex plane rotations; each rotation factors the
/// off-diagonal phase out and applies a real 2x2 rotation. Quadratic
/// convergence makes a handful of sweeps enough at these sizes.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Vec<f64> {
    assert!(a.is_square(), "eigenvalues of a non-square matrix");
    let n = a.rows();
    let mut m = a.clone();
    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    let stop = (1e-15 * scale) * (1e-15 * scale);

    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.get(p, q).norm_sqr();
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let phase = apq / r;
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Plane rotation V: V[p][p]=c, V[p][q]=s, V[q][p]=-s*conj(phase),
                // V[q][q]=c*conj(phase); apply m <- V^H m V.
                let vqp = -s * phase.conj();
                let vqq = c * phase.conj();
                for i in 0..n {
                    let aip = m.get(i, p);
                    let aiq = m.get(i, q);
                    m.set(i, p, c * aip + vqp * aiq);
                    m.set(i, q, s * aip + vqq * aiq);
                }
                for j in 0..n {
                    let apj = m.get(p, j);
                    let aqj = m.get(q, j);
                    m.set(p, j, c * apj + vqp.conj() * aqj);
                    m.set(q, j, s * apj + vqq.conj() * aqj);
                }
                // Pin the pair to exactly Hermitian to stop rounding drift.
                let zero = Complex64::new(0.0, 0.0);
                m.set(p, q, zero);
                m.set(q, p, zero);
            }
        }
    }

    let mut eigs: Vec<f64> = (0..n).map(|i| m.get(i, i).re).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

/// LU factorization with partial pivoting.
///
/// Declares the matrix singular when a pivot vanishes or the cheap
/// reciprocal-condition estimate `min|u_kk| / max|u_kk|` drops below
/// [`tolerances::RCOND_MIN`].
pub struct LuFactors {
    lu: ComplexMatrix,
    pivots: Vec<usize>,
    pub rcond_estimate: f64,
}

impl LuFactors {
    pub fn factor(a: &ComplexMatrix) -> Result<Self, MatrixError> {
        if !a.is_square() {
            return Err(MatrixError::BadShape {
                rows: a.rows(),
                cols: a.cols(),
                expected: "square",
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut pivots = Vec::with_capacity(n);

        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_mag = lu.get(k, k).norm();
            for i in (k + 1)..n {
                let mag = lu.get(i, k).norm();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = i;
                }
            }
            if pivot_mag == 0.0 {
                return Err(MatrixError::Singular { rcond: 0.0 });
            }
            if pivot_row != k {
                for j in 0..n {
                    let tmp = lu.get(k, j);
                    lu.set(k, j, lu.get(pivot_row, j));
                    lu.set(pivot_row, j, tmp);
                }
            }
            pivots.push(pivot_row);
            let pivot = lu.get(k, k);
            for i in (k + 1)..n {
                let factor = lu.get(i, k) / pivot;
                lu.set(i, k, factor);
                if factor != Complex64::new(0.0, 0.0) {
                    for j in (k + 1)..n {
                        let v = lu.get(i, j) - factor * lu.get(k, j);
                        lu.set(i, j, v);
                    }
                }
            }
        }

        let mut umin = f64::INFINITY;
        let mut umax = 0.0_f64;
        for k in 0..n {
            let mag = lu.get(k, k).norm();
            umin = umin.min(mag);
            umax = umax.max(mag);
        }
        let rcond_estimate = if umax > 0.0 { umin / umax } else { 0.0 };
        if rcond_estimate < tolerances::RCOND_MIN {
            return Err(MatrixError::Singular {
                rcond: rcond_estimate,
            });
        }
        Ok(Self {
            lu,
            pivots,
            rcond_estimate,
        })
    }

    /// Solves `A X = B` for a matrix right-hand side.
    pub fn solve(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n, "right-hand side height must match");
        let mut x = b.clone();
        // Apply row exchanges.
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                for j in 0..x.cols() {
                    let tmp = x.get(k, j);
                    x.set(k, j, x.get(p, j));
                    x.set(p, j, tmp);
                }
            }
        }
        // Forward substitution with unit lower triangle.
        for k in 0..n {
            for i in (k + 1)..n {
                let factor = self.lu.get(i, k);
                if factor != Complex64::new(0.0, 0.0) {
                    for j in 0..x.cols() {
                        let v = x.get(i, j) - factor * x.get(k, j);
                        x.set(i, j, v);
                    }
                }
            }
        }
        // Back substitution.
        for k in (0..n).rev() {
            let diag = self.lu.get(k, k);
            for j in 0..x.cols() {
                x.set(k, j, x.get(k, j) / diag);
            }
            for i in 0..k {
                let factor = self.lu.get(i, k);
                if factor != Complex64::new(0.0, 0.0) {
                    for j in 0..x.cols() {
                        let v = x.get(i, j) - factor * x.get(k, j);
                        x.set(i, j, v);
                    }
                }
            }
        }
        x
    }
}

/// Convenience wrapper: solve `A X = B`.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, MatrixError> {
    Ok(LuFactors::factor(a)?.solve(b))
}
