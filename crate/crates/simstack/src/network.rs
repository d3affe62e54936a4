//! Partitioned scattering matrices and exact multiport cascading.
//!
//! A network with `n1 + n2` ports is described by the 2x2 block partition of
//! its scattering matrix. Connecting the trailing `n2` ports of one network to
//! the leading ports of another composes their scattering descriptions; the
//! closed-form block expressions live in [`cascade`], and
//! [`solve_waves_oracle`] re-derives the same composition from the raw wave
//! equations as an independent cross-check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{solve, ComplexMatrix, LuFactors, MatrixError};
use crate::tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("inner interconnection loop is numerically singular (rcond {rcond:.3e}); the connection is resonant or non-physical")]
    SingularInnerLoop { rcond: f64 },
    #[error("stacked wave system is rank-deficient")]
    SingularSystem,
    #[error("impedance at port {port} equals the negated reference impedance")]
    DegenerateImpedance { port: usize },
}

/// Complex square scattering matrix with an (n1, n2) port split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPartitioned")]
pub struct PartitionedScattering {
    pub n1: usize,
    pub n2: usize,
    pub s11: ComplexMatrix,
    pub s12: ComplexMatrix,
    pub s21: ComplexMatrix,
    pub s22: ComplexMatrix,
}

#[derive(Deserialize)]
struct RawPartitioned {
    n1: usize,
    n2: usize,
    s11: ComplexMatrix,
    s12: ComplexMatrix,
    s21: ComplexMatrix,
    s22: ComplexMatrix,
}

impl TryFrom<RawPartitioned> for PartitionedScattering {
    type Error = NetworkError;

    fn try_from(raw: RawPartitioned) -> Result<Self, NetworkError> {
        let parsed = PartitionedScattering::new(raw.s11, raw.s12, raw.s21, raw.s22)?;
        if parsed.n1 != raw.n1 || parsed.n2 != raw.n2 {
            return Err(NetworkError::DimensionMismatch {
                context: format!(
                    "declared split ({}, {}) does not match block shapes ({}, {})",
                    raw.n1, raw.n2, parsed.n1, parsed.n2
                ),
            });
        }
        Ok(parsed)
    }
}

impl PartitionedScattering {
    /// Builds a partitioned scattering matrix, validating block shapes.
    pub fn new(
        s11: ComplexMatrix,
        s12: ComplexMatrix,
        s21: ComplexMatrix,
        s22: ComplexMatrix,
    ) -> Result<Self, NetworkError> {
        let n1 = s11.rows();
        let n2 = s22.rows();
        let ok = s11.cols() == n1
            && s12.rows() == n1
            && s12.cols() == n2
            && s21.rows() == n2
            && s21.cols() == n1
            && s22.cols() == n2;
        if !ok {
            return Err(NetworkError::DimensionMismatch {
                context: format!(
                    "blocks {}x{}, {}x{}, {}x{}, {}x{} are not a consistent (n1={n1}, n2={n2}) partition",
                    s11.rows(), s11.cols(), s12.rows(), s12.cols(),
                    s21.rows(), s21.cols(), s22.rows(), s22.cols()
                ),
            });
        }
        Ok(Self { n1, n2, s11, s12, s21, s22 })
    }

    /// Splits a full `(n1+n2) x (n1+n2)` scattering matrix into blocks.
    pub fn from_full(full: &ComplexMatrix, n1: usize, n2: usize) -> Result<Self, NetworkError> {
        if full.rows() != n1 + n2 || full.cols() != n1 + n2 {
            return Err(NetworkError::DimensionMismatch {
                context: format!(
                    "full matrix is {}x{}, expected {}x{}",
                    full.rows(),
                    full.cols(),
                    n1 + n2,
                    n1 + n2
                ),
            });
        }
        Ok(Self {
            n1,
            n2,
            s11: full.block(0, 0, n1, n1),
            s12: full.block(0, n1, n1, n2),
            s21: full.block(n1, 0, n2, n1),
            s22: full.block(n1, n1, n2, n2),
        })
    }

    /// Reassembles the full scattering matrix.
    pub fn to_full(&self) -> ComplexMatrix {
        let n = self.n1 + self.n2;
        let mut full = ComplexMatrix::zeros(n, n);
        full.set_block(0, 0, &self.s11);
        full.set_block(0, self.n1, &self.s12);
        full.set_block(self.n1, 0, &self.s21);
        full.set_block(self.n1, self.n1, &self.s22);
        full
    }

    /// Ideal through-line: n matched pairs wired straight across.
    /// Cascading with it leaves any compatible network unchanged.
    pub fn ideal_through(n: usize) -> Self {
        Self {
            n1: n,
            n2: n,
            s11: ComplexMatrix::zeros(n, n),
            s12: ComplexMatrix::identity(n),
            s21: ComplexMatrix::identity(n),
            s22: ComplexMatrix::zeros(n, n),
        }
    }

    /// Reciprocal check: the full matrix equals its transpose.
    pub fn is_reciprocal(&self, tol: Option<f64>) -> bool {
        let tol = tol.unwrap_or(tolerances::EQUALITY);
        let full = self.to_full();
        full.max_abs_diff(&full.transpose()) <= tol
    }

    /// Lossless check: the full matrix is unitary.
    pub fn is_lossless(&self, tol: Option<f64>) -> bool {
        let tol = tol.unwrap_or(tolerances::EQUALITY);
        let full = self.to_full();
        let gram = full.conjugate_transpose().mul(&full);
        gram.max_abs_diff(&ComplexMatrix::identity(full.rows())) <= tol
    }
}

/// Composes two partitioned networks by connecting the trailing `p.n2` ports
/// of `p` to the leading ports of `q`.
///
/// The result has `n1 = p.n1` and `n2 = q.n2`. Fails when the partitions are
/// incompatible or the interconnection loop matrix `I - Q11 P22` is
/// numerically singular.
pub fn cascade(
    p: &PartitionedScattering,
    q: &PartitionedScattering,
) -> Result<PartitionedScattering, NetworkError> {
    if p.n2 != q.n1 {
        return Err(NetworkError::DimensionMismatch {
            context: format!(
                "cannot connect {} trailing ports to {} leading ports",
                p.n2, q.n1
            ),
        });
    }
    let n2 = p.n2;
    let eye = ComplexMatrix::identity(n2);

    // I - Q11 P22 and I - P22 Q11 share the condition of the inner loop.
    let loop_a = eye.sub(&q.s11.mul(&p.s22));
    let loop_b = eye.sub(&p.s22.mul(&q.s11));
    let lu_a = LuFactors::factor(&loop_a).map_err(singular_loop)?;
    let lu_b = LuFactors::factor(&loop_b).map_err(singular_loop)?;

    let a_q11_p21 = lu_a.solve(&q.s11.mul(&p.s21));
    let a_q12 = lu_a.solve(&q.s12);
    let b_p21 = lu_b.solve(&p.s21);
    let b_p22_q12 = lu_b.solve(&p.s22.mul(&q.s12));

    let r11 = p.s11.add(&p.s12.mul(&a_q11_p21));
    let r12 = p.s12.mul(&a_q12);
    let r21 = q.s21.mul(&b_p21);
    let r22 = q.s22.add(&q.s21.mul(&b_p22_q12));

    PartitionedScattering::new(r11, r12, r21, r22)
}

fn singular_loop(err: MatrixError) -> NetworkError {
    match err {
        MatrixError::Singular { rcond } => NetworkError::SingularInnerLoop { rcond },
        other => NetworkError::DimensionMismatch {
            context: other.to_string(),
        },
    }
}

/// Brute-force composition oracle.
///
/// Stacks the raw wave variables of both networks into one linear system and
/// solves it column-by-column under unit excitations, reading the composed
/// scattering matrix off the solution. Shares no code path with [`cascade`];
/// the two must agree to solver accuracy.
pub fn solve_waves_oracle(
    p: &PartitionedScattering,
    q: &PartitionedScattering,
) -> Result<PartitionedScattering, NetworkError> {
    if p.n2 != q.n1 {
        return Err(NetworkError::DimensionMismatch {
            context: format!(
                "cannot connect {} trailing ports to {} leading ports",
                p.n2, q.n1
            ),
        });
    }
    let (n1, n2, n3) = (p.n1, p.n2, q.n2);
    let dim = n1 + 2 * n2 + n3;
    // Unknowns x = [b1; a2; b2; a3] with excitation (a1, b3):
    //   b1           = P11 a1 + P12 a2
    //   b2           = P21 a1 + P22 a2
    //   a2           = Q11 b2 + Q12 b3
    //   a3           = Q21 b2 + Q22 b3
    let mut sys = ComplexMatrix::zeros(dim, dim);
    let (ofs_b1, ofs_a2, ofs_b2, ofs_a3) = (0, n1, n1 + n2, n1 + 2 * n2);

    for i in 0..n1 {
        sys.set(i, ofs_b1 + i, Complex64::new(1.0, 0.0));
        for j in 0..n2 {
            sys.set(i, ofs_a2 + j, -p.s12.get(i, j));
        }
    }
    for i in 0..n2 {
        let row = n1 + i;
        sys.set(row, ofs_b2 + i, Complex64::new(1.0, 0.0));
        for j in 0..n2 {
            sys.set(row, ofs_a2 + j, -p.s22.get(i, j));
        }
    }
    for i in 0..n2 {
        let row = n1 + n2 + i;
        sys.set(row, ofs_a2 + i, Complex64::new(1.0, 0.0));
        for j in 0..n2 {
            sys.set(row, ofs_b2 + j, -q.s11.get(i, j));
        }
    }
    for i in 0..n3 {
        let row = n1 + 2 * n2 + i;
        sys.set(row, ofs_a3 + i, Complex64::new(1.0, 0.0));
        for j in 0..n2 {
            sys.set(row, ofs_b2 + j, -q.s21.get(i, j));
        }
    }

    // Right-hand sides: one column per unit excitation, a1 first then b3.
    let mut rhs = ComplexMatrix::zeros(dim, n1 + n3);
    for col in 0..n1 {
        for i in 0..n1 {
            rhs.set(i, col, p.s11.get(i, col));
        }
        for i in 0..n2 {
            rhs.set(n1 + i, col, p.s21.get(i, col));
        }
    }
    for col in 0..n3 {
        for i in 0..n2 {
            rhs.set(n1 + n2 + i, n1 + col, q.s12.get(i, col));
        }
        for i in 0..n3 {
            rhs.set(n1 + 2 * n2 + i, n1 + col, q.s22.get(i, col));
        }
    }

    let sol = solve(&sys, &rhs).map_err(|_| NetworkError::SingularSystem)?;

    let r11 = sol.block(ofs_b1, 0, n1, n1);
    let r12 = sol.block(ofs_b1, n1, n1, n3);
    let r21 = sol.block(ofs_a3, 0, n3, n1);
    let r22 = sol.block(ofs_a3, n1, n3, n3);
    PartitionedScattering::new(r11, r12, r21, r22)
}

/// Complex port terminations referenced to a common real impedance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminationSpec {
    /// Per-port impedances in ohms.
    pub impedances: Vec<Complex64>,
    /// Reference impedance in ohms, conventionally 50.
    pub reference_impedance: f64,
}

impl TerminationSpec {
    pub fn new(impedances: Vec<Complex64>, reference_impedance: f64) -> Self {
        assert!(
            reference_impedance > 0.0,
            "reference impedance must be positive"
        );
        Self {
            impedances,
            reference_impedance,
        }
    }

    /// All ports terminated with the reference impedance itself.
    pub fn matched(ports: usize, reference_impedance: f64) -> Self {
        Self::new(
            vec![Complex64::new(reference_impedance, 0.0); ports],
            reference_impedance,
        )
    }
}

/// Diagonal matrix of reflection coefficients `(Z_i - Z0) / (Z_i + Z0)`.
pub fn reflection_coefficients(t: &TerminationSpec) -> Result<ComplexMatrix, NetworkError> {
    let z0 = Complex64::new(t.reference_impedance, 0.0);
    let mut diag = Vec::with_capacity(t.impedances.len());
    for (port, &z) in t.impedances.iter().enumerate() {
        let denom = z + z0;
        if denom.norm() <= t.reference_impedance * 1e-12 {
            return Err(NetworkError::DegenerateImpedance { port });
        }
        diag.push((z - z0) / denom);
    }
    Ok(ComplexMatrix::diagonal(&diag))
}

/// Wave launched by sources with reflection coefficients `gamma_t`:
/// `(I - Gamma) v / 2`.
pub fn source_wave(gamma_t: &ComplexMatrix, v_s: &[Complex64]) -> Result<Vec<Complex64>, NetworkError> {
    if !gamma_t.is_square() || gamma_t.rows() != v_s.len() {
        return Err(NetworkError::DimensionMismatch {
            context: format!(
                "gamma is {}x{} but the source vector has {} entries",
                gamma_t.rows(),
                gamma_t.cols(),
                v_s.len()
            ),
        });
    }
    let reflected = gamma_t.mul_vec(v_s);
    Ok(v_s
        .iter()
        .zip(&reflected)
        .map(|(v, r)| (v - r) / 2.0)
        .collect())
}

/// Largest singular value; see [`ComplexMatrix::spectral_norm`].
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    m.spectral_norm()
}
