//! Optimizers for the scalar (single-input single-output) channel gain of a
//! layered stack in the simplified-model regime.
//!
//! Diagonal phase-shift layers are optimized by an alternating algorithm
//! whose per-layer step is a closed-form global optimum, so the objective
//! trace is monotone by construction. Symmetric-unitary layers admit a
//! closed-form one-layer optimum that attains the product of the squared
//! channel norms exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{norm2, ComplexMatrix};
use crate::model::{LayerArchitecture, SimLayer, SimStack};
use crate::network::PartitionedScattering;
use crate::propagation::RngSeed;
use crate::tolerances;
use rand::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("layer {layer} is {actual}; this optimizer requires {expected}")]
    ArchitectureMismatch {
        layer: usize,
        expected: &'static str,
        actual: &'static str,
    },
    #[error("stack is {m}x{k}; the gain objective is defined for single-antenna links")]
    NotSiso { m: usize, k: usize },
    #[error("stack has coupling or reverse transmission; optimize the simplified model only")]
    NotSimplified,
    #[error("channel vector is identically zero")]
    ZeroChannel,
    #[error("vectors have lengths {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no tunable-impedance count is defined for {arch} with {l} layers")]
    UnsupportedCombination { arch: &'static str, l: usize },
    #[error("invalid optimizer configuration: {message}")]
    InvalidConfig { message: &'static str },
}

/// Starting point for the phase vector of every layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitPolicy {
    /// All phases zero (deterministic regression baseline).
    ZeroPhase,
    /// Independent uniform phases drawn from the given seed.
    UniformRandomPhase(RngSeed),
}

/// Layer visiting order within one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepOrder {
    FirstToLast,
    LastToFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DRisOptimizerConfig {
    /// Maximum number of full sweeps over the layers.
    pub max_sweeps: usize,
    /// Relative objective improvement per sweep below which the algorithm
    /// stops.
    pub rel_tolerance: f64,
    pub init_policy: InitPolicy,
    pub sweep_order: SweepOrder,
}

impl Default for DRisOptimizerConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 200,
            rel_tolerance: tolerances::CONVERGENCE_REL,
            init_policy: InitPolicy::ZeroPhase,
            sweep_order: SweepOrder::FirstToLast,
        }
    }
}

/// Objective values recorded by the iterative optimizer, one per sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub gains: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

impl OptimizationTrace {
    /// Non-decreasing check with the given absolute-relative slack.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.gains
            .windows(2)
            .all(|w| w[1] >= w[0] - slack * w[0].abs().max(1.0))
    }
}

/// The three channel factors of a scalar stack: transmitter-to-first-layer
/// vector, inter-layer matrices, last-layer-to-receiver vector.
#[derive(Debug, Clone)]
pub struct SisoChannels {
    /// Length-N vector into the first layer.
    pub first: Vec<Complex64>,
    /// N x N matrices between consecutive layers (empty for one layer).
    pub inner: Vec<ComplexMatrix>,
    /// Length-N vector out of the last layer.
    pub receiver: Vec<Complex64>,
}

impl SisoChannels {
    /// Extracts the channel factors, requiring a single-antenna,
    /// coupling-free stack.
    pub fn from_stack(stack: &SimStack) -> Result<Self, OptimizeError> {
        let (m, k) = (stack.transmit_antennas(), stack.receive_antennas());
        if m != 1 || k != 1 {
            return Err(OptimizeError::NotSiso { m, k });
        }
        let coupled = stack
            .stages()
            .iter()
            .any(|s| s.worst_forbidden_block().1 > tolerances::STRUCTURAL_ZERO)
            || stack.receiver_stage().h11.max_abs() > tolerances::STRUCTURAL_ZERO;
        if coupled {
            return Err(OptimizeError::NotSimplified);
        }
        let n = stack.elements_per_layer();
        let first = (0..n).map(|i| stack.stages()[0].h21.get(i, 0)).collect();
        let inner = stack.stages()[1..]
            .iter()
            .map(|s| s.h21.clone())
            .collect();
        let receiver = (0..n)
            .map(|j| stack.receiver_stage().h21.get(0, j))
            .collect();
        Ok(Self {
            first,
            inner,
            receiver,
        })
    }

    pub fn elements(&self) -> usize {
        self.first.len()
    }

    pub fn layer_count(&self) -> usize {
        self.inner.len() + 1
    }

    /// Scalar channel for the given per-layer phases, evaluated directly as
    /// the full product chain.
    pub fn channel(&self, phases: &[Vec<f64>]) -> Complex64 {
        assert_eq!(phases.len(), self.layer_count());
        let mut acc = self.first.clone();
        for (i, layer_phases) in phases.iter().enumerate() {
            apply_phases(&mut acc, layer_phases);
            if i < self.inner.len() {
                acc = self.inner[i].mul_vec(&acc);
            }
        }
        self.receiver.iter().zip(&acc).map(|(r, a)| r * a).sum()
    }

    pub fn gain(&self, phases: &[Vec<f64>]) -> f64 {
        self.channel(phases).norm_sqr()
    }

    /// Row and column context of one layer: everything above it and
    /// everything below it in the chain, under the given phases.
    ///
    /// The scalar channel factors as `sum_n u_n exp(j theta_n) v_n` over the
    /// entries of this pair.
    pub fn layer_vectors(
        &self,
        phases: &[Vec<f64>],
        layer: usize,
    ) -> (Vec<Complex64>, Vec<Complex64>) {
        let l = self.layer_count();
        assert!(layer < l);
        let mut v = self.first.clone();
        for (phase_set, inner) in phases[..layer].iter().zip(&self.inner) {
            apply_phases(&mut v, phase_set);
            v = inner.mul_vec(&v);
        }
        let mut u = self.receiver.clone();
        for i in (layer + 1..l).rev() {
            apply_phases(&mut u, &phases[i]);
            u = row_times_matrix(&u, &self.inner[i - 1]);
        }
        (u, v)
    }
}

fn apply_phases(v: &mut [Complex64], phases: &[f64]) {
    for (z, &t) in v.iter_mut().zip(phases) {
        *z *= Complex64::from_polar(1.0, t);
    }
}

fn row_times_matrix(row: &[Complex64], m: &ComplexMatrix) -> Vec<Complex64> {
    assert_eq!(row.len(), m.rows());
    let mut out = vec![Complex64::new(0.0, 0.0); m.cols()];
    for (i, &ri) in row.iter().enumerate() {
        if ri == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o += ri * m.get(i, j);
        }
    }
    out
}

/// Closed-form per-layer phase update: aligns every product term, which is
/// the global optimum of the single-layer subproblem. Terms with a zero
/// product get phase zero by convention.
pub fn dris_layer_update(u: &[Complex64], v: &[Complex64]) -> Vec<f64> {
    assert_eq!(u.len(), v.len());
    u.iter()
        .zip(v)
        .map(|(un, vn)| {
            let product = un * vn;
            if product == Complex64::new(0.0, 0.0) {
                0.0
            } else {
                -product.arg()
            }
        })
        .collect()
}

/// Alternating per-layer optimization of all diagonal phase-shift layers.
///
/// Each sweep visits every layer once and applies [`dris_layer_update`] with
/// the other layers held fixed, so the gain never decreases. Stops when the
/// relative gain improvement of a full sweep drops below the configured
/// tolerance or the sweep budget is exhausted. A single-layer stack is
/// optimal after one sweep and is reported converged immediately.
pub fn dris_optimize(
    stack: &SimStack,
    cfg: &DRisOptimizerConfig,
) -> Result<(SimStack, OptimizationTrace), OptimizeError> {
    if cfg.max_sweeps == 0 {
        return Err(OptimizeError::InvalidConfig {
            message: "max_sweeps must be at least 1",
        });
    }
    if !(cfg.rel_tolerance.is_finite() && cfg.rel_tolerance > 0.0) {
        return Err(OptimizeError::InvalidConfig {
            message: "rel_tolerance must be positive",
        });
    }
    for (idx, layer) in stack.layers().iter().enumerate() {
        if layer.architecture() != LayerArchitecture::DRisTransmissive {
            return Err(OptimizeError::ArchitectureMismatch {
                layer: idx + 1,
                expected: "dris",
                actual: layer.architecture().name(),
            });
        }
    }
    let channels = SisoChannels::from_stack(stack)?;
    let l = channels.layer_count();
    let n = channels.elements();

    let mut phases: Vec<Vec<f64>> = match cfg.init_policy {
        InitPolicy::ZeroPhase => vec![vec![0.0; n]; l],
        InitPolicy::UniformRandomPhase(seed) => {
            let mut rng = seed.rng();
            (0..l)
                .map(|_| {
                    (0..n)
                        .map(|_| rng.gen::<f64>() * std::f64::consts::TAU)
                        .collect()
                })
                .collect()
        }
    };

    let mut gains = Vec::new();
    let mut converged = false;
    for sweep in 1..=cfg.max_sweeps {
        match cfg.sweep_order {
            SweepOrder::FirstToLast => {
                // Row contexts computed once per sweep: updating layer i
                // leaves the context of layers > i untouched.
                let mut contexts: Vec<Vec<Complex64>> = vec![Vec::new(); l];
                contexts[l - 1] = channels.receiver.clone();
                for i in (0..l.saturating_sub(1)).rev() {
                    let mut upper = contexts[i + 1].clone();
                    apply_phases(&mut upper, &phases[i + 1]);
                    contexts[i] = row_times_matrix(&upper, &channels.inner[i]);
                }
                let mut v = channels.first.clone();
                for i in 0..l {
                    phases[i] = dris_layer_update(&contexts[i], &v);
                    if i + 1 < l {
                        apply_phases(&mut v, &phases[i]);
                        v = channels.inner[i].mul_vec(&v);
                    }
                }
            }
            SweepOrder::LastToFirst => {
                let mut columns: Vec<Vec<Complex64>> = vec![Vec::new(); l];
                columns[0] = channels.first.clone();
                for i in 1..l {
                    let mut lower = columns[i - 1].clone();
                    apply_phases(&mut lower, &phases[i - 1]);
                    columns[i] = channels.inner[i - 1].mul_vec(&lower);
                }
                let mut u = channels.receiver.clone();
                for i in (0..l).rev() {
                    phases[i] = dris_layer_update(&u, &columns[i]);
                    if i > 0 {
                        apply_phases(&mut u, &phases[i]);
                        u = row_times_matrix(&u, &channels.inner[i - 1]);
                    }
                }
            }
        }

        let gain = channels.gain(&phases);
        gains.push(gain);
        if l == 1 {
            // One layer: the closed-form update is the global optimum, so no
            // further sweep can improve.
            converged = true;
            break;
        }
        if sweep >= 2 {
            let prev = gains[sweep - 2];
            if gain - prev <= cfg.rel_tolerance * gain.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
    }

    let mut optimized = stack.clone();
    for (i, layer_phases) in phases.into_iter().enumerate() {
        optimized
            .layer_mut(i)
            .set_phases(layer_phases)
            .expect("layers were verified diagonal");
    }
    let trace = OptimizationTrace {
        iterations_used: gains.len(),
        converged,
        gains,
    };
    Ok((optimized, trace))
}

/// Closed-form optimal symmetric-unitary layer for a one-layer link with
/// incoming vector `h_1` and outgoing vector `h_r`.
///
/// Returns a layer whose scattering matrix is symmetric and unitary and whose
/// transmission block maps `h_1 / |h_1|` onto `conj(h_r)^T / |h_r|`, so the
/// realized gain is exactly `|h_r|^2 |h_1|^2`.
pub fn bdris_optimal(h_r: &[Complex64], h_1: &[Complex64]) -> Result<SimLayer, OptimizeError> {
    if h_r.len() != h_1.len() {
        return Err(OptimizeError::LengthMismatch {
            left: h_r.len(),
            right: h_1.len(),
        });
    }
    let norm_r = norm2(h_r);
    let norm_1 = norm2(h_1);
    if norm_r == 0.0 || norm_1 == 0.0 {
        return Err(OptimizeError::ZeroChannel);
    }
    let n = h_1.len();
    let u: Vec<Complex64> = h_1.iter().map(|z| z / norm_1).collect();
    let w: Vec<Complex64> = h_r.iter().map(|z| z.conj() / norm_r).collect();

    let basis_u = unitary_with_first_column(&u);
    let basis_w = unitary_with_first_column(&w);
    let b = basis_w.mul(&basis_u.conjugate_transpose());

    let theta = PartitionedScattering {
        n1: n,
        n2: n,
        s11: ComplexMatrix::zeros(n, n),
        s12: b.transpose(),
        s21: b,
        s22: ComplexMatrix::zeros(n, n),
    };
    Ok(SimLayer::symmetric_unitary(LayerArchitecture::BdRisUnitary, theta)
        .expect("construction yields a symmetric unitary"))
}

/// Unitary matrix whose first column is the given unit vector, built from a
/// single Householder reflector with the sign chosen for stability.
fn unitary_with_first_column(u: &[Complex64]) -> ComplexMatrix {
    let n = u.len();
    if n == 1 {
        return ComplexMatrix::diagonal(&[u[0]]);
    }
    let alpha = if u[0] == Complex64::new(0.0, 0.0) {
        Complex64::new(-1.0, 0.0)
    } else {
        -(u[0] / u[0].norm())
    };
    // v = u - alpha e1; |v|^2 = 2 (1 + |u_0|), never small.
    let mut v = u.to_vec();
    v[0] -= alpha;
    let denom: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    // H = I - 2 v v^H / |v|^2 sends u to alpha e1; H D with D = diag(alpha,
    // 1, ..) therefore sends e1 to u.
    let mut h = ComplexMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        delta - 2.0 / denom * v[i] * v[j].conj()
    });
    for i in 0..n {
        let scaled = h.get(i, 0) * alpha;
        h.set(i, 0, scaled);
    }
    h
}

/// Loose upper bound on the achievable gain of diagonal-layer stacks: the
/// product of squared spectral norms of every channel factor (each layer's
/// transmission has spectral norm one).
pub fn dris_upper_bound(stack: &SimStack) -> Result<f64, OptimizeError> {
    let channels = SisoChannels::from_stack(stack)?;
    let mut bound = norm2(&channels.receiver).powi(2) * norm2(&channels.first).powi(2);
    for inner in &channels.inner {
        bound *= inner.spectral_norm().powi(2);
    }
    Ok(bound)
}

/// Number of tunable impedance components needed to realize the given
/// architecture: `3 N L` for diagonal transmissive layers, `4 N - 1` for a
/// single tree-connected layer.
pub fn circuit_complexity(
    arch: LayerArchitecture,
    n: usize,
    l: usize,
) -> Result<u64, OptimizeError> {
    match arch {
        LayerArchitecture::DRisTransmissive => Ok(3 * n as u64 * l as u64),
        LayerArchitecture::TreeConnected if l == 1 => Ok(4 * n as u64 - 1),
        LayerArchitecture::TreeConnected => Err(OptimizeError::UnsupportedCombination {
            arch: arch.name(),
            l,
        }),
        LayerArchitecture::BdRisUnitary => Err(OptimizeError::UnsupportedCombination {
            arch: arch.name(),
            l,
        }),
    }
}
