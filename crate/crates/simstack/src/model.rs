//! End-to-end channel model for a stack of reconfigurable transmissive
//! surfaces between a transmitter and a receiver.
//!
//! Two routes to the channel matrix exist side by side:
//!
//! - [`assemble_general`] + [`extract_channel`] — exact composition of every
//!   block (including coupling and reverse transmission) followed by
//!   matched-termination extraction.
//! - [`simplified_channel`] — the product form valid when every stage is
//!   unilateral and coupling-free.
//!
//! Under the simplifying assumptions both routes must agree entrywise; the
//! test suite checks this equivalence on random stacks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{solve, ComplexMatrix};
use crate::network::{cascade, NetworkError, PartitionedScattering};
use crate::tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("singular inner loop while composing {at} (rcond {rcond:.3e})")]
    SingularInnerLoop { at: CascadePoint, rcond: f64 },
    #[error("channel extraction failed: I + S11 is numerically singular")]
    SingularExtraction,
    #[error("{stage}: {block} must vanish in the simplified model (max |entry| = {max_abs:.3e})")]
    AssumptionViolated {
        stage: StagePosition,
        block: &'static str,
        max_abs: f64,
    },
    #[error("channel is {rows}x{cols}, expected a 1x1 scalar")]
    NotScalar { rows: usize, cols: usize },
    #[error("inconsistent stack dimensions: {context}")]
    DimensionMismatch { context: String },
    #[error("layer violates its architecture constraint: {context}")]
    InvalidLayer { context: String },
    #[error("layer is {actual}, expected {expected}")]
    ArchitectureMismatch {
        expected: &'static str,
        actual: &'static str,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Which cascade step failed during assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadePoint {
    /// 1-based block index within the stack.
    Block(usize),
    /// The terminal cascade with the receiver-side channel.
    Receiver,
}

impl std::fmt::Display for CascadePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CascadePoint::Block(i) => write!(f, "block {i}"),
            CascadePoint::Receiver => write!(f, "receiver cascade"),
        }
    }
}

/// Which propagation stage violated a simplified-model assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StagePosition {
    /// 1-based stage index (stage 1 feeds the first layer).
    Stage(usize),
    Receiver,
}

impl std::fmt::Display for StagePosition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StagePosition::Stage(i) => write!(f, "stage {i}"),
            StagePosition::Receiver => write!(f, "receiver stage"),
        }
    }
}

/// Reconfigurable-surface architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerArchitecture {
    /// Conventional transmissive surface: diagonal unit-modulus phase shifts.
    #[serde(rename = "dris")]
    DRisTransmissive,
    /// Fully reconfigurable surface constrained only to a symmetric unitary
    /// scattering matrix.
    #[serde(rename = "bdris")]
    BdRisUnitary,
    /// Tree-connected circuit topology; same scattering constraint as
    /// [`LayerArchitecture::BdRisUnitary`], fewer tunable impedances.
    #[serde(rename = "bdris-tree")]
    TreeConnected,
}

impl LayerArchitecture {
    pub fn name(self) -> &'static str {
        match self {
            LayerArchitecture::DRisTransmissive => "dris",
            LayerArchitecture::BdRisUnitary => "bdris",
            LayerArchitecture::TreeConnected => "bdris-tree",
        }
    }
}

impl std::fmt::Display for LayerArchitecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LayerArchitecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "dris" | "d-ris" => Ok(LayerArchitecture::DRisTransmissive),
            "bdris" | "bd-ris" => Ok(LayerArchitecture::BdRisUnitary),
            "bdris-tree" | "tree" | "tree-connected" => Ok(LayerArchitecture::TreeConnected),
            other => Err(format!(
                "unknown architecture '{other}' (expected dris, bdris or bdris-tree)"
            )),
        }
    }
}

/// One reconfigurable layer: its 2N-port scattering response plus, for
/// diagonal layers, the phase vector it was generated from.
///
/// The scattering matrix is the single source of truth during channel
/// assembly; phases are regenerated into it on every mutation so the two can
/// never drift apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayer")]
pub struct SimLayer {
    n: usize,
    architecture: LayerArchitecture,
    theta: PartitionedScattering,
    phases: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawLayer {
    n: usize,
    architecture: LayerArchitecture,
    theta: PartitionedScattering,
    phases: Option<Vec<f64>>,
}

impl TryFrom<RawLayer> for SimLayer {
    type Error = ModelError;

    fn try_from(raw: RawLayer) -> Result<Self, ModelError> {
        if raw.theta.n1 != raw.n || raw.theta.n2 != raw.n {
            return Err(ModelError::DimensionMismatch {
                context: format!(
                    "layer scattering is ({}, {}) for element count {}",
                    raw.theta.n1, raw.theta.n2, raw.n
                ),
            });
        }
        if let Some(p) = &raw.phases {
            if p.len() != raw.n {
                return Err(ModelError::DimensionMismatch {
                    context: format!("{} phases for {} elements", p.len(), raw.n),
                });
            }
        }
        Ok(SimLayer {
            n: raw.n,
            architecture: raw.architecture,
            theta: raw.theta,
            phases: raw.phases,
        })
    }
}

impl SimLayer {
    /// Diagonal transmissive layer from per-element phase shifts.
    pub fn dris(phases: Vec<f64>) -> Self {
        let theta = transmissive_scattering(&phases);
        Self {
            n: phases.len(),
            architecture: LayerArchitecture::DRisTransmissive,
            theta,
            phases: Some(phases),
        }
    }

    /// Layer with an arbitrary symmetric unitary scattering matrix.
    ///
    /// The constraint is checked up front; use [`validate_layer`] for a
    /// detailed report.
    pub fn symmetric_unitary(
        architecture: LayerArchitecture,
        theta: PartitionedScattering,
    ) -> Result<Self, ModelError> {
        if architecture == LayerArchitecture::DRisTransmissive {
            return Err(ModelError::ArchitectureMismatch {
                expected: "bdris or bdris-tree",
                actual: "dris",
            });
        }
        if theta.n1 != theta.n2 {
            return Err(ModelError::DimensionMismatch {
                context: format!("layer partition ({}, {}) is not square", theta.n1, theta.n2),
            });
        }
        let layer = Self {
            n: theta.n1,
            architecture,
            theta,
            phases: None,
        };
        let report = validate_layer(&layer);
        if let Some(worst) = report.violations.first() {
            return Err(ModelError::InvalidLayer {
                context: worst.to_string(),
            });
        }
        Ok(layer)
    }

    /// Builds a layer without checking architectural constraints. Intended
    /// for tests of [`validate_layer`] and for deserialized snapshots.
    pub fn from_parts(
        architecture: LayerArchitecture,
        theta: PartitionedScattering,
        phases: Option<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        RawLayer {
            n: theta.n1,
            architecture,
            theta,
            phases,
        }
        .try_into()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn architecture(&self) -> LayerArchitecture {
        self.architecture
    }

    pub fn theta(&self) -> &PartitionedScattering {
        &self.theta
    }

    /// The acting transmission block of the layer.
    pub fn transmission(&self) -> &ComplexMatrix {
        &self.theta.s21
    }

    pub fn phases(&self) -> Option<&[f64]> {
        self.phases.as_deref()
    }

    /// Replaces the phase shifts of a diagonal layer, regenerating its
    /// scattering matrix.
    pub fn set_phases(&mut self, phases: Vec<f64>) -> Result<(), ModelError> {
        if self.architecture != LayerArchitecture::DRisTransmissive {
            return Err(ModelError::ArchitectureMismatch {
                expected: "dris",
                actual: self.architecture.name(),
            });
        }
        if phases.len() != self.n {
            return Err(ModelError::DimensionMismatch {
                context: format!("{} phases for {} elements", phases.len(), self.n),
            });
        }
        self.theta = transmissive_scattering(&phases);
        self.phases = Some(phases);
        Ok(())
    }
}

/// Scattering matrix of a lossless transmissive phase-shift surface:
/// zero reflection blocks, identical diagonal transmission both ways.
fn transmissive_scattering(phases: &[f64]) -> PartitionedScattering {
    let n = phases.len();
    let diag: Vec<Complex64> = phases.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
    let d = ComplexMatrix::diagonal(&diag);
    PartitionedScattering {
        n1: n,
        n2: n,
        s11: ComplexMatrix::zeros(n, n),
        s12: d.clone(),
        s21: d,
        s22: ComplexMatrix::zeros(n, n),
    }
}

/// A single violated layer constraint and how badly it is violated.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerViolation {
    pub constraint: &'static str,
    pub deviation: f64,
}

impl std::fmt::Display for LayerViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (deviation {:.3e})", self.constraint, self.deviation)
    }
}

/// Result of checking a layer against its architecture's constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerReport {
    pub violations: Vec<LayerViolation>,
}

impl LayerReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn check(&mut self, constraint: &'static str, deviation: f64, tol: f64) {
        if deviation > tol {
            self.violations.push(LayerViolation { constraint, deviation });
        }
    }
}

/// Checks the architectural constraints of a layer and reports every
/// violation with its maximum deviation. An empty report means valid.
pub fn validate_layer(layer: &SimLayer) -> LayerReport {
    let mut report = LayerReport::default();
    let theta = &layer.theta;
    match layer.architecture {
        LayerArchitecture::DRisTransmissive => {
            report.check(
                "reflection block (1,1) must be zero",
                theta.s11.max_abs(),
                tolerances::STRUCTURAL_ZERO,
            );
            report.check(
                "reflection block (2,2) must be zero",
                theta.s22.max_abs(),
                tolerances::STRUCTURAL_ZERO,
            );
            report.check(
                "transmission blocks must be equal",
                theta.s12.max_abs_diff(&theta.s21),
                tolerances::STRUCTURAL_ZERO,
            );
            let n = layer.n;
            let mut off_diag = 0.0_f64;
            let mut modulus_dev = 0.0_f64;
            for i in 0..n {
                for j in 0..n {
                    let z = theta.s21.get(i, j);
                    if i == j {
                        modulus_dev = modulus_dev.max((z.norm() - 1.0).abs());
                    } else {
                        off_diag = off_diag.max(z.norm());
                    }
                }
            }
            report.check(
                "transmission must be diagonal",
                off_diag,
                tolerances::STRUCTURAL_ZERO,
            );
            report.check(
                "diagonal entries must have unit modulus",
                modulus_dev,
                tolerances::UNIT_MODULUS,
            );
        }
        LayerArchitecture::BdRisUnitary | LayerArchitecture::TreeConnected => {
            let full = theta.to_full();
            report.check(
                "scattering matrix must be symmetric",
                full.max_abs_diff(&full.transpose()),
                tolerances::EQUALITY,
            );
            let gram = full.conjugate_transpose().mul(&full);
            report.check(
                "scattering matrix must be unitary",
                gram.max_abs_diff(&ComplexMatrix::identity(full.rows())),
                tolerances::EQUALITY,
            );
        }
    }
    report
}

/// Transmission-only channel between consecutive planes, with optional
/// coupling blocks for the general model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStage")]
pub struct PropagationStage {
    /// Forward transmission, destination x source.
    pub h21: ComplexMatrix,
    /// Coupling among the source-side ports.
    pub h11: ComplexMatrix,
    /// Coupling among the destination-side ports.
    pub h22: ComplexMatrix,
    /// Reverse transmission, source x destination.
    pub h12: ComplexMatrix,
}

#[derive(Deserialize)]
struct RawStage {
    h21: ComplexMatrix,
    h11: ComplexMatrix,
    h22: ComplexMatrix,
    h12: ComplexMatrix,
}

impl TryFrom<RawStage> for PropagationStage {
    type Error = ModelError;

    fn try_from(raw: RawStage) -> Result<Self, ModelError> {
        PropagationStage::with_coupling(raw.h21, raw.h11, raw.h22, raw.h12)
    }
}

impl PropagationStage {
    /// Stage with zero coupling and zero reverse transmission.
    pub fn transmission_only(h21: ComplexMatrix) -> Self {
        let (n_out, n_in) = (h21.rows(), h21.cols());
        Self {
            h21,
            h11: ComplexMatrix::zeros(n_in, n_in),
            h22: ComplexMatrix::zeros(n_out, n_out),
            h12: ComplexMatrix::zeros(n_in, n_out),
        }
    }

    pub fn with_coupling(
        h21: ComplexMatrix,
        h11: ComplexMatrix,
        h22: ComplexMatrix,
        h12: ComplexMatrix,
    ) -> Result<Self, ModelError> {
        let (n_out, n_in) = (h21.rows(), h21.cols());
        let ok = h11.rows() == n_in
            && h11.cols() == n_in
            && h22.rows() == n_out
            && h22.cols() == n_out
            && h12.rows() == n_in
            && h12.cols() == n_out;
        if !ok {
            return Err(ModelError::DimensionMismatch {
                context: format!("coupling blocks inconsistent with {n_in}->{n_out} transmission"),
            });
        }
        Ok(Self { h21, h11, h22, h12 })
    }

    pub fn n_in(&self) -> usize {
        self.h21.cols()
    }

    pub fn n_out(&self) -> usize {
        self.h21.rows()
    }

    /// Largest entry across the blocks that must vanish in the simplified
    /// model, tagged with the offending block name.
    pub fn worst_forbidden_block(&self) -> (&'static str, f64) {
        let candidates = [
            ("source-side coupling block", self.h11.max_abs()),
            ("destination-side coupling block", self.h22.max_abs()),
            ("reverse transmission block", self.h12.max_abs()),
        ];
        candidates
            .into_iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
    }

    /// View of the stage as a partitioned scattering matrix with the source
    /// ports leading.
    pub fn as_scattering(&self) -> PartitionedScattering {
        PartitionedScattering {
            n1: self.n_in(),
            n2: self.n_out(),
            s11: self.h11.clone(),
            s12: self.h12.clone(),
            s21: self.h21.clone(),
            s22: self.h22.clone(),
        }
    }
}

/// A full transmitter-side stack: L reconfigurable layers interleaved with
/// propagation stages, plus the stage from the last layer to the receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStack")]
pub struct SimStack {
    m: usize,
    k: usize,
    layers: Vec<SimLayer>,
    stages: Vec<PropagationStage>,
    receiver_stage: PropagationStage,
}

#[derive(Deserialize)]
struct RawStack {
    m: usize,
    k: usize,
    layers: Vec<SimLayer>,
    stages: Vec<PropagationStage>,
    receiver_stage: PropagationStage,
}

impl TryFrom<RawStack> for SimStack {
    type Error = ModelError;

    fn try_from(raw: RawStack) -> Result<Self, ModelError> {
        SimStack::new(raw.m, raw.k, raw.layers, raw.stages, raw.receiver_stage)
    }
}

impl SimStack {
    /// Validates the stage/layer dimension chain:
    /// stage 1 is M->N, stages 2..L are N->N, the receiver stage is N->K.
    pub fn new(
        m: usize,
        k: usize,
        layers: Vec<SimLayer>,
        stages: Vec<PropagationStage>,
        receiver_stage: PropagationStage,
    ) -> Result<Self, ModelError> {
        if layers.is_empty() || layers.len() != stages.len() {
            return Err(ModelError::DimensionMismatch {
                context: format!(
                    "{} layers and {} stages (need one stage per layer, at least one)",
                    layers.len(),
                    stages.len()
                ),
            });
        }
        let n = layers[0].n();
        if stages[0].n_in() != m {
            return Err(ModelError::DimensionMismatch {
                context: format!(
                    "stage 1 accepts {} ports but the transmitter has {m} antennas",
                    stages[0].n_in()
                ),
            });
        }
        for (idx, (stage, layer)) in stages.iter().zip(&layers).enumerate() {
            if layer.n() != n {
                return Err(ModelError::DimensionMismatch {
                    context: format!(
                        "layer {} has {} elements, expected {n}",
                        idx + 1,
                        layer.n()
                    ),
                });
            }
            if stage.n_out() != n || (idx > 0 && stage.n_in() != n) {
                return Err(ModelError::DimensionMismatch {
                    context: format!("stage {} is {}->{}, expected ->{n}", idx + 1, stage.n_in(), stage.n_out()),
                });
            }
        }
        if receiver_stage.n_in() != n || receiver_stage.n_out() != k {
            return Err(ModelError::DimensionMismatch {
                context: format!(
                    "receiver stage is {}->{}, expected {n}->{k}",
                    receiver_stage.n_in(),
                    receiver_stage.n_out()
                ),
            });
        }
        Ok(Self {
            m,
            k,
            layers,
            stages,
            receiver_stage,
        })
    }

    pub fn transmit_antennas(&self) -> usize {
        self.m
    }

    pub fn receive_antennas(&self) -> usize {
        self.k
    }

    /// Elements per layer.
    pub fn elements_per_layer(&self) -> usize {
        self.layers[0].n()
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[SimLayer] {
        &self.layers
    }

    pub fn layer_mut(&mut self, index: usize) -> &mut SimLayer {
        &mut self.layers[index]
    }

    pub fn stages(&self) -> &[PropagationStage] {
        &self.stages
    }

    pub fn receiver_stage(&self) -> &PropagationStage {
        &self.receiver_stage
    }

    pub fn set_receiver_stage(&mut self, stage: PropagationStage) -> Result<(), ModelError> {
        let n = self.elements_per_layer();
        if stage.n_in() != n || stage.n_out() != self.k {
            return Err(ModelError::DimensionMismatch {
                context: format!(
                    "receiver stage is {}->{}, expected {n}->{}",
                    stage.n_in(),
                    stage.n_out(),
                    self.k
                ),
            });
        }
        self.receiver_stage = stage;
        Ok(())
    }

    /// Serializes the stack to a JSON snapshot (complex numbers as
    /// `[re, im]` pairs, matrices row-major).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stack serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}

/// Scattering matrix of one stack block: the propagation stage feeding a
/// layer, composed with the layer itself.
pub fn block_scattering(
    stage: &PropagationStage,
    layer: &SimLayer,
) -> Result<PartitionedScattering, ModelError> {
    // Standalone composition is "block 1"; assembly re-indexes the error.
    cascade(&stage.as_scattering(), layer.theta())
        .map_err(|e| network_at(e, CascadePoint::Block(1)))
}

/// Composes the whole stack into one partitioned scattering matrix with the
/// transmitter ports leading and the receiver ports trailing.
pub fn assemble_general(stack: &SimStack) -> Result<PartitionedScattering, ModelError> {
    let mut acc: Option<PartitionedScattering> = None;
    for (idx, (stage, layer)) in stack.stages().iter().zip(stack.layers()).enumerate() {
        let block = block_scattering(stage, layer).map_err(|e| at_block(e, idx + 1))?;
        acc = Some(match acc {
            None => block,
            Some(prev) => {
                cascade(&prev, &block).map_err(|e| network_at(e, CascadePoint::Block(idx + 1)))?
            }
        });
    }
    let chain = acc.expect("stack has at least one block");
    cascade(&chain, &stack.receiver_stage().as_scattering())
        .map_err(|e| network_at(e, CascadePoint::Receiver))
}

fn at_block(err: ModelError, index: usize) -> ModelError {
    match err {
        ModelError::SingularInnerLoop { rcond, .. } => ModelError::SingularInnerLoop {
            at: CascadePoint::Block(index),
            rcond,
        },
        other => other,
    }
}

fn network_at(err: NetworkError, at: CascadePoint) -> ModelError {
    match err {
        NetworkError::SingularInnerLoop { rcond } => ModelError::SingularInnerLoop { at, rcond },
        other => ModelError::Network(other),
    }
}

/// Channel matrix under matched terminations on both sides:
/// `H = S21 (I + S11)^-1`, mapping transmitter voltages to receiver voltages.
pub fn extract_channel(s: &PartitionedScattering) -> Result<ComplexMatrix, ModelError> {
    let eye = ComplexMatrix::identity(s.n1);
    let denom = eye.add(&s.s11);
    // H = S21 X with X = (I + S11)^-1, computed through one transposed solve.
    let xt = solve(&denom.transpose(), &s.s21.transpose())
        .map_err(|_| ModelError::SingularExtraction)?;
    Ok(xt.transpose())
}

/// Product-form channel valid when every stage is unilateral and
/// coupling-free: the receiver transmission times each layer transmission
/// times each stage transmission, in stack order.
pub fn simplified_channel(stack: &SimStack) -> Result<ComplexMatrix, ModelError> {
    for (idx, stage) in stack.stages().iter().enumerate() {
        let (block, max_abs) = stage.worst_forbidden_block();
        if max_abs > tolerances::STRUCTURAL_ZERO {
            return Err(ModelError::AssumptionViolated {
                stage: StagePosition::Stage(idx + 1),
                block,
                max_abs,
            });
        }
    }
    let receiver_coupling = stack.receiver_stage().h11.max_abs();
    if receiver_coupling > tolerances::STRUCTURAL_ZERO {
        return Err(ModelError::AssumptionViolated {
            stage: StagePosition::Receiver,
            block: "source-side coupling block",
            max_abs: receiver_coupling,
        });
    }

    let mut acc: Option<ComplexMatrix> = None;
    for (stage, layer) in stack.stages().iter().zip(stack.layers()) {
        let through = match acc {
            None => stage.h21.clone(),
            Some(prev) => stage.h21.mul(&prev),
        };
        acc = Some(layer.transmission().mul(&through));
    }
    Ok(stack.receiver_stage().h21.mul(&acc.expect("at least one block")))
}

/// Squared magnitude of a scalar (single-input single-output) channel.
pub fn channel_gain(h: &ComplexMatrix) -> Result<f64, ModelError> {
    if h.rows() != 1 || h.cols() != 1 {
        return Err(ModelError::NotScalar {
            rows: h.rows(),
            cols: h.cols(),
        });
    }
    Ok(h.get(0, 0).norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{
        random_coupling_free_stack, random_general_stack, random_symmetric_unitary,
        random_unit_vector, seeded_rng, solve_chain_oracle,
    };
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn transmissive_block_with_clean_stage_collapses() {
        let mut rng = seeded_rng(11);
        let n = 4;
        let phases: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect();
        let layer = SimLayer::dris(phases);
        let h21 = ComplexMatrix::from_fn(n, n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let stage = PropagationStage::transmission_only(h21.clone());
        let s = block_scattering(&stage, &layer).unwrap();
        assert!(s.s11.max_abs() < 1e-15);
        assert!(s.s12.max_abs() < 1e-15);
        assert!(s.s21.max_abs_diff(&layer.transmission().mul(&h21)) < 1e-14);
        assert!(s.s22.max_abs() < 1e-15);
    }

    #[test]
    fn identity_phase_identity_stage_is_transparent() {
        let n = 3;
        let layer = SimLayer::dris(vec![0.0; n]);
        let stage = PropagationStage::transmission_only(ComplexMatrix::identity(n));
        let s = block_scattering(&stage, &layer).unwrap();
        assert!(s.s21.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-15);
    }

    #[test]
    fn block_with_coupling_matches_wave_oracle() {
        let mut rng = seeded_rng(12);
        let n = 3;
        let stack = random_general_stack(&mut rng, 1, 1, n, 1);
        let stage = &stack.stages()[0];
        let layer = &stack.layers()[0];
        let s = block_scattering(stage, layer).unwrap();
        let oracle = solve_chain_oracle(&[stage.as_scattering(), layer.theta().clone()]);
        assert!(s.to_full().max_abs_diff(&oracle.to_full()) < 1e-10);
    }

    #[test]
    fn general_assembly_matches_global_wave_oracle() {
        let mut rng = seeded_rng(13);
        for _ in 0..10 {
            let stack = random_general_stack(&mut rng, 2, 2, 3, 2);
            let assembled = assemble_general(&stack).unwrap();
            let mut chain: Vec<PartitionedScattering> = Vec::new();
            for (stage, layer) in stack.stages().iter().zip(stack.layers()) {
                chain.push(stage.as_scattering());
                chain.push(layer.theta().clone());
            }
            chain.push(stack.receiver_stage().as_scattering());
            let oracle = solve_chain_oracle(&chain);
            assert!(
                assembled.to_full().max_abs_diff(&oracle.to_full()) < 1e-9,
                "general assembly disagrees with the stacked wave solve"
            );
        }
    }

    #[test]
    fn transparent_stack_gives_identity_channel() {
        let n = 3;
        let layers = vec![SimLayer::dris(vec![0.0; n]), SimLayer::dris(vec![0.0; n])];
        let stages = vec![
            PropagationStage::transmission_only(ComplexMatrix::identity(n)),
            PropagationStage::transmission_only(ComplexMatrix::identity(n)),
        ];
        let receiver = PropagationStage::transmission_only(ComplexMatrix::identity(n));
        let stack = SimStack::new(n, n, layers, stages, receiver).unwrap();
        let s = assemble_general(&stack).unwrap();
        assert!(s.s21.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-14);
        let h = extract_channel(&s).unwrap();
        assert!(h.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-14);
        let h_simple = simplified_channel(&stack).unwrap();
        assert!(h_simple.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-14);
    }

    #[test]
    fn single_layer_channel_is_the_three_factor_product() {
        let mut rng = seeded_rng(14);
        let stack = random_coupling_free_stack(&mut rng, 1, 1, 5, 1);
        let expected = stack
            .receiver_stage()
            .h21
            .mul(&stack.layers()[0].transmission().mul(&stack.stages()[0].h21));
        let s = assemble_general(&stack).unwrap();
        assert!(s.s21.max_abs_diff(&expected) < 1e-13);
        let h = simplified_channel(&stack).unwrap();
        assert!(h.max_abs_diff(&expected) < 1e-13);
    }

    #[test]
    fn extraction_matches_direct_wave_solve() {
        let mut rng = seeded_rng(15);
        for _ in 0..20 {
            let stack = random_general_stack(&mut rng, 2, 3, 4, 2);
            let s = assemble_general(&stack).unwrap();
            let h = extract_channel(&s).unwrap();
            // Matched sources: a_T = v_s / 2, b_T = S11 a_T, v_T = a_T + b_T,
            // v_R = b_R = S21 a_T. The extracted H must map v_T to v_R.
            let v_s = random_unit_vector(&mut rng, stack.transmit_antennas());
            let a_t: Vec<Complex64> = v_s.iter().map(|z| z / 2.0).collect();
            let b_t = s.s11.mul_vec(&a_t);
            let v_t: Vec<Complex64> = a_t.iter().zip(&b_t).map(|(a, b)| a + b).collect();
            let v_r = s.s21.mul_vec(&a_t);
            let h_v_t = h.mul_vec(&v_t);
            let err: f64 = h_v_t
                .iter()
                .zip(&v_r)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-11, "extraction disagrees with wave solve: {err}");
        }
    }

    #[test]
    fn extraction_trivial_cases() {
        let mut rng = seeded_rng(16);
        let s21 = ComplexMatrix::from_fn(2, 2, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        // No back-reflection: H = S21.
        let s = PartitionedScattering::new(
            ComplexMatrix::zeros(2, 2),
            ComplexMatrix::zeros(2, 2),
            s21.clone(),
            ComplexMatrix::zeros(2, 2),
        )
        .unwrap();
        let h = extract_channel(&s).unwrap();
        assert!(h.max_abs_diff(&s21) < 1e-15);

        // Full in-phase reflection: H = S21 / 2.
        let s = PartitionedScattering::new(
            ComplexMatrix::identity(2),
            ComplexMatrix::zeros(2, 2),
            s21.clone(),
            ComplexMatrix::zeros(2, 2),
        )
        .unwrap();
        let h = extract_channel(&s).unwrap();
        assert!(h.max_abs_diff(&s21.scale(c(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn reduction_equality_on_random_stacks() {
        let mut rng = seeded_rng(17);
        for _ in 0..25 {
            let n = rng.gen_range(2..=8);
            let l = rng.gen_range(1..=4);
            let stack = random_coupling_free_stack(&mut rng, 1, 1, n, l);
            let general = extract_channel(&assemble_general(&stack).unwrap()).unwrap();
            let simple = simplified_channel(&stack).unwrap();
            assert!(
                general.max_abs_diff(&simple) < 1e-10,
                "reduction mismatch at n={n} l={l}"
            );
        }
    }

    #[test]
    fn simplified_channel_rejects_coupled_stages() {
        let mut rng = seeded_rng(18);
        let stack = random_general_stack(&mut rng, 1, 1, 3, 2);
        match simplified_channel(&stack) {
            Err(ModelError::AssumptionViolated { stage, .. }) => {
                assert_eq!(stage, StagePosition::Stage(1));
            }
            other => panic!("expected assumption violation, got {other:?}"),
        }
    }

    #[test]
    fn layer_order_matters() {
        let mut rng = seeded_rng(19);
        let mut stack = random_coupling_free_stack(&mut rng, 1, 1, 6, 2);
        let h_forward = simplified_channel(&stack).unwrap();
        // Swap the two layers; generic random layers do not commute.
        let l0 = stack.layers()[0].clone();
        let l1 = stack.layers()[1].clone();
        *stack.layer_mut(0) = l1;
        *stack.layer_mut(1) = l0;
        let h_swapped = simplified_channel(&stack).unwrap();
        let scale = h_forward.max_abs().max(h_swapped.max_abs());
        assert!(
            h_forward.max_abs_diff(&h_swapped) > 1e-6 * scale,
            "permuting distinct layers should change the channel"
        );
    }

    #[test]
    fn unitary_layer_preserves_wave_power() {
        let mut rng = seeded_rng(20);
        let n = 5;
        let theta = random_symmetric_unitary(&mut rng, 2 * n);
        let layer = SimLayer::symmetric_unitary(
            LayerArchitecture::BdRisUnitary,
            PartitionedScattering::from_full(&theta, n, n).unwrap(),
        )
        .unwrap();
        for _ in 0..10 {
            let x = random_unit_vector(&mut rng, 2 * n);
            let y = layer.theta().to_full().mul_vec(&x);
            let norm_in = crate::matrix::norm2(&x);
            let norm_out = crate::matrix::norm2(&y);
            assert!((norm_in - norm_out).abs() < 1e-10);
        }
    }

    #[test]
    fn channel_gain_matches_arithmetic() {
        let h = ComplexMatrix::new(1, 1, vec![c(1.0, 1.0)]).unwrap();
        assert!((channel_gain(&h).unwrap() - 2.0).abs() < 1e-15);
        let zero = ComplexMatrix::zeros(1, 1);
        assert_eq!(channel_gain(&zero).unwrap(), 0.0);
        let wide = ComplexMatrix::zeros(1, 2);
        assert!(matches!(
            channel_gain(&wide),
            Err(ModelError::NotScalar { rows: 1, cols: 2 })
        ));
    }

    #[test]
    fn validate_layer_reports_violations() {
        let layer = SimLayer::dris(vec![0.3, -1.2, 2.7]);
        assert!(validate_layer(&layer).is_valid());

        // Corrupt one diagonal entry to modulus 0.5.
        let mut theta = layer.theta().clone();
        theta.s21.set(1, 1, c(0.5, 0.0));
        theta.s12.set(1, 1, c(0.5, 0.0));
        let bad = SimLayer::from_parts(
            LayerArchitecture::DRisTransmissive,
            theta,
            None,
        )
        .unwrap();
        let report = validate_layer(&bad);
        assert!(!report.is_valid());
        let modulus = report
            .violations
            .iter()
            .find(|v| v.constraint.contains("unit modulus"))
            .expect("unit-modulus violation reported");
        assert!((modulus.deviation - 0.5).abs() < 1e-12);
    }

    #[test]
    fn validate_layer_accepts_random_symmetric_unitary() {
        let mut rng = seeded_rng(21);
        for n in [1usize, 2, 5] {
            let theta = random_symmetric_unitary(&mut rng, 2 * n);
            let layer = SimLayer::from_parts(
                LayerArchitecture::BdRisUnitary,
                PartitionedScattering::from_full(&theta, n, n).unwrap(),
                None,
            )
            .unwrap();
            assert!(validate_layer(&layer).is_valid(), "n={n}");
        }
    }

    #[test]
    fn stack_json_round_trip() {
        let mut rng = seeded_rng(22);
        let stack = random_coupling_free_stack(&mut rng, 1, 1, 3, 2);
        let json = stack.to_json();
        let back = SimStack::from_json(&json).unwrap();
        assert_eq!(stack, back);
    }

    #[test]
    fn stack_rejects_broken_dimension_chain() {
        let n = 3;
        let layers = vec![SimLayer::dris(vec![0.0; n])];
        let stages = vec![PropagationStage::transmission_only(ComplexMatrix::zeros(n, 2))];
        let receiver = PropagationStage::transmission_only(ComplexMatrix::zeros(1, n));
        // Stage expects 2 transmit antennas; we claim 1.
        assert!(matches!(
            SimStack::new(1, 1, layers, stages, receiver),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn association_order_of_assembly_is_irrelevant() {
        let mut rng = seeded_rng(23);
        let stack = random_general_stack(&mut rng, 2, 2, 3, 3);
        let folded = assemble_general(&stack).unwrap();

        // Right-associated composition of the same blocks.
        let mut blocks: Vec<PartitionedScattering> = stack
            .stages()
            .iter()
            .zip(stack.layers())
            .map(|(stage, layer)| block_scattering(stage, layer).unwrap())
            .collect();
        blocks.push(stack.receiver_stage().as_scattering());
        let mut acc = blocks.pop().unwrap();
        while let Some(prev) = blocks.pop() {
            acc = crate::network::cascade(&prev, &acc).unwrap();
        }
        assert!(folded.to_full().max_abs_diff(&acc.to_full()) < 1e-9);
    }
}
