//! Physical channel generation for the stacked-surface experiments.
//!
//! Layers are uniform planar arrays parallel to the x-y plane, centered on
//! the z axis. Propagation between consecutive planes follows scalar
//! near-field diffraction with an obliquity factor; the final hop to the
//! receiver is i.i.d. Rayleigh fading drawn from a seeded stream.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::ComplexMatrix;
use crate::model::{LayerArchitecture, ModelError, PropagationStage, SimLayer, SimStack};
use crate::network::PartitionedScattering;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("source point {src} and destination point {dst} coincide")]
    CoincidentPoints { src: usize, dst: usize },
    #[error("invalid geometry: {context}")]
    InvalidGeometry { context: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Seed for the experiment PRNG (ChaCha12).
///
/// Streams are split by deriving child seeds through a SplitMix64-style
/// mixer: [`RngSeed::child`] with the trial index yields one independent,
/// reproducible substream per trial, regardless of evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(self.0)
    }

    /// Derives an independent child seed for the given index.
    pub fn child(self, index: u64) -> RngSeed {
        let mut z = self
            .0
            .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

/// Placement of the transmitter and the stacked planar arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimGeometry {
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Elements per row of each array.
    pub nx: usize,
    /// Elements per column of each array.
    pub ny: usize,
    /// Distance between consecutive layers in meters.
    pub layer_spacing: f64,
    /// Distance between adjacent elements in meters.
    pub element_spacing: f64,
    /// Transmit antenna position.
    pub tx_position: [f64; 3],
    /// Distance from the transmitter plane to the first layer in meters.
    pub first_layer_offset: f64,
}

impl SimGeometry {
    pub fn new(
        wavelength: f64,
        nx: usize,
        ny: usize,
        layer_spacing: f64,
        element_spacing: f64,
        tx_position: [f64; 3],
        first_layer_offset: f64,
    ) -> Result<Self, PropagationError> {
        let all_positive = wavelength > 0.0
            && layer_spacing > 0.0
            && element_spacing > 0.0
            && first_layer_offset > 0.0
            && nx >= 1
            && ny >= 1;
        if !all_positive {
            return Err(PropagationError::InvalidGeometry {
                context: "all lengths must be strictly positive and nx, ny at least 1".into(),
            });
        }
        Ok(Self {
            wavelength,
            nx,
            ny,
            layer_spacing,
            element_spacing,
            tx_position,
            first_layer_offset,
        })
    }

    /// Conventional setup: layers one wavelength apart (the first one a
    /// wavelength from the transmitter), elements half a wavelength apart,
    /// transmitter at the origin.
    pub fn standard(wavelength: f64, nx: usize, ny: usize) -> Result<Self, PropagationError> {
        Self::new(
            wavelength,
            nx,
            ny,
            wavelength,
            wavelength / 2.0,
            [0.0, 0.0, 0.0],
            wavelength,
        )
    }

    /// Elements per layer.
    pub fn elements(&self) -> usize {
        self.nx * self.ny
    }

    /// z coordinate of the given 1-based layer.
    pub fn layer_z(&self, layer_index: usize) -> f64 {
        assert!(layer_index >= 1, "layers are 1-based");
        self.tx_position[2] + self.first_layer_offset + (layer_index - 1) as f64 * self.layer_spacing
    }
}

/// Element positions of the 1-based `layer_index`th array: an nx x ny grid
/// centered at (0, 0) in its plane, x varying fastest.
pub fn upa_positions(g: &SimGeometry, layer_index: usize) -> Vec<[f64; 3]> {
    let z = g.layer_z(layer_index);
    let x0 = -0.5 * (g.nx as f64 - 1.0) * g.element_spacing;
    let y0 = -0.5 * (g.ny as f64 - 1.0) * g.element_spacing;
    let mut positions = Vec::with_capacity(g.elements());
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            positions.push([
                x0 + ix as f64 * g.element_spacing,
                y0 + iy as f64 * g.element_spacing,
                z,
            ]);
        }
    }
    positions
}

/// Near-field diffraction channel between two sets of points.
///
/// Entry (i, j) couples source j to destination i:
///
/// ```text
/// (A cos(alpha) / d) * (1 / (2 pi d) - j / lambda) * exp(j 2 pi d / lambda)
/// ```
///
/// with `A = (lambda/2)^2` the element area, `d` the point distance and
/// `alpha` the angle between the plane normal (oriented toward the receiving
/// side) and the propagation direction. Fails if any source/destination pair
/// coincides.
pub fn rs_channel(
    src: &[[f64; 3]],
    dst: &[[f64; 3]],
    wavelength: f64,
) -> Result<ComplexMatrix, PropagationError> {
    let area = (wavelength / 2.0) * (wavelength / 2.0);
    let mut h = ComplexMatrix::zeros(dst.len(), src.len());
    for (j, s) in src.iter().enumerate() {
        for (i, d) in dst.iter().enumerate() {
            let dx = d[0] - s[0];
            let dy = d[1] - s[1];
            let dz = d[2] - s[2];
            let dist = (dx * dx + dy * dy + dz * dz).sqrt();
            if dist == 0.0 {
                return Err(PropagationError::CoincidentPoints { src: j, dst: i });
            }
            let cos_alpha = dz.abs() / dist;
            let radial = Complex64::new(1.0 / (std::f64::consts::TAU * dist), -1.0 / wavelength);
            let phase = Complex64::from_polar(1.0, std::f64::consts::TAU * dist / wavelength);
            let entry = (area * cos_alpha / dist) * radial * phase;
            h.set(i, j, entry);
        }
    }
    Ok(h)
}

/// `k x n` matrix of i.i.d. circularly symmetric complex Gaussian entries
/// with zero mean and unit variance, drawn deterministically from the seed.
pub fn rayleigh_channel(k: usize, n: usize, seed: RngSeed) -> ComplexMatrix {
    let mut rng = seed.rng();
    draw_rayleigh(k, n, &mut rng)
}

fn draw_rayleigh(k: usize, n: usize, rng: &mut ChaCha12Rng) -> ComplexMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(k, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

/// Builds a full experiment stack in the simplified-model regime.
///
/// Stage 1 is the diffraction channel from the transmitter to the first
/// layer, stages 2..L connect consecutive layers, and the receiver stage is
/// Rayleigh fading drawn from the seed (first draw, so the realization is
/// shared by every architecture and layer count at the same seed). Layers
/// start in the pass-through state: zero phases for diagonal layers, the
/// port-exchange scattering matrix otherwise.
pub fn build_stack(
    g: &SimGeometry,
    l: usize,
    k: usize,
    arch: LayerArchitecture,
    seed: RngSeed,
) -> Result<SimStack, PropagationError> {
    if l < 1 {
        return Err(PropagationError::InvalidGeometry {
            context: "at least one layer is required".into(),
        });
    }
    let n = g.elements();
    let mut rng = seed.rng();
    let receiver = PropagationStage::transmission_only(draw_rayleigh(k, n, &mut rng));

    let mut stages = Vec::with_capacity(l);
    let first = rs_channel(&[g.tx_position], &upa_positions(g, 1), g.wavelength)?;
    stages.push(PropagationStage::transmission_only(first));
    for layer_index in 2..=l {
        let h = rs_channel(
            &upa_positions(g, layer_index - 1),
            &upa_positions(g, layer_index),
            g.wavelength,
        )?;
        stages.push(PropagationStage::transmission_only(h));
    }

    let layers: Vec<SimLayer> = (0..l)
        .map(|_| pass_through_layer(arch, n))
        .collect::<Result<_, _>>()?;

    Ok(SimStack::new(1, k, layers, stages, receiver)?)
}

/// Pass-through layer of the given architecture: transmits every port
/// unchanged.
pub fn pass_through_layer(
    arch: LayerArchitecture,
    n: usize,
) -> Result<SimLayer, PropagationError> {
    match arch {
        LayerArchitecture::DRisTransmissive => Ok(SimLayer::dris(vec![0.0; n])),
        LayerArchitecture::BdRisUnitary | LayerArchitecture::TreeConnected => {
            let exchange = PartitionedScattering {
                n1: n,
                n2: n,
                s11: ComplexMatrix::zeros(n, n),
                s12: ComplexMatrix::identity(n),
                s21: ComplexMatrix::identity(n),
                s22: ComplexMatrix::zeros(n, n),
            };
            Ok(SimLayer::symmetric_unitary(arch, exchange)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const C0: f64 = 299_792_458.0;

    fn wavelength_28ghz() -> f64 {
        C0 / 28e9
    }

    #[test]
    fn single_element_sits_on_axis() {
        let g = SimGeometry::standard(wavelength_28ghz(), 1, 1).unwrap();
        let pos = upa_positions(&g, 1);
        assert_eq!(pos.len(), 1);
        assert_eq!(pos[0][0], 0.0);
        assert_eq!(pos[0][1], 0.0);
        assert!((pos[0][2] - g.wavelength).abs() < 1e-15);
    }

    #[test]
    fn two_element_row_is_centered() {
        let lambda = wavelength_28ghz();
        let g = SimGeometry::standard(lambda, 2, 1).unwrap();
        let pos = upa_positions(&g, 1);
        assert_eq!(pos.len(), 2);
        assert!((pos[0][0] + lambda / 4.0).abs() < 1e-15);
        assert!((pos[1][0] - lambda / 4.0).abs() < 1e-15);
    }

    #[test]
    fn grid_min_pairwise_distance_is_element_spacing() {
        let lambda = wavelength_28ghz();
        let g = SimGeometry::standard(lambda, 4, 4).unwrap();
        let pos = upa_positions(&g, 1);
        assert_eq!(pos.len(), 16);
        let mut min_dist = f64::INFINITY;
        for a in 0..pos.len() {
            for b in (a + 1)..pos.len() {
                let d = (0..3)
                    .map(|c| (pos[a][c] - pos[b][c]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                min_dist = min_dist.min(d);
            }
        }
        assert!((min_dist - lambda / 2.0).abs() < 1e-12);
    }

    #[test]
    fn layer_offsets_step_by_layer_spacing() {
        let lambda = wavelength_28ghz();
        let g = SimGeometry::standard(lambda, 4, 2).unwrap();
        for idx in 1..=3 {
            assert!((g.layer_z(idx) - idx as f64 * lambda).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_on_axis_at_one_wavelength() {
        // d = lambda, normal incidence: the wavelength cancels and the entry
        // is 1/(8 pi) - j/4 up to the rounding of exp(j 2 pi).
        let lambda = wavelength_28ghz();
        let h = rs_channel(&[[0.0, 0.0, 0.0]], &[[0.0, 0.0, lambda]], lambda).unwrap();
        let expected = Complex64::new(1.0 / (8.0 * std::f64::consts::PI), -0.25);
        assert!((h.get(0, 0) - expected).norm() < 1e-12);
    }

    #[test]
    fn kernel_vanishes_in_the_source_plane() {
        let lambda = wavelength_28ghz();
        let h = rs_channel(&[[0.0, 0.0, 0.0]], &[[lambda, 0.0, 0.0]], lambda).unwrap();
        assert_eq!(h.get(0, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn kernel_rejects_coincident_points() {
        let lambda = wavelength_28ghz();
        let p = [[0.1, -0.2, 0.3]];
        assert!(matches!(
            rs_channel(&p, &p, lambda),
            Err(PropagationError::CoincidentPoints { src: 0, dst: 0 })
        ));
    }

    #[test]
    fn parallel_plane_channels_are_reciprocal() {
        let lambda = wavelength_28ghz();
        let g = SimGeometry::standard(lambda, 3, 2).unwrap();
        let a = upa_positions(&g, 1);
        let b = upa_positions(&g, 2);
        let forward = rs_channel(&a, &b, lambda).unwrap();
        let backward = rs_channel(&b, &a, lambda).unwrap();
        assert!(forward.max_abs_diff(&backward.transpose()) < 1e-12);
    }

    #[test]
    fn kernel_magnitude_decays_beyond_one_wavelength() {
        let lambda = wavelength_28ghz();
        let src = [[0.0, 0.0, 0.0]];
        let transverse = 0.7 * lambda;
        let mut last = f64::INFINITY;
        for step in 1..=12 {
            let z = lambda * step as f64 * 0.5 + lambda;
            let h = rs_channel(&src, &[[transverse, 0.0, z]], lambda).unwrap();
            let mag = h.get(0, 0).norm();
            assert!(mag < last, "kernel must decay with separation (z={z})");
            last = mag;
        }
    }

    #[test]
    fn interlayer_channel_norm_is_sub_unit_at_28ghz() {
        let lambda = wavelength_28ghz();
        let g = SimGeometry::standard(lambda, 4, 4).unwrap();
        let h = rs_channel(&upa_positions(&g, 1), &upa_positions(&g, 2), lambda).unwrap();
        let norm = h.spectral_norm();
        assert!(norm < 1.0, "spectral norm {norm} must stay below one");
        assert!(norm > 0.0);
    }

    #[test]
    fn rayleigh_is_seed_deterministic() {
        let a = rayleigh_channel(2, 5, RngSeed(99));
        let b = rayleigh_channel(2, 5, RngSeed(99));
        assert_eq!(a, b);
        let c = rayleigh_channel(2, 5, RngSeed(100));
        assert!(a.max_abs_diff(&c) > 0.0);
        let row = rayleigh_channel(1, 16, RngSeed(7));
        assert_eq!((row.rows(), row.cols()), (1, 16));
    }

    #[test]
    fn rayleigh_power_is_unit_on_average() {
        let draws = rayleigh_channel(100, 1000, RngSeed(12345));
        let mean_power: f64 = draws
            .entries()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            / (100.0 * 1000.0);
        assert!(
            (mean_power - 1.0).abs() < 0.02,
            "mean |entry|^2 = {mean_power}"
        );
    }

    #[test]
    fn child_seeds_do_not_collide_trivially() {
        let base = RngSeed(42);
        let c0 = base.child(0);
        let c1 = base.child(1);
        assert_ne!(c0, c1);
        assert_ne!(c0, base);
        // Same derivation twice is stable.
        assert_eq!(base.child(7), base.child(7));
    }

    #[test]
    fn built_stack_has_expected_shape() {
        let lambda = wavelength_28ghz();
        let g = SimGeometry::standard(lambda, 4, 4).unwrap();
        let stack = build_stack(&g, 1, 1, LayerArchitecture::DRisTransmissive, RngSeed(1)).unwrap();
        assert_eq!(stack.transmit_antennas(), 1);
        assert_eq!(stack.receive_antennas(), 1);
        assert_eq!(stack.elements_per_layer(), 16);
        assert_eq!(stack.layer_count(), 1);
        assert_eq!(stack.stages()[0].n_in(), 1);
        assert_eq!(stack.receiver_stage().n_out(), 1);
    }

    #[test]
    fn different_seeds_share_deterministic_geometry() {
        let lambda = wavelength_28ghz();
        let g = SimGeometry::standard(lambda, 2, 2).unwrap();
        let a = build_stack(&g, 3, 1, LayerArchitecture::DRisTransmissive, RngSeed(5)).unwrap();
        let b = build_stack(&g, 3, 1, LayerArchitecture::DRisTransmissive, RngSeed(6)).unwrap();
        for (sa, sb) in a.stages().iter().zip(b.stages()) {
            assert_eq!(sa.h21, sb.h21, "diffraction stages are seed-independent");
        }
        assert!(
            a.receiver_stage().h21.max_abs_diff(&b.receiver_stage().h21) > 0.0,
            "fading must differ across seeds"
        );
    }

    #[test]
    fn pass_through_layers_validate() {
        for arch in [
            LayerArchitecture::DRisTransmissive,
            LayerArchitecture::BdRisUnitary,
            LayerArchitecture::TreeConnected,
        ] {
            let layer = pass_through_layer(arch, 4).unwrap();
            assert!(crate::model::validate_layer(&layer).is_valid());
        }
    }
}
