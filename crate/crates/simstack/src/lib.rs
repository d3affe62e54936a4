//! Physically consistent simulation and optimization of stacked-metasurface
//! aided wireless channels.
//!
//! The crate is organized around multiport network theory:
//!
//! - [`matrix`] — dense complex linear algebra (LU solves, Hermitian
//!   eigenvalues, spectral norms).
//! - [`network`] — partitioned scattering matrices, exact cascading of
//!   multiport networks and a brute-force wave-equation oracle.
//! - [`model`] — the end-to-end stacked-surface channel: general (coupled)
//!   assembly, matched-termination channel extraction, and the simplified
//!   product-form model valid under unilateral, coupling-free assumptions.
//! - [`propagation`] — physical channel generation: scalar diffraction
//!   between stacked planar arrays and seeded Rayleigh fading.
//! - [`optimize`] — per-layer iterative phase optimization for diagonal
//!   surfaces, the closed-form unitary-surface optimum, gain bounds, and
//!   tunable-impedance complexity counts.
//! - [`harness`] — the sweep runner behind the CLI: experiment configs,
//!   seeded trials, CSV records and summary tables.

pub mod harness;
pub mod matrix;
pub mod model;
pub mod network;
pub mod optimize;
pub mod propagation;
pub mod testing;
pub mod tolerances;
