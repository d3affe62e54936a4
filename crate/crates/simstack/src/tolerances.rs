//! Centralized numeric tolerances shared by runtime checks and tests.
//!
//! Keeping these in one place means a property test and the runtime check it
//! guards can never drift apart.

/// Default tolerance for entrywise matrix equality checks.
pub const EQUALITY: f64 = 1e-10;

/// Reciprocal-condition estimate below which an inner-loop matrix is
/// declared numerically singular (a resonant or non-physical interconnection).
pub const RCOND_MIN: f64 = 1e-12;

/// Maximum deviation from unit modulus for transmissive phase-shift entries.
pub const UNIT_MODULUS: f64 = 1e-12;

/// Relative accuracy target for spectral-norm computation.
pub const SPECTRAL_NORM_REL: f64 = 1e-10;

/// Relative stagnation threshold for power iteration.
pub const POWER_ITER_REL: f64 = 1e-12;

/// Entries with magnitude below this count as structural zeros when testing
/// model assumptions (distinguishes true zeros from numerical noise).
pub const STRUCTURAL_ZERO: f64 = 1e-12;

/// Default relative objective-improvement threshold for iterative optimizers.
///
/// Sized so the per-layer alternating optimizer settles well inside its
/// 200-sweep budget across the whole default sweep (measured worst case is
/// about 130 sweeps at 64 elements and 4 layers; much tighter thresholds push
/// the slow coordinate-ascent tail past any reasonable budget for a gain of
/// a few percent).
pub const CONVERGENCE_REL: f64 = 3e-4;

/// Slack allowed when asserting monotone non-decreasing optimizer traces.
pub const MONOTONE_SLACK: f64 = 1e-12;
