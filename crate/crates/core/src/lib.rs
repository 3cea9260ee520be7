//! Key-rate analysis for QKD post-processing that keeps every pulse.
//!
//! Bob assigns random bits to no-clicks and double clicks, so the detection
//! efficiency no longer selects which pulses enter the key, and then
//! distills key from the single clicks alone with extra privacy
//! amplification. This crate provides:
//!
//! * [`numerics`]: binary entropy, a checked [`Probability`] and bisection.
//! * [`rates`]: closed-form key rates for single photon, decoy-state
//!   coherent and memory-heralded coherent sources.
//! * [`threshold`]: the tolerable detection error as a function of
//!   transmittance.
//! * [`sim`]: a seeded Monte Carlo model of the two-detector receiver,
//!   including the extreme time-shift and strong pulse attacks.

pub mod numerics;
pub mod rates;
pub mod sim;
pub mod threshold;

pub use numerics::{binary_entropy, find_root_bisect, NumericError, Probability};
pub use rates::{key_rate, DetectionStats, KeyRateBreakdown, RateError, SourceModel, SystemParams};
pub use sim::{run_trials, AdversaryStrategy, SimError, TrialBatch};
pub use threshold::{solve_threshold_ed, sweep_curve, CurveFamily, GridSpec, ThresholdCurve};
