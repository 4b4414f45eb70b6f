//! Exact simulation of a family of feed-forward quantum filters built from
//! multiphoton Hong-Ou-Mandel interference.
//!
//! A two-mode input state passes a weakly reflecting tapping beam splitter.
//! The reflected sample interferes on a balanced (polarizing) beam splitter and
//! is counted by two photon-number-resolving detectors. The detector outcome
//! `(S, Δ)` heralds a conditional transmitted state, and an analysis box opens a
//! shutter when that state satisfies a filtering condition `C(S_t, |Δ_t|)`.
//!
//! Modules:
//! - [`numerics`]: exact alternating binomial sums and log-factorials.
//! - [`fock`]: sparse two-mode pure and mixed states.
//! - [`interference`]: balanced beam splitter on Fock states, HOM distributions.
//! - [`filter`]: heralded conditional states, Kraus action, shutter probability.
//! - [`detectors`]: imperfect-detection models, mixed filtered states, purity.
//! - [`condition`]: expression language for filtering conditions.
//! - [`oracle`]: brute-force dense reference used for cross-validation.
//! - [`scenario`]: scenario files and table output used by the CLI.

pub mod condition;
pub mod detectors;
pub mod filter;
pub mod fock;
pub mod interference;
pub mod numerics;
pub mod oracle;
pub mod scenario;

mod distribution;

pub use condition::{Condition, ConditionError, EvalMode, Params};
pub use detectors::{
    joint_response, noisy_filtered_components, noisy_filtered_state, purity, response, DetectorError, DetectorModel,
};
pub use distribution::{Distribution, Heralded};
pub use filter::{
    apply_kraus, condition_probability, conditional_distribution, conditional_state, f_coefficients,
    shutter_probability,
    FCoefficients, FilterError, FilterInput, FilterSettings, MeasurementOutcome,
};
pub use fock::{MixedState, StateError, SumDiff, TwoModeState};
pub use interference::{bs_transform, hom_distribution, threshold_probability, BsAmplitudeTable};
pub use numerics::{log_factorial, signed_binomial_convolution, ExactInteger, LogMagnitude};

/// Tolerance used when checking that states and weight lists are normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;
