//! Constrained bandit learning on the probability simplex.
//!
//! This crate implements a primal-dual mirror-descent policy for adversarial
//! multi-armed bandits with time-varying constraints, together with everything
//! needed to exercise it end to end:
//!
//! - [`simplex`]: the negative-entropy geometry (KL divergence, multiplicative
//!   steps, exact KL projection onto the truncated simplex).
//! - [`bcomd`]: the single-policy learner: importance-weighted estimates,
//!   stabilized pseudo-costs, a multiplicative primal update, projected dual
//!   ascent, and the schedule that sets its step sizes from the horizon and
//!   regularity of the loss sequence.
//! - [`meta`]: a doubling-phase wrapper that runs a geometric grid of learners
//!   per phase and mixes them with an entropic meta-learner, for use when the
//!   regularity of the environment is unknown up front.
//! - [`environment`]: deterministic synthetic trace generators (cyclic-shift
//!   profiles, incomparability fixtures, stationary controls) and the text
//!   trace-file format shared by the CLI tools.
//! - [`oracle`]: ground truth: per-slot constrained optima, comparator
//!   sequences, path-length and temporal-variation measures, and regret
//!   accounting for completed runs.
//! - [`harness`]: experiment configs, seed-replicated runs, CSV emission, and
//!   parameter sweeps.
//! - [`acceptance`]: the self-contained acceptance suite with pinned
//!   thresholds; `bcomd check` and the integration tests both drive it.
//!
//! # Determinism
//!
//! Every source of randomness flows through [`rng::SplitMix64`], a counter
//! based generator with stable output across platforms. Identical seeds and
//! configs produce byte-identical trace files and run CSVs; the acceptance
//! suite asserts this.
//!
//! # Non-goals
//!
//! General mirror maps (only negative entropy is implemented), adaptive
//! adversaries, multi-point feedback, and distributed execution.

pub mod acceptance;
pub mod bcomd;
pub mod environment;
pub mod harness;
pub mod meta;
pub mod oracle;
pub mod rng;
pub mod simplex;

pub use bcomd::{BcomdParams, BcomdState, RoundOutcome, ScheduleMode};
pub use environment::{FixtureKind, Trace, TraceGenConfig};
pub use harness::{ExperimentConfig, ExperimentSummary, PolicySpec, RunRecord, TraceSource};
pub use meta::{MetaConfig, MetaState, PhasePlan};
pub use oracle::{ComparatorSequence, RegularityMeasures, RunEvaluation};
pub use rng::SplitMix64;

/// Shared numeric tolerances. Tests and library code read the same constants
/// so a tightened bound cannot silently drift apart between the two.
pub mod tol {
    /// Absolute slack when checking that a distribution sums to one.
    pub const DIST_SUM: f64 = 1e-12;
    /// Absolute slack for algebraic identities (three-point, Pythagorean).
    pub const IDENTITY: f64 = 1e-9;
    /// Per-coordinate agreement required between the sort-scan projection
    /// solver and the bisection fallback, and for KKT residuals.
    pub const SOLVER_AGREE: f64 = 1e-10;
    /// Re-projecting a projected point must reproduce it to this slack.
    pub const IDEMPOTENT: f64 = 1e-12;
    /// A comparator point x* is accepted as feasible when g.x* <= this.
    pub const COMPARATOR_FEASIBLE: f64 = 1e-9;
    /// Exponents in multiplicative steps are clamped to this magnitude;
    /// exp(709) is the edge of f64 range.
    pub const EXP_CLAMP: f64 = 700.0;
}
