//! Gaussian-process bandit optimization with batch and delayed feedback.
//!
//! The library implements upper-confidence-bound selection over a finite
//! decision set when outcomes arrive late: chosen in batches, after a fixed
//! delay, or on an arbitrary feedback schedule. The batch rule keeps the
//! posterior mean frozen at the last feedback round while conditioning the
//! posterior variance on *hallucinated* (outcome-free) copies of the pending
//! decisions, which is sound because GP variance depends only on where
//! observations are made.
//!
//! Module map:
//!
//! * [`kernel`] — decision sets and covariance functions (RBF-ARD, Matern,
//!   linear ARD).
//! * [`posterior`] — incremental GP posterior with the two conditioning
//!   paths (mean over real data, variance over real + hallucinated).
//! * [`schedule`] — feedback schedules `fb(t)` (sequential, batch, delay,
//!   custom tables).
//! * [`confidence`] — exploration-weight schedules `alpha_t` / `beta_t` and
//!   the cumulative-regret bound.
//! * [`policy`] — the selection rules: sequential UCB, batch UCB (eager and
//!   lazy), naive repeat/top-B baselines, uncertainty-sampling
//!   initialization and its sizing table.
//! * [`infogain`] — mutual-information computations, the greedy surrogate
//!   for the information-gain curve, and numerical checks of the
//!   shrinkage-ratio and initialization bounds.
//! * [`harness`] — payoff instances (GP-sampled or tabular), seeded trial
//!   simulation, multi-trial experiments and their CSV outputs.

// Validation guards are written `!(x > 0.0)` on purpose: the negation
// rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod confidence;
mod error;
pub mod harness;
pub mod infogain;
pub mod kernel;
mod linalg;
pub mod policy;
pub mod posterior;
pub mod schedule;

pub use confidence::{ConfidenceParams, Regime};
pub use error::{Error, Result};
pub use kernel::{DecisionSet, KernelFamily, KernelSpec, MaternSmoothness};
pub use posterior::GpPosterior;
pub use schedule::FeedbackSchedule;
