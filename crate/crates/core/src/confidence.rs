//! Exploration-weight schedules for the UCB rules.
//!
//! `alpha(t)` is the sequential exploration weight under one of three
//! assumption regimes; `beta(t) = exp(2C) * alpha(max(fb(t), 1))` widens it
//! for batch selection, where `C` bounds the information that can accrue
//! within a batch.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::FeedbackSchedule;

/// Assumption regime determining the `alpha_t` formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Regime {
    /// Finite decision set of known size, payoff sampled from the prior.
    FiniteDecisions { num_decisions: usize },
    /// Compact convex subset of `[0, side]^dim` with high-probability
    /// derivative bounds `P(sup |df/dx_j| > L) <= a exp(-(L/b)^2)`.
    CompactConvex { dim: usize, side: f64, deriv_a: f64, deriv_b: f64 },
    /// Payoff with RKHS norm at most `norm_bound`; `gamma[t - 1]` supplies
    /// the information-gain value for round `t` (the final entry is reused
    /// past the end of the curve).
    Rkhs { norm_bound: f64, gamma: Vec<f64> },
}

/// Confidence-schedule parameters: the regime, the failure probability
/// `delta`, and the within-batch information bound `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceParams {
    regime: Regime,
    delta: f64,
    mi_bound: f64,
}

impl ConfidenceParams {
    pub fn new(regime: Regime, delta: f64, mi_bound: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta must be in (0, 1), got {delta}")));
        }
        if !(mi_bound >= 0.0) {
            return Err(Error::Config(format!("C must be >= 0, got {mi_bound}")));
        }
        match &regime {
            Regime::FiniteDecisions { num_decisions } => {
                if *num_decisions == 0 {
                    return Err(Error::Config("finite regime needs a non-empty decision set".into()));
                }
            }
            Regime::CompactConvex { dim, side, deriv_a, deriv_b } => {
                if *dim == 0 || !(*side > 0.0) || !(*deriv_a > 0.0) || !(*deriv_b > 0.0) {
                    return Err(Error::Config(
                        "compact regime needs dim >= 1 and positive side, a, b".into(),
                    ));
                }
                if 4.0 * (*dim as f64) * deriv_a / delta <= 1.0 {
                    return Err(Error::Config(
                        "compact regime needs 4 * dim * a / delta > 1 for a real log".into(),
                    ));
                }
            }
            Regime::Rkhs { norm_bound, gamma } => {
                if !(*norm_bound > 0.0) {
                    return Err(Error::Config("rkhs regime needs a positive norm bound".into()));
                }
                if gamma.is_empty() {
                    return Err(Error::Config("rkhs regime needs a non-empty gamma curve".into()));
                }
                if gamma.windows(2).any(|w| w[1] < w[0]) || gamma.iter().any(|g| !(*g >= 0.0)) {
                    return Err(Error::Config(
                        "rkhs gamma curve must be non-negative and non-decreasing".into(),
                    ));
                }
            }
        }
        let params = Self { regime, delta, mi_bound };
        let a1 = params.alpha(1)?;
        if !(a1 > 0.0 && a1.is_finite()) {
            return Err(Error::Config(format!(
                "alpha(1) = {a1} must be positive and finite; adjust the regime constants"
            )));
        }
        Ok(params)
    }

    pub fn regime(&self) -> &Regime {
        &self.regime
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Within-batch conditional-information bound `C`.
    pub fn mi_bound(&self) -> f64 {
        self.mi_bound
    }

    pub fn with_mi_bound(mut self, mi_bound: f64) -> Result<Self> {
        if !(mi_bound >= 0.0) {
            return Err(Error::Config(format!("C must be >= 0, got {mi_bound}")));
        }
        self.mi_bound = mi_bound;
        Ok(self)
    }

    /// Sequential exploration weight `alpha_t`, strictly positive and
    /// non-decreasing in `t`.
    pub fn alpha(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(Error::InvalidInput("round indices start at 1".into()));
        }
        let t = t as f64;
        let delta = self.delta;
        Ok(match &self.regime {
            Regime::FiniteDecisions { num_decisions } => {
                2.0 * (*num_decisions as f64 * t * t * PI * PI / (6.0 * delta)).ln()
            }
            Regime::CompactConvex { dim, side, deriv_a, deriv_b } => {
                let d = *dim as f64;
                2.0 * (t * t * 2.0 * PI * PI / (3.0 * delta)).ln()
                    + 2.0
                        * d
                        * (t * t * d * deriv_b * side * (4.0 * d * deriv_a / delta).ln().sqrt())
                            .ln()
            }
            Regime::Rkhs { norm_bound, gamma } => {
                let g = gamma[(t as usize - 1).min(gamma.len() - 1)];
                2.0 * norm_bound * norm_bound + 300.0 * g * (t / delta).ln().powi(3)
            }
        })
    }

    /// Batch exploration weight `beta_t = exp(2C) * alpha_{fb(t)}`. Rounds
    /// before any feedback exists use `alpha_1`: the posterior there still
    /// equals the prior, so widths are already maximal.
    pub fn beta(&self, schedule: &FeedbackSchedule, t: usize) -> Result<f64> {
        let fb = schedule.fb(t)?;
        Ok((2.0 * self.mi_bound).exp() * self.alpha(fb.max(1))?)
    }

    /// High-probability cumulative-regret bound
    /// `sqrt(C1 * T * exp(2C) * alpha_T * gamma_T) + 2` with
    /// `C1 = 8 / ln(1 + 1 / noise_variance)`. Diagnostic only: it holds with
    /// probability `1 - delta`, not per trial.
    pub fn regret_bound(&self, horizon: usize, gamma_t: f64, noise_variance: f64) -> Result<f64> {
        if horizon == 0 {
            return Err(Error::InvalidInput("horizon must be >= 1".into()));
        }
        if !(gamma_t >= 0.0) {
            return Err(Error::InvalidInput(format!("gamma_T must be >= 0, got {gamma_t}")));
        }
        if !(noise_variance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise variance must be > 0, got {noise_variance}"
            )));
        }
        let c1 = 8.0 / (1.0 + noise_variance.recip()).ln();
        let alpha_t = self.alpha(horizon)?;
        Ok((c1 * horizon as f64 * (2.0 * self.mi_bound).exp() * alpha_t * gamma_t).sqrt() + 2.0)
    }
}
