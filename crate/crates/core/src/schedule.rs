//! Feedback schedules: which rounds' outcomes are visible when a round's
//! decision is made.
//!
//! `fb(t)` is the latest round whose outcome may be used when choosing the
//! decision of round `t` (1-based). `fb(t) = 0` means nothing is visible
//! yet. The delivery rule generalizing simple batches is: after round `t`
//! completes, outcomes for rounds `fb(t) + 1 ..= fb(t + 1)` become visible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedbackSchedule {
    /// Outcome of round `t` visible from round `t + 1`: `fb(t) = t - 1`.
    Sequential,
    /// Whole batches of size `B`: `fb(t) = floor((t - 1) / B) * B`.
    Batch(usize),
    /// Fixed delay of `B` rounds: `fb(t) = max(t - B, 0)`.
    Delay(usize),
    /// Explicit table: `fb(t) = table[t - 1]`. Validated at construction.
    Custom { table: Vec<usize>, bound: usize },
}

impl FeedbackSchedule {
    pub fn batch(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        Ok(Self::Batch(size))
    }

    pub fn delay(bound: usize) -> Result<Self> {
        if bound == 0 {
            return Err(Error::Config("delay bound must be >= 1".into()));
        }
        Ok(Self::Delay(bound))
    }

    /// Validate and wrap an explicit `fb` table. Fails fast on a table that
    /// violates `fb(t) <= t - 1` or monotonicity.
    pub fn custom(table: Vec<usize>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Config("custom schedule table must be non-empty".into()));
        }
        let mut bound = 0usize;
        let mut prev = 0usize;
        for (i, &fb) in table.iter().enumerate() {
            let t = i + 1;
            if fb > t - 1 {
                return Err(Error::Config(format!(
                    "custom schedule: fb({t}) = {fb} exceeds t - 1 = {}",
                    t - 1
                )));
            }
            if fb < prev {
                return Err(Error::Config(format!(
                    "custom schedule: fb({t}) = {fb} decreases below fb({}) = {prev}",
                    t - 1
                )));
            }
            bound = bound.max(t - fb);
            prev = fb;
        }
        Ok(Self::Custom { table, bound })
    }

    /// Schedule for a two-stage run: no feedback during the first `t_init`
    /// rounds, everything delivered at the end of round `t_init`, then
    /// ordinary batches of `batch` rounds. The table covers `horizon + 1`
    /// rounds so delivery after the final round is well defined.
    pub fn two_stage(t_init: usize, batch: usize, horizon: usize) -> Result<Self> {
        if batch == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if horizon < t_init {
            return Err(Error::InvalidInput(format!(
                "horizon {horizon} shorter than initialization {t_init}"
            )));
        }
        let table = (1..=horizon + 1)
            .map(|t| {
                if t <= t_init {
                    0
                } else {
                    t_init + (t - t_init - 1) / batch * batch
                }
            })
            .collect();
        Self::custom(table)
    }

    /// Latest round whose feedback is usable at round `t >= 1`.
    pub fn fb(&self, t: usize) -> Result<usize> {
        if t == 0 {
            return Err(Error::InvalidInput("round indices start at 1".into()));
        }
        match self {
            Self::Sequential => Ok(t - 1),
            Self::Batch(b) => Ok((t - 1) / b * b),
            Self::Delay(b) => Ok(t.saturating_sub(*b)),
            Self::Custom { table, .. } => table.get(t - 1).copied().ok_or_else(|| {
                Error::InvalidInput(format!(
                    "custom schedule covers {} rounds, round {t} requested",
                    table.len()
                ))
            }),
        }
    }

    /// True when all outcomes through round `t` become available after round
    /// `t`, i.e. `fb(t + 1) = t`. Delay schedules with `B > 1` instead
    /// release a single round per step and never satisfy this.
    pub fn is_feedback_round(&self, t: usize) -> Result<bool> {
        Ok(self.fb(t + 1)? == t)
    }

    /// Known bound `B` on `t - fb(t)`.
    pub fn delay_bound(&self) -> usize {
        match self {
            Self::Sequential => 1,
            Self::Batch(b) | Self::Delay(b) => *b,
            Self::Custom { bound, .. } => *bound,
        }
    }
}
