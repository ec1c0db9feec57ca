//! Gaussian-process posterior over the payoff function, with hallucinated
//! (outcome-free) conditioning.
//!
//! The posterior mean at `x` is `k(x, X) [K + s^2 I]^-1 y` over the observed
//! data, and the variance is `k(x, x) - k(x, X) [K + s^2 I]^-1 k(x, X)^T`.
//! The variance depends only on where observations were made, never on the
//! outcomes, so a pending decision can be conditioned into the variance
//! before its outcome exists. Two factors are therefore maintained:
//!
//! * the *mean path* over real observations only, and
//! * the *variance path* over real observations plus hallucinated inputs,
//!   in insertion order.
//!
//! Both are Cholesky factors of `K + s^2 I` over their respective point
//! lists, each grown by one forward substitution per point.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::kernel::{self, DecisionSet, KernelSpec};
use crate::linalg::CholeskyFactor;

/// Raw variances this far below zero (relative to the signal variance) are
/// reported as numerical errors instead of being clamped.
const VARIANCE_VIOLATION: f64 = -1e-8;

#[derive(Debug, Clone)]
pub struct GpPosterior {
    spec: KernelSpec,
    noise_variance: f64,
    // Mean path: real observations only.
    mean_points: Vec<f64>,
    outcomes: Vec<f64>,
    mean_factor: CholeskyFactor,
    mean_weights: Vec<f64>,
    // Variance path: real + hallucinated conditioning locations, in
    // insertion order. `hallucinated` holds positions into `var_points`
    // of inputs still awaiting outcomes, oldest first.
    var_points: Vec<f64>,
    var_factor: CholeskyFactor,
    hallucinated: VecDeque<usize>,
}

impl GpPosterior {
    pub fn new(spec: KernelSpec, noise_variance: f64) -> Result<Self> {
        let spec = spec.validated()?;
        if !(noise_variance > 0.0) {
            return Err(Error::Config(format!(
                "noise variance must be > 0, got {noise_variance}"
            )));
        }
        Ok(Self {
            spec,
            noise_variance,
            mean_points: Vec::new(),
            outcomes: Vec::new(),
            mean_factor: CholeskyFactor::new(),
            mean_weights: Vec::new(),
            var_points: Vec::new(),
            var_factor: CholeskyFactor::new(),
            hallucinated: VecDeque::new(),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Number of real observations (mean-path points).
    pub fn num_observations(&self) -> usize {
        self.outcomes.len()
    }

    /// Number of hallucinated inputs still awaiting outcomes.
    pub fn num_hallucinated(&self) -> usize {
        self.hallucinated.len()
    }

    /// Number of variance-path conditioning locations (real + hallucinated).
    pub fn num_conditioning(&self) -> usize {
        self.var_factor.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    fn point_at(flat: &[f64], dim: usize, i: usize) -> &[f64] {
        &flat[i * dim..(i + 1) * dim]
    }

    fn kernel_row(&self, x: &[f64], flat: &[f64], out: &mut Vec<f64>) {
        let dim = self.dim();
        out.clear();
        out.extend(
            flat.chunks_exact(dim)
                .map(|p| kernel::eval_unchecked(&self.spec, x, p)),
        );
    }

    /// Posterior mean at `x`, using real observations only.
    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if self.outcomes.is_empty() {
            return Ok(0.0);
        }
        let dim = self.dim();
        Ok(self
            .mean_points
            .chunks_exact(dim)
            .zip(&self.mean_weights)
            .map(|(p, w)| kernel::eval_unchecked(&self.spec, x, p) * w)
            .sum())
    }

    /// Posterior variance at `x`, conditioning on real and hallucinated
    /// inputs alike. Clamped to `[0, inf)`; a raw value below
    /// `-1e-8 * signal_variance` is surfaced as a numerical error.
    pub fn posterior_variance(&self, x: &[f64]) -> Result<f64> {
        let mut scratch = Vec::with_capacity(self.var_factor.len());
        self.variance_with_scratch(x, &mut scratch)
    }

    /// `posterior_variance` with a caller-owned scratch buffer; identical
    /// arithmetic, no per-call allocation.
    pub fn variance_with_scratch(&self, x: &[f64], scratch: &mut Vec<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let prior = kernel::eval_unchecked(&self.spec, x, x);
        if self.var_factor.len() == 0 {
            return Ok(prior.max(0.0));
        }
        self.kernel_row(x, &self.var_points, scratch);
        self.var_factor.solve_lower(scratch);
        let raw = prior - scratch.iter().map(|v| v * v).sum::<f64>();
        if raw < VARIANCE_VIOLATION * self.spec.signal_variance {
            return Err(Error::Numerical(format!(
                "posterior variance {raw:.3e} below clamp floor \
                 ({:.1e} * signal variance) with {} conditioning points",
                VARIANCE_VIOLATION,
                self.var_factor.len()
            )));
        }
        Ok(raw.max(0.0))
    }

    /// Posterior variance at every point of `set`, written into `out`.
    pub fn variance_batch(&self, set: &DecisionSet, out: &mut Vec<f64>) -> Result<()> {
        let mut scratch = Vec::with_capacity(self.var_factor.len());
        out.clear();
        out.reserve(set.len());
        for p in set.points() {
            out.push(self.variance_with_scratch(p, &mut scratch)?);
        }
        Ok(())
    }

    fn extend_mean_path(&mut self, x: &[f64], y: f64) -> Result<()> {
        let mut cross = Vec::with_capacity(self.mean_factor.len());
        self.kernel_row(x, &self.mean_points, &mut cross);
        let diag = kernel::eval_unchecked(&self.spec, x, x) + self.noise_variance;
        self.mean_factor
            .extend(&cross, diag, self.spec.signal_variance)?;
        self.mean_points.extend_from_slice(x);
        self.outcomes.push(y);
        Ok(())
    }

    fn extend_var_path(&mut self, x: &[f64]) -> Result<()> {
        let mut cross = Vec::with_capacity(self.var_factor.len());
        self.kernel_row(x, &self.var_points, &mut cross);
        let diag = kernel::eval_unchecked(&self.spec, x, x) + self.noise_variance;
        self.var_factor
            .extend(&cross, diag, self.spec.signal_variance)?;
        self.var_points.extend_from_slice(x);
        Ok(())
    }

    fn refresh_mean_weights(&mut self) {
        self.mean_weights.clear();
        self.mean_weights.extend_from_slice(&self.outcomes);
        self.mean_factor.solve(&mut self.mean_weights);
    }

    /// Append a real observation `(x, y)`; both paths grow by one point.
    pub fn condition_on_observation(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.check_dim(x)?;
        self.extend_var_path(x)?;
        self.extend_mean_path(x, y)?;
        self.refresh_mean_weights();
        Ok(())
    }

    /// Condition the variance path on `x` without an outcome. The posterior
    /// mean is unchanged at every query point.
    pub fn hallucinate(&mut self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        self.extend_var_path(x)?;
        let pos = self.var_factor.len() - 1;
        self.hallucinated.push_back(pos);
        Ok(())
    }

    /// Turn every hallucinated input into a real observation. `outcomes`
    /// must cover all of them, in hallucination order.
    pub fn promote_hallucinations(&mut self, outcomes: &[f64]) -> Result<()> {
        if outcomes.len() != self.hallucinated.len() {
            return Err(Error::InvalidInput(format!(
                "{} outcomes supplied for {} hallucinated inputs",
                outcomes.len(),
                self.hallucinated.len()
            )));
        }
        self.promote_oldest(outcomes)
    }

    /// Turn the `outcomes.len()` oldest hallucinated inputs into real
    /// observations; newer ones stay pending. This is how rolling delivery
    /// under delay schedules lands partial feedback.
    pub fn promote_oldest(&mut self, outcomes: &[f64]) -> Result<()> {
        if outcomes.len() > self.hallucinated.len() {
            return Err(Error::InvalidInput(format!(
                "{} outcomes supplied but only {} inputs are hallucinated",
                outcomes.len(),
                self.hallucinated.len()
            )));
        }
        let dim = self.dim();
        for &y in outcomes {
            let pos = self
                .hallucinated
                .pop_front()
                .expect("length checked above");
            let x = Self::point_at(&self.var_points, dim, pos).to_vec();
            self.extend_mean_path(&x, y)?;
        }
        if !outcomes.is_empty() {
            self.refresh_mean_weights();
        }
        Ok(())
    }
}
