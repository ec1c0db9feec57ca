//! Selection rules over a finite decision set.
//!
//! * `gp-ucb` — strictly sequential: `argmax mu_{t-1}(x) + sqrt(alpha_t) * sigma_{t-1}(x)`.
//! * `gp-bucb` — batch rule: `argmax mu_{fb(t)}(x) + sqrt(beta_t) * sigma_{t-1}(x)`,
//!   where the variance additionally conditions on the pending
//!   (hallucinated) decisions of the current batch.
//! * `gp-bucb-lazy` — same decisions as `gp-bucb`, but true variances are
//!   recomputed only for candidates that could win the argmax, using stale
//!   per-decision upper bounds (variance never increases, so a stale value
//!   stays a valid bound).
//! * `nrb-ucb` / `ntb-ucb` — naive baselines that freeze the sequential
//!   score at the last feedback round and repeat its maximizer, or walk its
//!   top-B decisions, without hallucination.
//! * `gp-bucb-init` — `gp-bucb` run against a two-stage schedule that
//!   ignores all feedback during an uncertainty-sampling initialization.
//!
//! Every argmax breaks ties toward the lowest decision index, which makes
//! runs reproducible and lets the lazy and eager batch rules be compared
//! decision-for-decision.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::confidence::ConfidenceParams;
use crate::error::{Error, Result};
use crate::infogain;
use crate::kernel::{DecisionSet, KernelFamily};
use crate::posterior::GpPosterior;
use crate::schedule::FeedbackSchedule;

/// Which selection rule drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    GpUcb,
    GpBucb,
    GpBucbLazy,
    NrbUcb,
    NtbUcb,
    GpBucbInit,
}

impl PolicyKind {
    pub const ALL_NAMES: [&'static str; 6] =
        ["gp-ucb", "gp-bucb", "gp-bucb-lazy", "nrb-ucb", "ntb-ucb", "gp-bucb-init"];

    pub fn name(self) -> &'static str {
        match self {
            Self::GpUcb => "gp-ucb",
            Self::GpBucb => "gp-bucb",
            Self::GpBucbLazy => "gp-bucb-lazy",
            Self::NrbUcb => "nrb-ucb",
            Self::NtbUcb => "ntb-ucb",
            Self::GpBucbInit => "gp-bucb-init",
        }
    }

    /// True for the rules that hallucinate pending decisions into the
    /// variance path.
    pub fn hallucinates(self) -> bool {
        matches!(self, Self::GpBucb | Self::GpBucbLazy | Self::GpBucbInit)
    }
}

/// Max-heap entry ordered by score, ties toward the lower index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ScoreEntry {
    score: f64,
    index: usize,
}

impl Eq for ScoreEntry {}

impl Ord for ScoreEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for ScoreEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Slack when checking that a stale standard-deviation bound still
/// dominates the freshly computed value.
const SIGMA_BOUND_SLACK: f64 = 1e-12;

/// Running state of one policy over one trial. Must be driven by a single
/// selection rule; `select` dispatches on the construction kind.
#[derive(Debug, Clone)]
pub struct PolicyState {
    kind: PolicyKind,
    posterior: GpPosterior,
    set: Arc<DecisionSet>,
    schedule: FeedbackSchedule,
    confidence: ConfidenceParams,
    round: usize,
    pending: VecDeque<(usize, usize)>,
    // Lazy bookkeeping: stale upper bounds on the posterior standard
    // deviation, per-decision score bounds, and the priority queue over
    // them. `epoch` tracks the (fb, beta) pair the bounds were built for.
    sigma_hat: Vec<f64>,
    score_bound: Vec<f64>,
    heap: BinaryHeap<ScoreEntry>,
    mu_cache: Vec<f64>,
    fresh: Vec<usize>,
    lazy_epoch: Option<(usize, u64)>,
    // Frozen-score ranking for the naive baselines, rebuilt per feedback
    // epoch.
    ranking: Vec<usize>,
    ranking_epoch: Option<usize>,
    scratch: Vec<f64>,
    recomputes_last: u64,
    recomputes_total: u64,
}

impl PolicyState {
    pub fn new(
        kind: PolicyKind,
        posterior: GpPosterior,
        set: Arc<DecisionSet>,
        schedule: FeedbackSchedule,
        confidence: ConfidenceParams,
    ) -> Result<Self> {
        if posterior.dim() != set.dim() {
            return Err(Error::DimensionMismatch { expected: set.dim(), got: posterior.dim() });
        }
        if kind == PolicyKind::GpUcb && schedule != FeedbackSchedule::Sequential {
            return Err(Error::Config(
                "gp-ucb assumes feedback through t - 1; use the sequential schedule".into(),
            ));
        }
        let n = set.len();
        Ok(Self {
            kind,
            posterior,
            set,
            schedule,
            confidence,
            round: 1,
            pending: VecDeque::new(),
            sigma_hat: vec![f64::INFINITY; n],
            score_bound: vec![f64::INFINITY; n],
            heap: BinaryHeap::new(),
            mu_cache: vec![0.0; n],
            fresh: vec![0; n],
            lazy_epoch: None,
            ranking: Vec::new(),
            ranking_epoch: None,
            scratch: Vec::new(),
            recomputes_last: 0,
            recomputes_total: 0,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    /// Round whose decision the next `select` call makes (1-based).
    pub fn current_round(&self) -> usize {
        self.round
    }

    pub fn posterior(&self) -> &GpPosterior {
        &self.posterior
    }

    /// Rounds selected but not yet delivered, as `(round, decision)` pairs.
    pub fn pending(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pending.iter().copied()
    }

    /// True-variance recomputations performed by the most recent selection.
    pub fn recomputes_last(&self) -> u64 {
        self.recomputes_last
    }

    /// True-variance recomputations performed so far.
    pub fn recomputes_total(&self) -> u64 {
        self.recomputes_total
    }

    /// Stale standard-deviation upper bound of decision `i` (lazy rule).
    pub fn sigma_bound(&self, i: usize) -> f64 {
        self.sigma_hat[i]
    }

    /// Make the decision for the current round with the construction kind's
    /// rule, then advance the round.
    pub fn select(&mut self) -> Result<usize> {
        match self.kind {
            PolicyKind::GpUcb => self.select_gp_ucb(),
            PolicyKind::GpBucb | PolicyKind::GpBucbInit => self.select_gp_bucb(),
            PolicyKind::GpBucbLazy => self.select_gp_bucb_lazy(),
            PolicyKind::NrbUcb => self.select_nrb(),
            PolicyKind::NtbUcb => {
                let j = self.round - self.schedule.fb(self.round)?;
                self.select_ntb(j)
            }
        }
    }

    fn finish_selection(&mut self, chosen: usize, hallucinate: bool) -> Result<usize> {
        if hallucinate {
            let point = self.set.point(chosen).to_vec();
            self.posterior.hallucinate(&point)?;
        }
        self.pending.push_back((self.round, chosen));
        self.round += 1;
        Ok(chosen)
    }

    /// Sequential rule: `argmax mu_{t-1}(x) + sqrt(alpha_t) * sigma_{t-1}(x)`.
    pub fn select_gp_ucb(&mut self) -> Result<usize> {
        let weight = self.confidence.alpha(self.round)?.sqrt();
        let chosen = self.eager_argmax(weight)?;
        self.finish_selection(chosen, false)
    }

    /// Batch rule: `argmax mu_{fb(t)}(x) + sqrt(beta_t) * sigma_{t-1}(x)`;
    /// the chosen decision is hallucinated into the variance path.
    pub fn select_gp_bucb(&mut self) -> Result<usize> {
        let weight = self.confidence.beta(&self.schedule, self.round)?.sqrt();
        let chosen = self.eager_argmax(weight)?;
        self.finish_selection(chosen, true)
    }

    fn eager_argmax(&mut self, weight: f64) -> Result<usize> {
        let mut variances = std::mem::take(&mut self.scratch);
        self.posterior.variance_batch(&self.set, &mut variances)?;
        self.recomputes_last = self.set.len() as u64;
        self.recomputes_total += self.recomputes_last;
        let mut best = f64::NEG_INFINITY;
        let mut chosen = 0usize;
        for (i, &var) in variances.iter().enumerate() {
            let score = self.posterior.posterior_mean(self.set.point(i))? + weight * var.sqrt();
            if score > best {
                best = score;
                chosen = i;
            }
        }
        self.scratch = variances;
        Ok(chosen)
    }

    /// Lazily evaluated batch rule. Produces exactly the decisions of
    /// `select_gp_bucb` (same tie-breaking) while recomputing the true
    /// posterior variance only for candidates popped off the score-bound
    /// queue.
    pub fn select_gp_bucb_lazy(&mut self) -> Result<usize> {
        let t = self.round;
        let fb = self.schedule.fb(t)?;
        let weight = self.confidence.beta(&self.schedule, t)?.sqrt();
        let epoch = (fb, weight.to_bits());
        if self.lazy_epoch != Some(epoch) {
            // Feedback arrived (or first use): refresh the frozen means and
            // rebuild score bounds from the surviving sigma bounds.
            for i in 0..self.set.len() {
                self.mu_cache[i] = self.posterior.posterior_mean(self.set.point(i))?;
                self.score_bound[i] = self.mu_cache[i] + weight * self.sigma_hat[i];
            }
            self.heap.clear();
            self.heap.extend(
                self.score_bound
                    .iter()
                    .enumerate()
                    .map(|(index, &score)| ScoreEntry { score, index }),
            );
            self.lazy_epoch = Some(epoch);
        }
        self.recomputes_last = 0;
        let mut scratch = std::mem::take(&mut self.scratch);
        let chosen = loop {
            let entry = self
                .heap
                .pop()
                .ok_or_else(|| Error::Internal("lazy score queue exhausted".into()))?;
            let i = entry.index;
            if entry.score != self.score_bound[i] {
                continue; // superseded duplicate
            }
            if self.fresh[i] == t {
                // A fresh true score on top of a queue of upper bounds is
                // the argmax; ordering already favors the lowest index.
                self.heap.push(entry);
                break i;
            }
            let var = self.posterior.variance_with_scratch(self.set.point(i), &mut scratch)?;
            self.recomputes_last += 1;
            let sigma = var.sqrt();
            if sigma > self.sigma_hat[i] + SIGMA_BOUND_SLACK {
                self.scratch = scratch;
                return Err(Error::Internal(format!(
                    "stale sigma bound {:.17e} exceeded by true value {sigma:.17e} \
                     at decision {i}, round {t}",
                    self.sigma_hat[i]
                )));
            }
            self.sigma_hat[i] = sigma;
            self.fresh[i] = t;
            let score = self.mu_cache[i] + weight * sigma;
            self.score_bound[i] = score;
            self.heap.push(ScoreEntry { score, index: i });
        };
        self.scratch = scratch;
        self.recomputes_total += self.recomputes_last;
        self.finish_selection(chosen, true)
    }

    /// Score ranking frozen at the last feedback round, for the naive
    /// baselines. The exploration weight is `alpha` at the round the batch
    /// started (`fb + 1`), matching the sequential score at that moment.
    fn frozen_ranking(&mut self) -> Result<()> {
        let fb = self.schedule.fb(self.round)?;
        if self.ranking_epoch == Some(fb) {
            return Ok(());
        }
        let weight = self.confidence.alpha(fb + 1)?.sqrt();
        let mut variances = std::mem::take(&mut self.scratch);
        self.posterior.variance_batch(&self.set, &mut variances)?;
        self.recomputes_last += self.set.len() as u64;
        self.recomputes_total += self.set.len() as u64;
        let mut scored = Vec::with_capacity(self.set.len());
        for (i, &var) in variances.iter().enumerate() {
            let score = self.posterior.posterior_mean(self.set.point(i))? + weight * var.sqrt();
            scored.push((score, i));
        }
        self.scratch = variances;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        self.ranking = scored.into_iter().map(|(_, i)| i).collect();
        self.ranking_epoch = Some(fb);
        Ok(())
    }

    /// Naive repeated baseline: the frozen-score maximizer, every round of
    /// the batch.
    pub fn select_nrb(&mut self) -> Result<usize> {
        self.recomputes_last = 0;
        self.frozen_ranking()?;
        let chosen = self.ranking[0];
        self.finish_selection(chosen, false)
    }

    /// Naive top-B baseline: the `j`-th highest-scoring distinct decision
    /// (1-based) of the frozen ranking.
    pub fn select_ntb(&mut self, j: usize) -> Result<usize> {
        if j == 0 || j > self.set.len() {
            return Err(Error::InvalidInput(format!(
                "batch position {j} outside 1..={}",
                self.set.len()
            )));
        }
        self.recomputes_last = 0;
        self.frozen_ranking()?;
        let chosen = self.ranking[j - 1];
        self.finish_selection(chosen, false)
    }

    /// Deliver outcomes for the oldest pending rounds, in round order. The
    /// batch rules promote their hallucinated inputs; the others condition
    /// directly.
    pub fn deliver(&mut self, outcomes: &[f64]) -> Result<()> {
        if outcomes.len() > self.pending.len() {
            return Err(Error::InvalidInput(format!(
                "{} outcomes delivered with only {} rounds pending",
                outcomes.len(),
                self.pending.len()
            )));
        }
        if self.kind.hallucinates() {
            self.posterior.promote_oldest(outcomes)?;
            for _ in outcomes {
                self.pending.pop_front();
            }
        } else {
            for &y in outcomes {
                let (_, decision) = self.pending.pop_front().expect("length checked");
                let point = self.set.point(decision).to_vec();
                self.posterior.condition_on_observation(&point, y)?;
            }
        }
        Ok(())
    }
}

/// Greedy uncertainty-sampling initialization: `t_init` decisions chosen by
/// maximum posterior variance, each hallucinated before the next pick, ties
/// toward the lowest index. The literal argmax is followed, so an index may
/// repeat under heavy noise.
pub fn uncertainty_sampling_init(
    posterior: &GpPosterior,
    set: &DecisionSet,
    t_init: usize,
) -> Result<Vec<usize>> {
    let mut p = posterior.clone();
    Ok(infogain::greedy_max_variance(&mut p, set, t_init, false)?
        .into_iter()
        .map(|(i, _)| i)
        .collect())
}

/// Constants of the assumed information-gain growth curve per kernel
/// family: `gamma_t <= eta * d * log(t + 1)` (linear),
/// `gamma_t <= nu * t^epsilon` (Matern), `gamma_t <= eta * log(t + 1)^d`
/// (RBF).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBoundConstants {
    pub eta: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub dim: usize,
}

impl Default for GammaBoundConstants {
    fn default() -> Self {
        Self { eta: 1.0, nu: 1.0, epsilon: 0.5, dim: 1 }
    }
}

/// Initialization size and the constant regret multiplier it buys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSizing {
    pub t_init: usize,
    pub regret_multiplier: f64,
}

/// Initialization-set size making the residual within-batch information
/// bound independent of the batch size, per kernel family. Logarithms are
/// natural. Groupings used, verbatim:
///
/// * linear: `max(ln B, e * (ln eta + ln d + 2 ln B) / (2 ln B - 1) * eta * d * (B - 1) * ln B)`
/// * matern: `(nu * (B - 1))^(1 / (1 - epsilon))`
/// * rbf: `max((ln B)^d, ((e * ln eta + (d + 1) * ln B) / (2 d * ln B - 1))^d * eta * (B - 1) * (ln B)^d)`
///
/// The result is rounded up and floored at 1.
pub fn t_init_size(
    family: KernelFamily,
    batch: usize,
    constants: &GammaBoundConstants,
) -> Result<InitSizing> {
    use std::f64::consts::E;
    if batch == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    let b = batch as f64;
    let log_b = b.ln();
    let (raw, multiplier) = match family {
        KernelFamily::LinearArd => {
            if !(constants.eta > 0.0) || constants.dim == 0 {
                return Err(Error::Config("linear sizing needs eta > 0 and dim >= 1".into()));
            }
            let d = constants.dim as f64;
            let second = E * ((constants.eta.ln() + d.ln() + 2.0 * log_b) / (2.0 * log_b - 1.0))
                * constants.eta
                * d
                * (b - 1.0)
                * log_b;
            (log_b.max(second), (2.0 / E).exp())
        }
        KernelFamily::Matern => {
            if !(constants.nu > 0.0) || !(constants.epsilon > 0.0 && constants.epsilon < 1.0) {
                return Err(Error::Config(
                    "matern sizing needs nu > 0 and epsilon in (0, 1)".into(),
                ));
            }
            ((constants.nu * (b - 1.0)).powf(1.0 / (1.0 - constants.epsilon)), E)
        }
        KernelFamily::RbfArd => {
            if !(constants.eta > 0.0) || constants.dim == 0 {
                return Err(Error::Config("rbf sizing needs eta > 0 and dim >= 1".into()));
            }
            let d = constants.dim as f64;
            let second = ((E * constants.eta.ln() + (d + 1.0) * log_b)
                / (2.0 * d * log_b - 1.0))
                .powf(d)
                * constants.eta
                * (b - 1.0)
                * log_b.powf(d);
            (log_b.powf(d).max(second), (2.0 * d / E).powf(d).exp())
        }
    };
    if !raw.is_finite() {
        return Err(Error::Config(format!(
            "initialization size came out non-finite ({raw}) for batch {batch}"
        )));
    }
    Ok(InitSizing { t_init: (raw.ceil().max(1.0)) as usize, regret_multiplier: multiplier })
}
