//! Experiment engine: payoff instances, seeded single trials, and
//! multi-trial experiments with CSV output.
//!
//! Determinism contract: a master seed derives independent per-trial streams
//! through [`derive_seed`] (SplitMix64 finalizer over master, stream id and
//! trial index), Gaussian variates come from a plain Box-Muller transform,
//! and trial aggregation is an ordered fold over trial indices. Repeating a
//! run with the same configuration and master seed reproduces every output
//! byte for byte. Trials may still execute concurrently: no state is shared
//! between them.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confidence::ConfidenceParams;
use crate::error::{Error, Result};
use crate::infogain::{self, BoundCMode};
use crate::kernel::{self, DecisionSet, KernelSpec};
use crate::linalg;
use crate::policy::{PolicyKind, PolicyState};
use crate::schedule::FeedbackSchedule;

/// Dense factorization guard for sampled instances.
const MAX_SAMPLED_DECISIONS: usize = 5000;

/// Stream ids for [`derive_seed`].
pub const STREAM_INSTANCE: u64 = 1;
pub const STREAM_NOISE: u64 = 2;

/// Derive an independent stream seed from a master seed. Two rounds of the
/// SplitMix64 finalizer, folding in the stream id and index each round.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let a = mix(master ^ GOLDEN.wrapping_mul(stream.wrapping_add(1)));
    mix(a ^ GOLDEN.wrapping_mul(index.wrapping_add(1)))
}

/// Standard normal variate via the Box-Muller transform: with `u1` uniform
/// on `(0, 1]` and `u2` on `[0, 1)`, `sqrt(-2 ln u1) * cos(tau * u2)`.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Observation-noise law. Both use `sigma_n = sqrt(noise_variance)` as the
/// scale; the bounded mode draws uniformly from `[-sigma_n, sigma_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    BoundedUniform,
}

impl NoiseKind {
    fn draw<R: Rng>(self, sigma_n: f64, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian => sigma_n * standard_normal(rng),
            Self::BoundedUniform => sigma_n * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

/// A ground-truth payoff table over a decision set.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffInstance {
    set: Arc<DecisionSet>,
    payoffs: Vec<f64>,
    best_value: f64,
    best_indices: Vec<usize>,
}

impl PayoffInstance {
    pub fn new(set: Arc<DecisionSet>, payoffs: Vec<f64>) -> Result<Self> {
        if payoffs.len() != set.len() {
            return Err(Error::InvalidInput(format!(
                "{} payoffs for {} decisions",
                payoffs.len(),
                set.len()
            )));
        }
        if payoffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("payoffs must be finite".into()));
        }
        let best_value = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best_indices = payoffs
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == best_value)
            .map(|(i, _)| i)
            .collect();
        Ok(Self { set, payoffs, best_value, best_indices })
    }

    pub fn set(&self) -> &Arc<DecisionSet> {
        &self.set
    }

    pub fn payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn payoff(&self, i: usize) -> f64 {
        self.payoffs[i]
    }

    /// Best achievable expected payoff.
    pub fn best_value(&self) -> f64 {
        self.best_value
    }

    /// Every index attaining the optimum (non-empty).
    pub fn best_indices(&self) -> &[usize] {
        &self.best_indices
    }
}

/// Draw a payoff function from the zero-mean GP prior over `set`:
/// `f = L z` with `L` the factor of the kernel matrix (plus a small
/// diagonal jitter when needed) and `z` standard normal. Deterministic per
/// seed.
pub fn sample_gp_instance(
    spec: &KernelSpec,
    set: Arc<DecisionSet>,
    seed: u64,
) -> Result<PayoffInstance> {
    let n = set.len();
    if n > MAX_SAMPLED_DECISIONS {
        return Err(Error::InvalidInput(format!(
            "{n} decisions exceed the dense sampling limit of {MAX_SAMPLED_DECISIONS}"
        )));
    }
    if set.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: set.dim() });
    }
    let entry = |i: usize, j: usize| kernel::eval_unchecked(spec, set.point(i), set.point(j));
    let (factor, _jitter) = linalg::factor_dense(n, entry, spec.signal_variance)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
    let payoffs: Vec<f64> = (0..n)
        .map(|i| {
            factor
                .row(i)
                .iter()
                .zip(&z)
                .map(|(l, zj)| l * zj)
                .sum()
        })
        .collect();
    PayoffInstance::new(set, payoffs)
}

/// Load a payoff table from a comma-separated numeric file with a header
/// row. Decisions are the feature columns in file order; the payoff column
/// supplies the ground truth. Duplicate feature rows are rejected. Reported
/// line numbers are 1-based file lines (the header is line 1).
pub fn load_tabular_instance(
    path: impl AsRef<Path>,
    payoff_column: &str,
    feature_columns: &[String],
) -> Result<PayoffInstance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{}: empty file", path.display())))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let column = |name: &str| -> Result<usize> {
        names.iter().position(|n| *n == name).ok_or_else(|| {
            Error::InvalidInput(format!(
                "{}: column {name:?} not found in header [{}]",
                path.display(),
                names.join(", ")
            ))
        })
    };
    if feature_columns.is_empty() {
        return Err(Error::InvalidInput("at least one feature column is required".into()));
    }
    let feature_idx: Vec<usize> =
        feature_columns.iter().map(|n| column(n)).collect::<Result<_>>()?;
    let payoff_idx = column(payoff_column)?;

    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut payoffs: Vec<f64> = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |col: usize, name: &str| -> Result<f64> {
            let cell = cells.get(col).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "{}: line {line_no} has {} cells, column {name:?} missing",
                    path.display(),
                    cells.len()
                ))
            })?;
            cell.parse::<f64>().map_err(|_| {
                Error::InvalidInput(format!(
                    "{}: line {line_no}, column {name:?}: non-numeric value {cell:?}",
                    path.display()
                ))
            })
        };
        let row: Vec<f64> = feature_idx
            .iter()
            .zip(feature_columns)
            .map(|(&c, n)| parse(c, n))
            .collect::<Result<_>>()?;
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        if let Some(first) = seen.insert(key, line_no) {
            return Err(Error::InvalidInput(format!(
                "{}: duplicate feature row at lines {first} and {line_no}",
                path.display()
            )));
        }
        payoffs.push(parse(payoff_idx, payoff_column)?);
        points.push(row);
    }
    let set = Arc::new(DecisionSet::new(points)?);
    PayoffInstance::new(set, payoffs)
}

/// Write an instance as a loadable table: features as `x0..x{d-1}`, payoff
/// column `payoff`. Values round-trip exactly through `load_tabular_instance`.
pub fn save_tabular_instance(instance: &PayoffInstance, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    let dim = instance.set().dim();
    let header: Vec<String> = (0..dim).map(|j| format!("x{j}")).collect();
    let _ = writeln!(out, "{},payoff", header.join(","));
    for (p, y) in instance.set().points().zip(instance.payoffs()) {
        for c in p {
            let _ = write!(out, "{c},");
        }
        let _ = writeln!(out, "{y}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// One simulated round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub decision: usize,
    pub outcome: f64,
    pub regret: f64,
    pub cumulative_regret: f64,
    pub min_regret: f64,
    /// True-variance recomputations performed by this round's selection.
    pub recomputes: u64,
}

/// Full record of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    pub seed: u64,
    pub records: Vec<RoundRecord>,
}

impl TrialTrace {
    pub fn cumulative_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cumulative_regret)
    }

    pub fn final_min_regret(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.min_regret)
    }

    /// `R_t / t` for the given 1-based round.
    pub fn average_regret(&self, round: usize) -> f64 {
        self.records[round - 1].cumulative_regret / round as f64
    }

    pub fn total_recomputes(&self) -> u64 {
        self.records.iter().map(|r| r.recomputes).sum()
    }
}

/// Everything a single trial needs besides the instance and its seed.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub kernel: KernelSpec,
    pub policy: PolicyKind,
    pub schedule: FeedbackSchedule,
    pub confidence: ConfidenceParams,
    pub horizon: usize,
    pub noise_variance: f64,
    pub noise: NoiseKind,
    /// Instrumentation: keep poison values in the embargo buffer until
    /// delivery, substituting the real outcomes only then. Decisions must
    /// be unaffected; the trace records true outcomes either way.
    pub poison_embargo: bool,
}

/// Run one seeded trial: select, observe under embargo, deliver per the
/// feedback schedule. Policy `gp-bucb-init` is expected to arrive here with
/// its two-stage schedule and bound already prepared (see
/// [`run_two_stage`]).
pub fn run_trial(instance: &PayoffInstance, config: &TrialConfig, seed: u64) -> Result<TrialTrace> {
    if config.horizon == 0 {
        return Err(Error::InvalidInput("horizon must be >= 1".into()));
    }
    // Fail early if the schedule cannot cover delivery after the last round.
    config.schedule.fb(config.horizon + 1)?;
    let posterior = crate::posterior::GpPosterior::new(config.kernel.clone(), config.noise_variance)?;
    let mut policy = PolicyState::new(
        config.policy,
        posterior,
        instance.set().clone(),
        config.schedule.clone(),
        config.confidence.clone(),
    )?;
    let sigma_n = config.noise_variance.sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut embargo: Vec<f64> = Vec::with_capacity(config.horizon);
    let mut truth: Vec<f64> = Vec::with_capacity(config.horizon);
    let mut delivered = 0usize;
    let mut records = Vec::with_capacity(config.horizon);
    let mut cumulative = 0.0;
    let mut min_regret = f64::INFINITY;
    for t in 1..=config.horizon {
        if config.policy.hallucinates() {
            debug_assert_eq!(policy.posterior().num_conditioning(), t - 1);
            debug_assert_eq!(policy.posterior().num_observations(), config.schedule.fb(t)?);
        }
        let decision = policy
            .select()
            .map_err(|e| Error::Numerical(format!("round {t}: {e}")))?;
        let noise = config.noise.draw(sigma_n, &mut rng);
        let outcome = instance.payoff(decision) + noise;
        truth.push(outcome);
        embargo.push(if config.poison_embargo {
            instance.best_value() + 1e9 + t as f64
        } else {
            outcome
        });
        let regret = instance.best_value() - instance.payoff(decision);
        cumulative += regret;
        min_regret = min_regret.min(regret);
        records.push(RoundRecord {
            round: t,
            decision,
            outcome,
            regret,
            cumulative_regret: cumulative,
            min_regret,
            recomputes: policy.recomputes_last(),
        });
        let available = config.schedule.fb(t + 1)?;
        if available > delivered {
            if config.poison_embargo {
                embargo[delivered..available].copy_from_slice(&truth[delivered..available]);
            }
            policy
                .deliver(&embargo[delivered..available])
                .map_err(|e| Error::Numerical(format!("delivery after round {t}: {e}")))?;
            delivered = available;
        }
    }
    Ok(TrialTrace { seed, records })
}

/// Build the two-stage schedule and information bound for `gp-bucb-init`:
/// no feedback for `t_init` uncertainty-sampling rounds, then batches of
/// the base schedule's size, with `C` from the initialization bound (or the
/// raw batch bound when `t_init` is 0).
pub fn prepare_two_stage(
    kernel: &KernelSpec,
    set: &DecisionSet,
    base_schedule: &FeedbackSchedule,
    confidence: &ConfidenceParams,
    horizon: usize,
    t_init: usize,
    noise_variance: f64,
) -> Result<(FeedbackSchedule, ConfidenceParams)> {
    let batch = match base_schedule {
        FeedbackSchedule::Sequential => 1,
        FeedbackSchedule::Batch(b) => *b,
        other => {
            return Err(Error::Config(format!(
                "two-stage runs need a sequential or batch schedule, got {other:?}"
            )))
        }
    };
    if horizon < t_init {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} shorter than initialization {t_init}"
        )));
    }
    let schedule = FeedbackSchedule::two_stage(t_init, batch, horizon)?;
    let mode = if t_init == 0 {
        BoundCMode::Raw
    } else {
        BoundCMode::Initialized { t_init }
    };
    let c = infogain::bound_c(kernel, noise_variance, set, batch, mode)?;
    Ok((schedule, confidence.clone().with_mi_bound(c)?))
}

/// Two-stage trial: `t_init` rounds of uncertainty sampling with no
/// feedback, everything delivered at once, then the batch rule on the
/// conditioned posterior.
#[allow(clippy::too_many_arguments)]
pub fn run_two_stage(
    instance: &PayoffInstance,
    kernel: &KernelSpec,
    base_schedule: &FeedbackSchedule,
    confidence: &ConfidenceParams,
    horizon: usize,
    t_init: usize,
    noise_variance: f64,
    noise: NoiseKind,
    seed: u64,
) -> Result<TrialTrace> {
    let (schedule, confidence) = prepare_two_stage(
        kernel,
        instance.set(),
        base_schedule,
        confidence,
        horizon,
        t_init,
        noise_variance,
    )?;
    run_trial(
        instance,
        &TrialConfig {
            kernel: kernel.clone(),
            policy: PolicyKind::GpBucbInit,
            schedule,
            confidence,
            horizon,
            noise_variance,
            noise,
            poison_embargo: false,
        },
        seed,
    )
}

/// Where trial payoff functions come from.
#[derive(Debug, Clone)]
pub enum InstanceSource {
    /// Fresh draw from the GP prior per trial.
    SampledPerTrial,
    /// One draw from the GP prior shared by every trial.
    SampledShared,
    /// A fixed instance (e.g. loaded from a table); noise still varies.
    Fixed(PayoffInstance),
}

/// A full multi-trial experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub kernel: KernelSpec,
    pub set: Arc<DecisionSet>,
    pub source: InstanceSource,
    pub policy: PolicyKind,
    pub schedule: FeedbackSchedule,
    pub confidence: ConfidenceParams,
    pub horizon: usize,
    pub trials: usize,
    pub noise_variance: f64,
    pub noise: NoiseKind,
    /// Initialization length for `gp-bucb-init`.
    pub t_init: Option<usize>,
    pub master_seed: u64,
}

/// Per-round aggregate over succeeded trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub round: usize,
    pub mean_avg_regret: f64,
    pub se_avg_regret: f64,
    pub mean_min_regret: f64,
    pub se_min_regret: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Trace per trial index; `None` where the trial failed.
    pub traces: Vec<Option<TrialTrace>>,
    /// `(trial index, error)` for every failure.
    pub failures: Vec<(usize, String)>,
    pub aggregate: Vec<AggregateRow>,
}

/// Run `trials` independent trials (concurrently) and aggregate them in
/// trial order. Failed trials are recorded and skipped by the aggregate;
/// the experiment keeps going.
pub fn run_experiment(setup: &ExperimentSetup) -> Result<ExperimentOutcome> {
    if setup.trials == 0 {
        return Err(Error::InvalidInput("at least one trial is required".into()));
    }
    let (schedule, confidence) = match setup.policy {
        PolicyKind::GpBucbInit => {
            let t_init = setup.t_init.ok_or_else(|| {
                Error::Config("gp-bucb-init needs t_init in the experiment setup".into())
            })?;
            prepare_two_stage(
                &setup.kernel,
                &setup.set,
                &setup.schedule,
                &setup.confidence,
                setup.horizon,
                t_init,
                setup.noise_variance,
            )?
        }
        _ => (setup.schedule.clone(), setup.confidence.clone()),
    };
    let shared: Option<PayoffInstance> = match &setup.source {
        InstanceSource::SampledShared => Some(sample_gp_instance(
            &setup.kernel,
            setup.set.clone(),
            derive_seed(setup.master_seed, STREAM_INSTANCE, 0),
        )?),
        InstanceSource::Fixed(instance) => Some(instance.clone()),
        InstanceSource::SampledPerTrial => None,
    };
    let config = TrialConfig {
        kernel: setup.kernel.clone(),
        policy: setup.policy,
        schedule,
        confidence,
        horizon: setup.horizon,
        noise_variance: setup.noise_variance,
        noise: setup.noise,
        poison_embargo: false,
    };
    let results: Vec<std::result::Result<TrialTrace, String>> = (0..setup.trials)
        .into_par_iter()
        .map(|i| {
            let instance = match &shared {
                Some(instance) => instance.clone(),
                None => sample_gp_instance(
                    &setup.kernel,
                    setup.set.clone(),
                    derive_seed(setup.master_seed, STREAM_INSTANCE, i as u64),
                )
                .map_err(|e| e.to_string())?,
            };
            let seed = derive_seed(setup.master_seed, STREAM_NOISE, i as u64);
            run_trial(&instance, &config, seed).map_err(|e| e.to_string())
        })
        .collect();
    let mut traces = Vec::with_capacity(setup.trials);
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => traces.push(Some(t)),
            Err(e) => {
                traces.push(None);
                failures.push((i, e));
            }
        }
    }
    let aggregate = aggregate_traces(setup.horizon, &traces);
    Ok(ExperimentOutcome { traces, failures, aggregate })
}

/// Mean and standard error of per-round average and minimum regret across
/// the succeeded traces. The standard error uses the sample standard
/// deviation and is 0 when fewer than two trials succeeded.
pub fn aggregate_traces(horizon: usize, traces: &[Option<TrialTrace>]) -> Vec<AggregateRow> {
    let ok: Vec<&TrialTrace> = traces.iter().flatten().collect();
    let n = ok.len();
    let mut rows = Vec::with_capacity(horizon);
    if n == 0 {
        return rows;
    }
    let mean_se = |values: &[f64]| -> (f64, f64) {
        let mean = values.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return (mean, 0.0);
        }
        let var =
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        (mean, (var / n as f64).sqrt())
    };
    for t in 1..=horizon {
        let avg: Vec<f64> = ok.iter().map(|tr| tr.average_regret(t)).collect();
        let min: Vec<f64> = ok.iter().map(|tr| tr.records[t - 1].min_regret).collect();
        let (mean_avg_regret, se_avg_regret) = mean_se(&avg);
        let (mean_min_regret, se_min_regret) = mean_se(&min);
        rows.push(AggregateRow { round: t, mean_avg_regret, se_avg_regret, mean_min_regret, se_min_regret });
    }
    rows
}

/// Per-trial CSV: `trial,t,decision_index,y,r_t,R_t,min_regret,recompute_count`.
pub fn write_trials_csv<W: Write>(mut w: W, traces: &[Option<TrialTrace>]) -> Result<()> {
    writeln!(w, "trial,t,decision_index,y,r_t,R_t,min_regret,recompute_count")?;
    for (i, trace) in traces.iter().enumerate() {
        let Some(trace) = trace else { continue };
        for r in &trace.records {
            writeln!(
                w,
                "{i},{},{},{},{},{},{},{}",
                r.round, r.decision, r.outcome, r.regret, r.cumulative_regret, r.min_regret, r.recomputes
            )?;
        }
    }
    Ok(())
}

/// Aggregate CSV: `t,mean_avg_regret,se_avg_regret,mean_min_regret,se_min_regret`.
pub fn write_aggregate_csv<W: Write>(mut w: W, rows: &[AggregateRow]) -> Result<()> {
    writeln!(w, "t,mean_avg_regret,se_avg_regret,mean_min_regret,se_min_regret")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.round, r.mean_avg_regret, r.se_avg_regret, r.mean_min_regret, r.se_min_regret
        )?;
    }
    Ok(())
}
