//! Experiment configuration file: TOML schema, validation, and conversion
//! into a runnable experiment.
//!
//! Parsing reports unknown keys by name; semantic validation collects every
//! violation instead of stopping at the first. Scalar fields may be
//! overridden from the command line (flag > file > built-in default).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use gpbucb::confidence::{ConfidenceParams, Regime};
use gpbucb::harness::{self, ExperimentSetup, InstanceSource, NoiseKind};
use gpbucb::infogain::{self, BoundCMode};
use gpbucb::kernel::{DecisionSet, KernelSpec};
use gpbucb::policy::{self, GammaBoundConstants, PolicyKind};
use gpbucb::schedule::FeedbackSchedule;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub instance: InstanceSection,
    pub decision_set: Option<DecisionSetSection>,
    pub kernel: KernelSpec,
    pub schedule: ScheduleSection,
    pub confidence: ConfidenceSection,
    #[serde(default)]
    pub init: InitSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    GpSample,
    Tabular,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    pub source: SourceKind,
    /// Fresh payoff draw per trial (gp-sample only); a shared draw
    /// otherwise.
    #[serde(default = "default_true")]
    pub resample_per_trial: bool,
    pub path: Option<PathBuf>,
    pub payoff_column: Option<String>,
    pub feature_columns: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionSetSection {
    /// Per-dimension [low, high].
    pub bounds: Vec<[f64; 2]>,
    /// Points per dimension, endpoints included.
    pub resolution: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Sequential,
    Batch,
    Delay,
    Custom,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: ScheduleKind,
    pub batch_size: Option<usize>,
    pub table: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeKind {
    Finite,
    Compact,
    Rkhs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CMode {
    Raw,
    Initialized,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfidenceSection {
    pub regime: RegimeKind,
    pub delta: f64,
    /// Explicit within-batch information bound; mutually exclusive with
    /// `c_mode`.
    pub c: Option<f64>,
    pub c_mode: Option<CMode>,
    // Compact regime constants.
    pub side: Option<f64>,
    pub deriv_a: Option<f64>,
    pub deriv_b: Option<f64>,
    // RKHS regime constants.
    pub rkhs_norm: Option<f64>,
    /// Length of the greedy information-gain curve backing the RKHS
    /// exploration weights (defaults to min(horizon, |D|); each step costs
    /// a sweep over the decision set).
    pub gamma_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    /// Initialization length for gp-bucb-init / c_mode = "initialized".
    pub t_init: Option<usize>,
    // Assumed information-gain growth constants, used to derive t_init
    // when it is not given explicitly.
    pub eta: Option<f64>,
    pub nu: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub policy: PolicyKind,
    pub horizon: usize,
    pub trials: usize,
    pub noise_variance: f64,
    #[serde(default = "default_noise")]
    pub noise: NoiseKind,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

fn default_noise() -> NoiseKind {
    NoiseKind::Gaussian
}

/// Scalar overrides from the command line.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of independent trials.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Rounds per trial.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Selection policy (gp-ucb, gp-bucb, gp-bucb-lazy, nrb-ucb, ntb-ucb,
    /// gp-bucb-init).
    #[arg(long)]
    pub policy: Option<String>,
    /// Observation-noise variance.
    #[arg(long)]
    pub noise_variance: Option<f64>,
    /// Confidence failure probability.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Batch size / delay bound of the feedback schedule.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Output directory (overrides GPBUCB_OUTPUT_DIR and the config file).
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

pub fn parse_policy_name(name: &str) -> Result<PolicyKind, CliError> {
    let all = PolicyKind::ALL_NAMES;
    match name {
        "gp-ucb" => Ok(PolicyKind::GpUcb),
        "gp-bucb" => Ok(PolicyKind::GpBucb),
        "gp-bucb-lazy" => Ok(PolicyKind::GpBucbLazy),
        "nrb-ucb" => Ok(PolicyKind::NrbUcb),
        "ntb-ucb" => Ok(PolicyKind::NtbUcb),
        "gp-bucb-init" => Ok(PolicyKind::GpBucbInit),
        other => Err(CliError::Config(vec![format!(
            "unknown policy {other:?}; valid policies: {}",
            all.join(", ")
        )])),
    }
}

/// Parse and validate a config file, applying overrides. Returns the full
/// list of semantic violations when any exist.
pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut config: FileConfig = toml::from_str(&text)
        .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
    apply_overrides(&mut config, overrides)?;
    let problems = validate(&config);
    if !problems.is_empty() {
        return Err(CliError::Config(problems));
    }
    Ok(config)
}

fn apply_overrides(config: &mut FileConfig, overrides: &Overrides) -> Result<(), CliError> {
    if let Some(seed) = overrides.seed {
        config.run.seed = seed;
    }
    if let Some(trials) = overrides.trials {
        config.run.trials = trials;
    }
    if let Some(horizon) = overrides.horizon {
        config.run.horizon = horizon;
    }
    if let Some(policy) = &overrides.policy {
        config.run.policy = parse_policy_name(policy)?;
    }
    if let Some(nv) = overrides.noise_variance {
        config.run.noise_variance = nv;
    }
    if let Some(delta) = overrides.delta {
        config.confidence.delta = delta;
    }
    if let Some(b) = overrides.batch_size {
        config.schedule.batch_size = Some(b);
    }
    if let Some(dir) = &overrides.output_dir {
        config.run.output_dir = Some(dir.clone());
    }
    Ok(())
}

/// Resolved output directory: flag (already applied onto the config) >
/// GPBUCB_OUTPUT_DIR > file > "out".
pub fn output_dir(config: &FileConfig, flag: Option<&PathBuf>) -> PathBuf {
    if let Some(dir) = flag {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var("GPBUCB_OUTPUT_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    config.run.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

/// Every semantic violation in the config, empty when it is usable.
pub fn validate(config: &FileConfig) -> Vec<String> {
    let mut problems = Vec::new();
    let run = &config.run;
    if !(run.noise_variance > 0.0) {
        problems.push(format!(
            "run.noise_variance must be > 0, got {}",
            run.noise_variance
        ));
    }
    if run.horizon == 0 {
        problems.push("run.horizon must be >= 1".into());
    }
    if run.trials == 0 {
        problems.push("run.trials must be >= 1".into());
    }
    let delta = config.confidence.delta;
    if !(delta > 0.0 && delta < 1.0) {
        problems.push(format!("confidence.delta must be in (0, 1), got {delta}"));
    }
    for p in config.kernel.validation_errors() {
        problems.push(format!("kernel: {p}"));
    }

    match config.instance.source {
        SourceKind::GpSample => {
            match &config.decision_set {
                None => problems.push("decision_set is required for source \"gp-sample\"".into()),
                Some(ds) => {
                    if ds.bounds.is_empty() || ds.bounds.len() != ds.resolution.len() {
                        problems.push(
                            "decision_set.bounds and decision_set.resolution must be non-empty \
                             and the same length"
                                .into(),
                        );
                    } else {
                        for (j, ([lo, hi], r)) in
                            ds.bounds.iter().zip(&ds.resolution).enumerate()
                        {
                            if *r == 0 {
                                problems.push(format!("decision_set.resolution[{j}] must be >= 1"));
                            }
                            if !(lo < hi) && *r > 1 {
                                problems.push(format!(
                                    "decision_set.bounds[{j}] must satisfy low < high"
                                ));
                            }
                        }
                        let total: usize = ds.resolution.iter().product();
                        if total > 5000 {
                            problems.push(format!(
                                "decision_set has {total} grid points; gp-sample supports at \
                                 most 5000"
                            ));
                        }
                        if config.kernel.dim() != ds.bounds.len() {
                            problems.push(format!(
                                "kernel has {} lengthscales but the grid has {} dimensions",
                                config.kernel.dim(),
                                ds.bounds.len()
                            ));
                        }
                    }
                }
            }
            if config.instance.path.is_some() {
                problems.push("instance.path is only used with source \"tabular\"".into());
            }
        }
        SourceKind::Tabular => {
            match &config.instance.path {
                None => problems.push("instance.path is required for source \"tabular\"".into()),
                Some(p) => {
                    if !p.exists() {
                        problems.push(format!("instance.path {} does not exist", p.display()));
                    }
                }
            }
            if config.instance.payoff_column.is_none() {
                problems.push("instance.payoff_column is required for source \"tabular\"".into());
            }
            match &config.instance.feature_columns {
                None => problems
                    .push("instance.feature_columns is required for source \"tabular\"".into()),
                Some(cols) => {
                    if cols.is_empty() {
                        problems.push("instance.feature_columns must be non-empty".into());
                    }
                    if config.kernel.dim() != cols.len() {
                        problems.push(format!(
                            "kernel has {} lengthscales but {} feature columns are listed",
                            config.kernel.dim(),
                            cols.len()
                        ));
                    }
                }
            }
            if config.decision_set.is_some() {
                problems.push(
                    "decision_set must be omitted for source \"tabular\" (the file rows define \
                     the decisions)"
                        .into(),
                );
            }
        }
    }

    match config.schedule.kind {
        ScheduleKind::Sequential => {}
        ScheduleKind::Batch | ScheduleKind::Delay => match config.schedule.batch_size {
            None => problems.push("schedule.batch_size is required for batch/delay kinds".into()),
            Some(0) => problems.push("schedule.batch_size must be >= 1".into()),
            Some(_) => {}
        },
        ScheduleKind::Custom => match &config.schedule.table {
            None => problems.push("schedule.table is required for kind \"custom\"".into()),
            Some(table) => {
                if table.len() < config.run.horizon + 1 {
                    problems.push(format!(
                        "schedule.table must cover horizon + 1 = {} rounds, got {}",
                        config.run.horizon + 1,
                        table.len()
                    ));
                }
                if let Err(e) = FeedbackSchedule::custom(table.clone()) {
                    problems.push(format!("schedule.table: {e}"));
                }
            }
        },
    }
    if run.policy == PolicyKind::GpUcb && config.schedule.kind != ScheduleKind::Sequential {
        problems.push("policy gp-ucb requires schedule.kind = \"sequential\"".into());
    }
    if run.policy == PolicyKind::GpBucbInit
        && !matches!(config.schedule.kind, ScheduleKind::Sequential | ScheduleKind::Batch)
    {
        problems.push("policy gp-bucb-init requires a sequential or batch schedule".into());
    }

    match config.confidence.regime {
        RegimeKind::Finite => {}
        RegimeKind::Compact => {
            for (name, v) in [
                ("side", config.confidence.side),
                ("deriv_a", config.confidence.deriv_a),
                ("deriv_b", config.confidence.deriv_b),
            ] {
                match v {
                    None => problems
                        .push(format!("confidence.{name} is required for the compact regime")),
                    Some(v) if !(v > 0.0) => {
                        problems.push(format!("confidence.{name} must be > 0, got {v}"))
                    }
                    Some(_) => {}
                }
            }
        }
        RegimeKind::Rkhs => match config.confidence.rkhs_norm {
            None => problems.push("confidence.rkhs_norm is required for the rkhs regime".into()),
            Some(m) if !(m > 0.0) => {
                problems.push(format!("confidence.rkhs_norm must be > 0, got {m}"))
            }
            Some(_) => {}
        },
    }
    if config.confidence.c.is_some() && config.confidence.c_mode.is_some() {
        problems.push("confidence.c and confidence.c_mode are mutually exclusive".into());
    }
    if let Some(c) = config.confidence.c {
        if !(c >= 0.0) {
            problems.push(format!("confidence.c must be >= 0, got {c}"));
        }
    }

    let needs_t_init = run.policy == PolicyKind::GpBucbInit
        || config.confidence.c_mode == Some(CMode::Initialized);
    if needs_t_init {
        match resolve_t_init(config) {
            Err(e) => problems.push(e),
            Ok(t_init) => {
                if run.policy == PolicyKind::GpBucbInit && run.horizon < t_init {
                    problems.push(format!(
                        "run.horizon ({}) is shorter than the initialization length ({t_init})",
                        run.horizon
                    ));
                }
            }
        }
    }
    if let Some(e) = config.init.epsilon {
        if !(e > 0.0 && e < 1.0) {
            problems.push(format!("init.epsilon must be in (0, 1), got {e}"));
        }
    }
    problems
}

/// Initialization length: explicit `init.t_init`, or derived from the
/// growth-curve constants when any are given.
pub fn resolve_t_init(config: &FileConfig) -> Result<usize, String> {
    if let Some(t) = config.init.t_init {
        return Ok(t);
    }
    let init = &config.init;
    if init.eta.is_none() && init.nu.is_none() && init.epsilon.is_none() {
        return Err(
            "init.t_init is required (set it explicitly, or provide init.eta/nu/epsilon to \
             derive it from the sizing table)"
                .into(),
        );
    }
    let defaults = GammaBoundConstants::default();
    let constants = GammaBoundConstants {
        eta: init.eta.unwrap_or(defaults.eta),
        nu: init.nu.unwrap_or(defaults.nu),
        epsilon: init.epsilon.unwrap_or(defaults.epsilon),
        dim: config.kernel.dim(),
    };
    let batch = config.schedule.batch_size.unwrap_or(1);
    policy::t_init_size(config.kernel.family, batch, &constants)
        .map(|s| s.t_init)
        .map_err(|e| e.to_string())
}

/// Everything needed to run or inspect the configured experiment.
pub struct ResolvedExperiment {
    pub setup: ExperimentSetup,
    pub batch: usize,
}

/// Build the runnable experiment: load or define the decision set, resolve
/// the schedule, the confidence regime, and the information bound.
pub fn build_experiment(config: &FileConfig) -> Result<ResolvedExperiment, CliError> {
    let (set, source): (Arc<DecisionSet>, InstanceSource) = match config.instance.source {
        SourceKind::GpSample => {
            let ds = config.decision_set.as_ref().expect("validated");
            let bounds: Vec<(f64, f64)> = ds.bounds.iter().map(|[lo, hi]| (*lo, *hi)).collect();
            let set = Arc::new(DecisionSet::grid(&bounds, &ds.resolution)?);
            let source = if config.instance.resample_per_trial {
                InstanceSource::SampledPerTrial
            } else {
                InstanceSource::SampledShared
            };
            (set, source)
        }
        SourceKind::Tabular => {
            let instance = harness::load_tabular_instance(
                config.instance.path.as_ref().expect("validated"),
                config.instance.payoff_column.as_ref().expect("validated"),
                config.instance.feature_columns.as_ref().expect("validated"),
            )?;
            (instance.set().clone(), InstanceSource::Fixed(instance))
        }
    };

    let batch = match config.schedule.kind {
        ScheduleKind::Sequential => 1,
        ScheduleKind::Batch | ScheduleKind::Delay => {
            config.schedule.batch_size.expect("validated")
        }
        ScheduleKind::Custom => {
            let table = config.schedule.table.as_ref().expect("validated");
            FeedbackSchedule::custom(table.clone())?.delay_bound()
        }
    };
    let schedule = match config.schedule.kind {
        ScheduleKind::Sequential => FeedbackSchedule::Sequential,
        ScheduleKind::Batch => FeedbackSchedule::batch(batch)?,
        ScheduleKind::Delay => FeedbackSchedule::delay(batch)?,
        ScheduleKind::Custom => {
            FeedbackSchedule::custom(config.schedule.table.clone().expect("validated"))?
        }
    };

    let noise_variance = config.run.noise_variance;
    let regime = match config.confidence.regime {
        RegimeKind::Finite => Regime::FiniteDecisions { num_decisions: set.len() },
        RegimeKind::Compact => Regime::CompactConvex {
            dim: set.dim(),
            side: config.confidence.side.expect("validated"),
            deriv_a: config.confidence.deriv_a.expect("validated"),
            deriv_b: config.confidence.deriv_b.expect("validated"),
        },
        RegimeKind::Rkhs => {
            let steps = config
                .confidence
                .gamma_steps
                .unwrap_or(config.run.horizon)
                .min(set.len());
            let report =
                infogain::greedy_gamma(&config.kernel, noise_variance, &set, steps, &[])?;
            let mut gamma = Vec::with_capacity(steps.max(1));
            let mut acc = 0.0;
            for g in &report.greedy_curve {
                acc += g;
                gamma.push(acc);
            }
            if gamma.is_empty() {
                gamma.push(0.0);
            }
            Regime::Rkhs { norm_bound: config.confidence.rkhs_norm.expect("validated"), gamma }
        }
    };

    let t_init = match (config.run.policy, config.confidence.c_mode) {
        (PolicyKind::GpBucbInit, _) | (_, Some(CMode::Initialized)) => {
            Some(resolve_t_init(config).map_err(|e| CliError::Config(vec![e]))?)
        }
        _ => None,
    };
    // Information bound C: explicit value > configured mode > raw batch
    // bound. gp-bucb-init recomputes its own initialized bound when the
    // experiment is prepared, so the value set here is a placeholder.
    let c = if let Some(c) = config.confidence.c {
        c
    } else {
        match config.confidence.c_mode {
            Some(CMode::Initialized) => infogain::bound_c(
                &config.kernel,
                noise_variance,
                &set,
                batch,
                BoundCMode::Initialized { t_init: t_init.expect("resolved above") },
            )?,
            Some(CMode::Raw) | None => {
                infogain::bound_c(&config.kernel, noise_variance, &set, batch, BoundCMode::Raw)?
            }
        }
    };
    let confidence = ConfidenceParams::new(regime, config.confidence.delta, c)?;

    Ok(ResolvedExperiment {
        setup: ExperimentSetup {
            kernel: config.kernel.clone(),
            set,
            source,
            policy: config.run.policy,
            schedule,
            confidence,
            horizon: config.run.horizon,
            trials: config.run.trials,
            noise_variance,
            noise: config.run.noise,
            t_init,
            master_seed: config.run.seed,
        },
        batch,
    })
}
