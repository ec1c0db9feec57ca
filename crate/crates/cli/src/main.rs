//! Benchmark CLI for GP bandit optimization with batch and delayed
//! feedback.
//!
//! Subcommands: `run` (execute the configured experiment and write CSVs),
//! `validate` (parse and check a config, no side effects), `infogain`
//! (information-gain diagnostics), `init-size` (two-stage initialization
//! sizing). Exit codes: 0 success, 2 configuration or usage error,
//! 3 numerical error, 4 I/O error.

// Validation guards use `!(x > 0.0)` on purpose: the negation rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gpbucb::harness;
use gpbucb::infogain::{self, BoundCMode, ShrinkageReport};
use gpbucb::kernel::KernelFamily;
use gpbucb::policy::{self, GammaBoundConstants};

use config::Overrides;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl From<gpbucb::Error> for CliError {
    fn from(e: gpbucb::Error) -> Self {
        match e {
            gpbucb::Error::Config(_)
            | gpbucb::Error::InvalidInput(_)
            | gpbucb::Error::DimensionMismatch { .. } => CliError::Config(vec![e.to_string()]),
            gpbucb::Error::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "gpbucb", version, about = "GP bandit optimization benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write per-trial and aggregate CSVs.
    Run {
        /// Experiment config file (TOML).
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Parse and validate a config file without running anything.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Information-gain diagnostics: greedy gain curve, batch information
    /// bounds, and optional numerical checks.
    Infogain {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Greedy curve length (defaults to batch size - 1).
        #[arg(long)]
        steps: Option<usize>,
        /// Additionally fuzz the variance-shrinkage inequality this many
        /// times.
        #[arg(long, default_value_t = 0)]
        shrinkage_fuzz: usize,
        /// Additionally check the initialization bound for the configured
        /// batch size and t_init.
        #[arg(long, default_value_t = false)]
        init_bound: bool,
    },
    /// Initialization sizing for the two-stage batch rule.
    InitSize(InitSizeArgs),
}

#[derive(Args)]
struct InitSizeArgs {
    /// Kernel family: rbf-ard, matern or linear-ard.
    #[arg(long)]
    kernel: String,
    /// Batch size B.
    #[arg(long)]
    batch: usize,
    /// Growth-curve scale (linear and rbf rows).
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Growth-curve scale (matern row).
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// Growth-curve exponent in (0, 1) (matern row).
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Decision dimension (linear and rbf rows).
    #[arg(long, default_value_t = 1)]
    dim: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config: path, overrides } => run(&path, &overrides),
        Command::Validate { config: path, overrides } => {
            config::parse_config(&path, &overrides)?;
            println!("configuration ok: {}", path.display());
            Ok(())
        }
        Command::Infogain { config: path, overrides, steps, shrinkage_fuzz, init_bound } => {
            infogain_report(&path, &overrides, steps, shrinkage_fuzz, init_bound)
        }
        Command::InitSize(args) => init_size(&args),
    }
}

fn run(path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let file_config = config::parse_config(path, overrides)?;
    let resolved = config::build_experiment(&file_config)?;
    let out_dir = config::output_dir(&file_config, overrides.output_dir.as_ref());
    std::fs::create_dir_all(&out_dir)?;

    let outcome = harness::run_experiment(&resolved.setup)?;
    let trials_path = out_dir.join("trials.csv");
    let aggregate_path = out_dir.join("aggregate.csv");
    let mut w = BufWriter::new(File::create(&trials_path)?);
    harness::write_trials_csv(&mut w, &outcome.traces)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&aggregate_path)?);
    harness::write_aggregate_csv(&mut w, &outcome.aggregate)?;
    w.flush()?;

    let succeeded = outcome.traces.iter().filter(|t| t.is_some()).count();
    println!(
        "{} ({} trials x {} rounds): {succeeded} succeeded, {} failed",
        resolved.setup.policy.name(),
        resolved.setup.trials,
        resolved.setup.horizon,
        outcome.failures.len()
    );
    for (trial, error) in &outcome.failures {
        println!("  trial {trial} failed: {error}");
    }
    if let Some(last) = outcome.aggregate.last() {
        println!(
            "final mean average regret {:.6} (se {:.6}), mean minimum regret {:.6} (se {:.6})",
            last.mean_avg_regret, last.se_avg_regret, last.mean_min_regret, last.se_min_regret
        );
    }
    println!("wrote {} and {}", trials_path.display(), aggregate_path.display());
    if succeeded == 0 {
        return Err(CliError::Numerical("every trial failed".into()));
    }
    Ok(())
}

fn infogain_report(
    path: &Path,
    overrides: &Overrides,
    steps: Option<usize>,
    shrinkage_fuzz: usize,
    init_bound: bool,
) -> Result<(), CliError> {
    let file_config = config::parse_config(path, overrides)?;
    let resolved = config::build_experiment(&file_config)?;
    let set = &resolved.setup.set;
    let kernel = &resolved.setup.kernel;
    let noise_variance = resolved.setup.noise_variance;
    let batch = resolved.batch;
    let steps = steps.unwrap_or(batch.saturating_sub(1)).min(set.len());
    let out_dir = config::output_dir(&file_config, overrides.output_dir.as_ref());
    std::fs::create_dir_all(&out_dir)?;

    let report = infogain::greedy_gamma(kernel, noise_variance, set, steps, &[])?;
    let csv_path = out_dir.join("infogain.csv");
    let mut w = BufWriter::new(File::create(&csv_path)?);
    writeln!(w, "step,decision_index,marginal_gain_nats,cumulative_gain_nats")?;
    let mut acc = 0.0;
    for (step, (&idx, &gain)) in report.selected.iter().zip(&report.greedy_curve).enumerate() {
        acc += gain;
        writeln!(w, "{},{},{},{}", step + 1, idx, gain, acc)?;
    }
    w.flush()?;
    let (lower, upper) = report.bracket();
    println!("greedy information gain over {steps} steps: {lower:.6} nats");
    println!("bracket for the exact maximum: [{lower:.6}, {upper:.6}]");
    let c_raw = infogain::bound_c(kernel, noise_variance, set, batch, BoundCMode::Raw)?;
    println!("batch information bound C (raw, B = {batch}): {c_raw:.6}");
    if let Ok(t_init) = config::resolve_t_init(&file_config) {
        if t_init > 0 {
            let c_init = infogain::bound_c(
                kernel,
                noise_variance,
                set,
                batch,
                BoundCMode::Initialized { t_init },
            )?;
            println!("batch information bound C (initialized, t_init = {t_init}): {c_init:.6}");
        }
    }
    println!("wrote {}", csv_path.display());

    if shrinkage_fuzz > 0 {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(resolved.setup.master_seed);
        let mut holds = 0usize;
        let mut degenerate = 0usize;
        for _ in 0..shrinkage_fuzz {
            let n = set.len();
            let history = rng.random_range(0..10.min(n));
            let split = rng.random_range(0..=history);
            let idx: Vec<usize> = (0..history).map(|_| rng.random_range(0..n)).collect();
            let x = rng.random_range(0..n);
            match infogain::check_shrinkage_ratio(
                kernel,
                noise_variance,
                set,
                &idx[..split],
                &idx[split..],
                x,
            )? {
                ShrinkageReport::Checked { holds: ok, .. } => holds += usize::from(ok),
                ShrinkageReport::Degenerate { .. } => degenerate += 1,
            }
        }
        println!(
            "shrinkage-ratio fuzz: {holds}/{} hold ({degenerate} degenerate)",
            shrinkage_fuzz - degenerate
        );
    }
    if init_bound {
        let t_init = config::resolve_t_init(&file_config)
            .map_err(|e| CliError::Config(vec![e]))?;
        let r = infogain::check_init_bound(kernel, noise_variance, set, batch, t_init)?;
        println!(
            "initialization bound: greedy lhs {:.6} (upper {:.6}) vs scaled rhs {:.6} -> {}",
            r.lhs_greedy,
            r.lhs_upper,
            r.rhs_scaled,
            if r.holds { "holds" } else { "not conclusive" }
        );
    }
    Ok(())
}

fn init_size(args: &InitSizeArgs) -> Result<(), CliError> {
    let family = match args.kernel.as_str() {
        "rbf-ard" => KernelFamily::RbfArd,
        "matern" => KernelFamily::Matern,
        "linear-ard" => KernelFamily::LinearArd,
        other => {
            return Err(CliError::Config(vec![format!(
                "unknown kernel family {other:?}; valid families: rbf-ard, matern, linear-ard"
            )]))
        }
    };
    let constants = GammaBoundConstants {
        eta: args.eta,
        nu: args.nu,
        epsilon: args.epsilon,
        dim: args.dim,
    };
    let sizing = policy::t_init_size(family, args.batch, &constants)?;
    println!("t_init: {}", sizing.t_init);
    println!("regret_multiplier: {}", sizing.regret_multiplier);
    Ok(())
}
