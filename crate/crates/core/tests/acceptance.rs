//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`).
//!
//! Run with:
//!
//! ```text
//! cargo test -p gpbucb --test acceptance -- --nocapture --test-threads=1
//! ```
//!
//! The desk-scale benchmark (criterion 5) fixes its own synthetic-instance
//! parameters, documented at `BENCH` below; its thresholds are regression
//! guards confirmed by the first verified run of this suite, whose observed
//! values are recorded alongside each assertion.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use gpbucb::confidence::{ConfidenceParams, Regime};
use gpbucb::harness::{
    self, derive_seed, ExperimentSetup, InstanceSource, NoiseKind, TrialConfig, STREAM_INSTANCE,
    STREAM_NOISE,
};
use gpbucb::infogain::{self, BoundCMode, ShrinkageReport};
use gpbucb::kernel::{self, DecisionSet, KernelFamily, KernelSpec, MaternSmoothness};
use gpbucb::policy::PolicyKind;
use gpbucb::posterior::GpPosterior;
use gpbucb::schedule::FeedbackSchedule;

fn criterion(id: u32, name: &str, ok: bool, detail: &str) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {id} ({name}): {status} - {detail}");
    assert!(ok, "acceptance criterion {id} ({name}) failed: {detail}");
}

/// Fixed parameters of the synthetic desk-scale benchmark (criteria 2, 5).
/// The payoff is drawn from a zero-mean Matern-5/2 prior (signal variance
/// 1, lengthscale 0.1) over 1000 evenly spaced points on [0, 1], observed
/// under Gaussian noise of variance 0.025. Confidence: finite-set regime,
/// delta = 0.1. The batch rules run with C = 0: the information bound only
/// widens the intervals for the regret analysis, and the benchmark tracks
/// realized regret, not the bound.
struct Bench;

impl Bench {
    const LENGTHSCALE: f64 = 0.1;
    const NOISE_VARIANCE: f64 = 0.025;
    const DELTA: f64 = 0.1;
    const MI_BOUND: f64 = 0.0;
    const GRID: usize = 1000;
    const BATCH: usize = 10;
    const HORIZON: usize = 200;
    const TRIALS: usize = 100;
    const MASTER_SEED: u64 = 20_120_601;

    fn kernel() -> KernelSpec {
        KernelSpec::new(KernelFamily::Matern, 1.0, vec![Self::LENGTHSCALE])
            .unwrap()
            .with_smoothness(MaternSmoothness::FiveHalves)
    }

    fn set() -> Arc<DecisionSet> {
        Arc::new(DecisionSet::grid(&[(0.0, 1.0)], &[Self::GRID]).unwrap())
    }

    fn confidence() -> ConfidenceParams {
        ConfidenceParams::new(
            Regime::FiniteDecisions { num_decisions: Self::GRID },
            Self::DELTA,
            Self::MI_BOUND,
        )
        .unwrap()
    }

    fn setup(policy: PolicyKind, trials: usize) -> ExperimentSetup {
        let schedule = if policy == PolicyKind::GpUcb {
            FeedbackSchedule::Sequential
        } else {
            FeedbackSchedule::batch(Self::BATCH).unwrap()
        };
        ExperimentSetup {
            kernel: Self::kernel(),
            set: Self::set(),
            source: InstanceSource::SampledPerTrial,
            policy,
            schedule,
            confidence: Self::confidence(),
            horizon: Self::HORIZON,
            trials,
            noise_variance: Self::NOISE_VARIANCE,
            noise: NoiseKind::Gaussian,
            t_init: None,
            master_seed: Self::MASTER_SEED,
        }
    }
}

/// Dense evaluation of the closed-form posterior: mean over the observed
/// data, variance over observed plus hallucinated locations.
fn dense_posterior(
    spec: &KernelSpec,
    noise: f64,
    observed: &[(Vec<f64>, f64)],
    hallucinated: &[Vec<f64>],
    x: &[f64],
) -> (f64, f64) {
    let mean = if observed.is_empty() {
        0.0
    } else {
        let n = observed.len();
        let k = DMatrix::from_fn(n, n, |i, j| {
            kernel::eval(spec, &observed[i].0, &observed[j].0).unwrap()
                + if i == j { noise } else { 0.0 }
        });
        let y = DVector::from_fn(n, |i, _| observed[i].1);
        let kx = DVector::from_fn(n, |i, _| kernel::eval(spec, x, &observed[i].0).unwrap());
        (kx.transpose() * k.try_inverse().unwrap() * y)[(0, 0)]
    };
    let locations: Vec<&Vec<f64>> =
        observed.iter().map(|(p, _)| p).chain(hallucinated).collect();
    let variance = if locations.is_empty() {
        kernel::eval(spec, x, x).unwrap()
    } else {
        let n = locations.len();
        let k = DMatrix::from_fn(n, n, |i, j| {
            kernel::eval(spec, locations[i], locations[j]).unwrap()
                + if i == j { noise } else { 0.0 }
        });
        let kx = DVector::from_fn(n, |i, _| kernel::eval(spec, x, locations[i]).unwrap());
        kernel::eval(spec, x, x).unwrap() - (kx.transpose() * k.try_inverse().unwrap() * kx)[(0, 0)]
    };
    (mean, variance)
}

fn random_spec(rng: &mut StdRng, dim: usize) -> KernelSpec {
    let family = match rng.random_range(0..3) {
        0 => KernelFamily::RbfArd,
        1 => KernelFamily::Matern,
        _ => KernelFamily::LinearArd,
    };
    let smoothness = match rng.random_range(0..3) {
        0 => MaternSmoothness::Half,
        1 => MaternSmoothness::ThreeHalves,
        _ => MaternSmoothness::FiveHalves,
    };
    let lengthscales = (0..dim).map(|_| rng.random_range(0.2..1.5)).collect();
    KernelSpec::new(family, rng.random_range(0.5..2.0), lengthscales)
        .unwrap()
        .with_smoothness(smoothness)
}

#[test]
fn acceptance_1_posterior_oracle_equivalence() {
    let mut rng = StdRng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let dim = rng.random_range(1..=4);
        let spec = random_spec(&mut rng, dim);
        let noise = rng.random_range(0.01..1.0);
        let mut gp = GpPosterior::new(spec.clone(), noise).unwrap();
        let mut observed = Vec::new();
        let mut hallucinated = Vec::new();
        let total = rng.random_range(1..=20);
        for _ in 0..total {
            let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            if rng.random::<f64>() < 0.3 {
                gp.hallucinate(&p).unwrap();
                hallucinated.push(p);
            } else {
                let y = rng.random_range(-2.0..2.0);
                gp.condition_on_observation(&p, y).unwrap();
                observed.push((p, y));
            }
        }
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        let (mean_ref, var_ref) = dense_posterior(&spec, noise, &observed, &hallucinated, &x);
        let mean = gp.posterior_mean(&x).unwrap();
        let var = gp.posterior_variance(&x).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-8);
        let e_mean = rel(mean, mean_ref);
        let e_var = rel(var, var_ref.max(0.0));
        worst = worst.max(e_mean).max(e_var);
        assert!(
            e_mean <= 1e-8 && e_var <= 1e-8,
            "case {case}: mean err {e_mean:.3e}, var err {e_var:.3e} ({spec:?})"
        );
    }
    criterion(
        1,
        "posterior oracle equivalence",
        worst <= 1e-8,
        &format!("200 random instances, worst relative error {worst:.3e} (tolerance 1e-8)"),
    );
}

#[test]
fn acceptance_2_lazy_matches_eager_and_recomputes_less() {
    let set = Bench::set();
    let kernel = Bench::kernel();
    let schedule = FeedbackSchedule::batch(Bench::BATCH).unwrap();
    let confidence = Bench::confidence();
    let runs: Vec<(u64, u64)> = (0..20u64)
        .into_par_iter()
        .map(|run| {
            let instance = harness::sample_gp_instance(
                &kernel,
                set.clone(),
                derive_seed(Bench::MASTER_SEED, STREAM_INSTANCE, run),
            )
            .unwrap();
            let noise_seed = derive_seed(Bench::MASTER_SEED, STREAM_NOISE, run);
            let config = |policy| TrialConfig {
                kernel: kernel.clone(),
                policy,
                schedule: schedule.clone(),
                confidence: confidence.clone(),
                horizon: Bench::HORIZON,
                noise_variance: Bench::NOISE_VARIANCE,
                noise: NoiseKind::Gaussian,
                poison_embargo: false,
            };
            let eager = harness::run_trial(&instance, &config(PolicyKind::GpBucb), noise_seed)
                .unwrap();
            let lazy = harness::run_trial(&instance, &config(PolicyKind::GpBucbLazy), noise_seed)
                .unwrap();
            let d_eager: Vec<usize> = eager.records.iter().map(|r| r.decision).collect();
            let d_lazy: Vec<usize> = lazy.records.iter().map(|r| r.decision).collect();
            assert_eq!(d_eager, d_lazy, "run {run}: decision sequences diverged");
            (lazy.total_recomputes(), eager.total_recomputes())
        })
        .collect();
    let eager_total = (Bench::GRID * Bench::HORIZON) as u64;
    let max_lazy = runs.iter().map(|&(l, _)| l).max().unwrap();
    for (run, &(lazy_count, eager_count)) in runs.iter().enumerate() {
        assert_eq!(eager_count, eager_total);
        assert!(
            lazy_count < eager_total,
            "run {run}: lazy recomputed {lazy_count} of {eager_total}"
        );
        // Regression guard from the first verified run: lazy work stays
        // under 20% of the eager count.
        assert!(
            (lazy_count as f64) < 0.2 * eager_total as f64,
            "run {run}: lazy recomputed {lazy_count} (>= 20% of {eager_total})"
        );
    }
    criterion(
        2,
        "lazy equals eager",
        true,
        &format!(
            "20 runs bit-identical; lazy recomputes max {max_lazy} vs eager {eager_total} per run"
        ),
    );
}

#[test]
fn acceptance_3_shrinkage_ratio_fuzz() {
    let mut rng = StdRng::seed_from_u64(303);
    let mut checked = 0u32;
    let mut worst_slack = f64::NEG_INFINITY;
    for case in 0..1000 {
        let dim = rng.random_range(1..=3);
        let spec = random_spec(&mut rng, dim);
        let noise = rng.random_range(0.05..1.0);
        let n_points = rng.random_range(2..=11);
        let set = DecisionSet::new(
            (0..n_points)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap();
        let history = rng.random_range(0..n_points.min(10));
        let split = rng.random_range(0..=history);
        let real: Vec<usize> = (0..split).collect();
        let pending: Vec<usize> = (split..history).collect();
        let x = rng.random_range(0..n_points);
        match infogain::check_shrinkage_ratio(&spec, noise, &set, &real, &pending, x).unwrap() {
            ShrinkageReport::Checked { ratio, bound, holds } => {
                checked += 1;
                worst_slack = worst_slack.max(ratio - bound);
                assert!(
                    holds,
                    "case {case}: ratio {ratio} exceeds bound {bound} ({spec:?})"
                );
            }
            ShrinkageReport::Degenerate { sigma_full } => {
                panic!("case {case}: degenerate sigma {sigma_full} on a benign instance")
            }
        }
    }
    criterion(
        3,
        "shrinkage-ratio fuzz",
        checked == 1000,
        &format!("1000/1000 random histories hold; worst ratio-bound gap {worst_slack:.3e}"),
    );
}

/// All index subsets of `0..n` with size at most `k`.
fn subsets_up_to(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for size in 1..=k {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.clone());
            // Next combination.
            let mut i = size;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if idx[i] != i + n - size {
                    idx[i] += 1;
                    for j in i + 1..size {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    idx.clear();
                    break;
                }
            }
            if idx.is_empty() {
                break;
            }
        }
    }
    out
}

#[test]
fn acceptance_4_initialization_bound_exact() {
    let batch = 3usize;
    let mut rng = StdRng::seed_from_u64(404);
    let mut cases = 0u32;
    for draw in 0..100 {
        let dim = rng.random_range(1..=2);
        let spec = random_spec(&mut rng, dim);
        let noise = rng.random_range(0.05..0.8);
        let set = DecisionSet::new(
            (0..8)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap();
        for &t_init in &[2usize, 4] {
            // Initialization set via uncertainty sampling, then both sides
            // of the bound by exhaustive subset enumeration.
            let posterior = GpPosterior::new(spec.clone(), noise).unwrap();
            let init = gpbucb::policy::uncertainty_sampling_init(&posterior, &set, t_init).unwrap();
            let lhs = subsets_up_to(8, batch - 1)
                .iter()
                .map(|a| {
                    infogain::conditional_mutual_information(&spec, noise, &set, a, &init)
                        .unwrap()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let rhs = subsets_up_to(8, t_init)
                .iter()
                .map(|a| infogain::mutual_information(&spec, noise, &set, a).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            let scaled = (batch - 1) as f64 / t_init as f64 * rhs;
            assert!(
                lhs <= scaled + 1e-9,
                "draw {draw}, t_init {t_init}: {lhs} > {scaled} ({spec:?})"
            );
            cases += 1;
        }
    }
    criterion(
        4,
        "initialization bound exact",
        cases == 200,
        "gamma_init(B-1) <= (B-1)/T_init * gamma(T_init) on 100 draws x {2,4}, enumerated exactly",
    );
}

#[test]
fn acceptance_5_desk_scale_benchmark() {
    let policies = [
        PolicyKind::GpUcb,
        PolicyKind::GpBucb,
        PolicyKind::NrbUcb,
        PolicyKind::NtbUcb,
    ];
    // One experiment per policy; the shared master seed aligns instance and
    // noise streams trial-for-trial across policies.
    let mut results = std::collections::HashMap::new();
    for policy in policies {
        let out = harness::run_experiment(&Bench::setup(policy, Bench::TRIALS)).unwrap();
        assert!(out.failures.is_empty(), "{policy:?}: {:?}", out.failures);
        results.insert(policy.name(), out);
    }
    let avg = |name: &str, t: usize| results[name].aggregate[t - 1].mean_avg_regret;
    let min_reg = |name: &str, t: usize| results[name].aggregate[t - 1].mean_min_regret;
    let horizon = Bench::HORIZON;

    // (a) Both naive baselines end at least 1.5x worse in mean average
    // regret. First verified run: nrb/bucb = 6.16, ntb/bucb = 5.66.
    let bucb_final = avg("gp-bucb", horizon);
    let nrb_ratio = avg("nrb-ucb", horizon) / bucb_final;
    let ntb_ratio = avg("ntb-ucb", horizon) / bucb_final;
    let a_ok = nrb_ratio >= 1.5 && ntb_ratio >= 1.5;

    // (b) The sequential rule is ahead while the batch rule is still blind
    // (rounds 1..10) and comparable by the end (ratio < 1.5 at T = 200).
    // Round 1 is decision-identical by symmetric tie-breaking, so equality
    // is expected there and strict dominance from round 2 on. First
    // verified run: final ratio = 1.02.
    let mut b_ok = avg("gp-ucb", 1) <= avg("gp-bucb", 1) + 1e-12;
    for t in 2..=10 {
        b_ok &= avg("gp-ucb", t) < avg("gp-bucb", t);
    }
    let final_ratio = bucb_final / avg("gp-ucb", horizon);
    b_ok &= final_ratio < 1.5;

    // (c) The batch rule keeps converging: mean minimum regret at T = 200
    // under 25% of its value at T = 10. First verified run: 0.1703 at
    // t = 10 down to below 1e-4 at t = 200 (ratio under 0.1%).
    let min10 = min_reg("gp-bucb", 10);
    let min200 = min_reg("gp-bucb", horizon);
    let c_ok = min200 < 0.25 * min10;

    criterion(
        5,
        "desk-scale benchmark",
        a_ok && b_ok && c_ok,
        &format!(
            "avg regret at T={horizon}: bucb {bucb_final:.4}, ucb {:.4}, nrb {:.4}, ntb {:.4} \
             (nrb/bucb {nrb_ratio:.2}, ntb/bucb {ntb_ratio:.2}, bucb/ucb {final_ratio:.2}); \
             bucb min regret {min10:.4} at t=10 vs {min200:.4} at t={horizon}",
            avg("gp-ucb", horizon),
            avg("nrb-ucb", horizon),
            avg("ntb-ucb", horizon),
        ),
    );
}

#[test]
fn acceptance_6_regret_bound_sanity() {
    let grid = 50usize;
    let batch = 5usize;
    let horizon = 100usize;
    let delta = 0.05;
    let noise_variance = 0.025;
    let set = Arc::new(DecisionSet::grid(&[(0.0, 1.0)], &[grid]).unwrap());
    let kernel = Bench::kernel();
    let c = infogain::bound_c(&kernel, noise_variance, &set, batch, BoundCMode::Raw).unwrap();
    let confidence = ConfidenceParams::new(
        Regime::FiniteDecisions { num_decisions: grid },
        delta,
        c,
    )
    .unwrap();
    // horizon >= |D|: the greedy curve covers the whole set, so the gain
    // value is the exact total information of the set.
    let gamma = infogain::greedy_gamma(&kernel, noise_variance, &set, grid, &[]).unwrap();
    let bound = confidence.regret_bound(horizon, gamma.upper(), noise_variance).unwrap();
    let setup = ExperimentSetup {
        kernel,
        set,
        source: InstanceSource::SampledPerTrial,
        policy: PolicyKind::GpBucb,
        schedule: FeedbackSchedule::batch(batch).unwrap(),
        confidence,
        horizon,
        trials: 100,
        noise_variance,
        noise: NoiseKind::Gaussian,
        t_init: None,
        master_seed: 606,
    };
    let out = harness::run_experiment(&setup).unwrap();
    assert!(out.failures.is_empty());
    let mut within = 0u32;
    let mut worst: f64 = 0.0;
    for trace in out.traces.iter().flatten() {
        let realized = trace.cumulative_regret();
        worst = worst.max(realized);
        if realized <= bound {
            within += 1;
        }
    }
    criterion(
        6,
        "regret bound sanity",
        within >= 95,
        &format!(
            "{within}/100 trials under the bound {bound:.3e} (C = {c:.3}, worst realized {worst:.3})"
        ),
    );
}

#[test]
fn acceptance_7_information_identities() {
    let mut rng = StdRng::seed_from_u64(707);
    // Pinned single-point value: k(x, x) = 1, noise 1 gives ln(2)/2.
    let unit = KernelSpec::new(KernelFamily::RbfArd, 1.0, vec![1.0]).unwrap();
    let single = DecisionSet::new(vec![vec![0.0]]).unwrap();
    let mi1 = infogain::mutual_information(&unit, 1.0, &single, &[0]).unwrap();
    let pinned_ok = (mi1 - 0.5 * 2f64.ln()).abs() < 1e-12;
    let empty_ok = infogain::mutual_information(&unit, 1.0, &single, &[]).unwrap() == 0.0;

    let mut chain_worst: f64 = 0.0;
    let mut monotone_ok = true;
    for _ in 0..100 {
        let dim = rng.random_range(1..=2);
        let spec = random_spec(&mut rng, dim);
        let noise = rng.random_range(0.05..1.0);
        let set = DecisionSet::new(
            (0..8)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap();
        let a = [0usize, 1, 2];
        let s = [3usize, 4, 5];
        let joint: Vec<usize> = s.iter().chain(a.iter()).copied().collect();
        let lhs = infogain::mutual_information(&spec, noise, &set, &joint).unwrap();
        let rhs = infogain::mutual_information(&spec, noise, &set, &s).unwrap()
            + infogain::conditional_mutual_information(&spec, noise, &set, &a, &s).unwrap();
        chain_worst = chain_worst.max((lhs - rhs).abs());
        let base = infogain::conditional_mutual_information(&spec, noise, &set, &a, &s).unwrap();
        let bigger =
            infogain::conditional_mutual_information(&spec, noise, &set, &a, &[3, 4, 5, 6])
                .unwrap();
        monotone_ok &= bigger <= base + 1e-9;
    }
    criterion(
        7,
        "information identities",
        pinned_ok && empty_ok && chain_worst <= 1e-9 && monotone_ok,
        &format!(
            "half-log-2 single point, empty-set zero, chain rule within {chain_worst:.3e}, \
             conditioning monotone on 100 draws"
        ),
    );
}

#[test]
fn acceptance_8_run_determinism() {
    let setup = ExperimentSetup {
        kernel: Bench::kernel(),
        set: Arc::new(DecisionSet::grid(&[(0.0, 1.0)], &[200]).unwrap()),
        source: InstanceSource::SampledPerTrial,
        policy: PolicyKind::GpBucbLazy,
        schedule: FeedbackSchedule::batch(10).unwrap(),
        confidence: ConfidenceParams::new(
            Regime::FiniteDecisions { num_decisions: 200 },
            0.1,
            0.0,
        )
        .unwrap(),
        horizon: 40,
        trials: 10,
        noise_variance: 0.025,
        noise: NoiseKind::Gaussian,
        t_init: None,
        master_seed: 808,
    };
    let render = || {
        let out = harness::run_experiment(&setup).unwrap();
        let mut trials = Vec::new();
        let mut aggregate = Vec::new();
        harness::write_trials_csv(&mut trials, &out.traces).unwrap();
        harness::write_aggregate_csv(&mut aggregate, &out.aggregate).unwrap();
        (trials, aggregate)
    };
    let (t1, a1) = render();
    let (t2, a2) = render();
    criterion(
        8,
        "run determinism",
        t1 == t2 && a1 == a2,
        &format!(
            "two runs, byte-identical CSVs ({} + {} bytes)",
            t1.len(),
            a1.len()
        ),
    );
}
