//! Selection-rule benchmarks: the lazy batch rule against the eager one,
//! and the posterior primitives they are built on.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use gpbucb::confidence::{ConfidenceParams, Regime};
use gpbucb::harness::{self, NoiseKind, TrialConfig};
use gpbucb::kernel::{DecisionSet, KernelFamily, KernelSpec, MaternSmoothness};
use gpbucb::policy::PolicyKind;
use gpbucb::posterior::GpPosterior;
use gpbucb::schedule::FeedbackSchedule;

fn kernel() -> KernelSpec {
    KernelSpec::new(KernelFamily::Matern, 1.0, vec![0.1])
        .unwrap()
        .with_smoothness(MaternSmoothness::FiveHalves)
}

fn trial_config(n: usize, policy: PolicyKind, horizon: usize) -> TrialConfig {
    TrialConfig {
        kernel: kernel(),
        policy,
        schedule: FeedbackSchedule::batch(10).unwrap(),
        confidence: ConfidenceParams::new(
            Regime::FiniteDecisions { num_decisions: n },
            0.1,
            0.0,
        )
        .unwrap(),
        horizon,
        noise_variance: 0.025,
        noise: NoiseKind::Gaussian,
        poison_embargo: false,
    }
}

fn bench_batch_selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_trial");
    group.sample_size(10);
    for &n in &[250usize, 1000] {
        let set = Arc::new(DecisionSet::grid(&[(0.0, 1.0)], &[n]).unwrap());
        let instance = harness::sample_gp_instance(&kernel(), set, 7).unwrap();
        let horizon = 60;
        for (label, policy) in [("eager", PolicyKind::GpBucb), ("lazy", PolicyKind::GpBucbLazy)] {
            group.bench_with_input(BenchmarkId::new(label, n), &n, |b, _| {
                let config = trial_config(n, policy, horizon);
                b.iter(|| harness::run_trial(black_box(&instance), &config, 13).unwrap());
            });
        }
    }
    group.finish();
}

fn bench_posterior_primitives(c: &mut Criterion) {
    let set = DecisionSet::grid(&[(0.0, 1.0)], &[200]).unwrap();
    let mut gp = GpPosterior::new(kernel(), 0.025).unwrap();
    for i in 0..100 {
        gp.condition_on_observation(set.point(i * 2), (i as f64 * 0.37).sin())
            .unwrap();
    }
    c.bench_function("variance_query_100pts", |b| {
        let x = [0.437];
        b.iter(|| gp.posterior_variance(black_box(&x)).unwrap());
    });
    c.bench_function("incremental_condition_100pts", |b| {
        b.iter(|| {
            let mut fresh = gp.clone();
            fresh.condition_on_observation(black_box(&[0.91]), 0.2).unwrap();
            fresh
        });
    });
}

criterion_group!(benches, bench_batch_selection, bench_posterior_primitives);
criterion_main!(benches);
