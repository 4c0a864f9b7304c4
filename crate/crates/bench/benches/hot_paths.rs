use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use tdrl_core::envs::{GridChain, GridChainConfig};
use tdrl_core::lexicomp::Comparator;
use tdrl_core::maxent::{sac_update, ExactPolicy, GaussianPolicy, ReplayBuffer, SacConfig, SoftCritic};
use tdrl_core::nn::{Activation, Mlp};
use tdrl_core::{TestOutcome, TestStats, TrajectoryId};

fn mlp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = Mlp::new(&[6, 64, 64, 1], Activation::Relu, Activation::Identity, &mut rng);
    let x = Array2::from_shape_fn((128, 6), |_| rng.random_range(-1.0..1.0));
    let upstream = Array2::from_elem((128, 1), 1.0 / 128.0);
    c.bench_function("mlp_forward_128x64", |b| b.iter(|| net.forward_batch(black_box(x.view())).unwrap()));
    c.bench_function("mlp_forward_backward_128x64", |b| {
        b.iter(|| {
            let tape = net.forward_tape(black_box(x.view())).unwrap();
            net.backward(&tape, upstream.view()).unwrap()
        })
    });
}

fn sac(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (ds, da) = (4, 2);
    let policy = GaussianPolicy::new(ds, vec![-1.0; da], vec![1.0; da], 64, 2, 0.1, &mut rng);
    let critic = SoftCritic::new(ds, da, 64, 2, 0.99, 0.005, &mut rng);
    let mut replay = ReplayBuffer::new(10_000, ds, da);
    for _ in 0..10_000 {
        let s: Vec<f64> = (0..ds).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..da).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s2: Vec<f64> = (0..ds).map(|_| rng.random_range(-1.0..1.0)).collect();
        replay.push(&s, &a, &s2, rng.random_range(-1.0..1.0), false).unwrap();
    }
    let batch = replay.sample(128, &mut rng).unwrap();
    let config = SacConfig::default();
    c.bench_function("sac_update_batch128_hidden64", |b| {
        b.iter_batched(
            || (policy.clone(), critic.clone()),
            |(mut p, mut q)| sac_update(&mut p, &mut q, &batch, &config, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn compare(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut stats = TestStats::new(3, 3, 1000);
    for _ in 0..1000 {
        let bits: Vec<bool> = (0..3).map(|_| rng.random_bool(0.5)).collect();
        let values: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        stats.record(&bits, &values);
    }
    let outcomes: Vec<TestOutcome> = (0..256)
        .map(|k| TestOutcome {
            trajectory_id: TrajectoryId(k),
            passfail: (0..3).map(|_| rng.random_bool(0.5)).collect(),
            indicative: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect();
    c.bench_function("comparator_new_from_1000_history", |b| b.iter(|| Comparator::new(black_box(&stats))));
    let comparator = Comparator::new(&stats);
    c.bench_function("compare_256_pairs", |b| {
        b.iter(|| {
            outcomes
                .windows(2)
                .map(|w| comparator.compare(&w[0], &w[1]).unwrap().value())
                .sum::<f64>()
        })
    });
}

fn enumerate(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let env = GridChain::new(GridChainConfig {
        states: 7,
        actions: 3,
        horizon: 6,
        slip: 0.25,
    })
    .unwrap();
    let policy = ExactPolicy::random(6, 7, 3, &mut rng);
    c.bench_function("enumerate_gridchain_7x3_h6_slip", |b| {
        b.iter(|| env.enumerate_trajectories(black_box(&policy)).unwrap())
    });
}

criterion_group!(benches, mlp, sac, compare, enumerate);
criterion_main!(benches);
