use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use pwppe_bench::{bench_dataset, bench_network, bench_scene, bench_stack};
use pwppe_core::*;

fn bench_synth(c: &mut Criterion) {
    let scene = bench_scene();
    c.bench_function("synth_binary_defocused_256", |b| {
        b.iter(|| synth_binary_defocused(black_box(&scene)).unwrap())
    });
    c.bench_function("synth_sinusoidal_256", |b| {
        b.iter(|| synth_sinusoidal(black_box(&scene)).unwrap())
    });
}

fn bench_solvers(c: &mut Criterion) {
    let stack = bench_stack();
    let net = bench_network(7);
    c.bench_function("pwls_solve_256", |b| {
        b.iter(|| pwls_solve(black_box(&stack)).unwrap())
    });
    c.bench_function("pwppe_solve_256", |b| {
        b.iter(|| pwppe_solve(black_box(&stack), black_box(&net)).unwrap())
    });
}

fn bench_truth(c: &mut Criterion) {
    let stack = bench_stack();
    c.bench_function("make_ground_truth_256", |b| {
        b.iter(|| make_ground_truth(black_box(&stack)).unwrap())
    });
}

fn bench_training(c: &mut Criterion) {
    let data = bench_dataset();
    let cfg = TrainConfig {
        iterations: 1,
        target_mse: 1e-12,
        seed: 3,
        ..TrainConfig::default()
    };
    c.bench_function("train_epoch_6k_samples", |b| {
        b.iter(|| train(black_box(&data), black_box(&cfg)).unwrap())
    });
}

fn bench_augment(c: &mut Criterion) {
    let d = normalize(&[0.1, 0.5, 0.9, 0.8, 0.4, 0.05]).unwrap();
    c.bench_function("augment_single_pixel", |b| {
        b.iter(|| augment(black_box(&d), black_box(0.37)))
    });
}

criterion_group!(
    benches,
    bench_synth,
    bench_solvers,
    bench_truth,
    bench_training,
    bench_augment
);
criterion_main!(benches);
