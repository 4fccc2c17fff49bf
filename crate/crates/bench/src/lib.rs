//! Shared fixtures for the pipeline benchmarks.

use pwppe_core::*;

/// A mid-sized binary-defocused scene for throughput measurements.
pub fn bench_scene() -> SceneSpec {
    SceneSpec {
        width: 256,
        height: 256,
        ..SceneSpec::desk_default()
    }
}

pub fn bench_stack() -> FringeStack {
    synth_binary_defocused(&bench_scene()).expect("valid bench scene")
}

/// A small trained-shape network (random weights are fine for timing).
pub fn bench_network(seed: u64) -> Network {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Network::init(Network::phase_estimator_dims(6), InputMode::Plain, &mut rng)
        .expect("valid dims")
}

/// A dataset sized for one optimizer-step benchmark epoch.
pub fn bench_dataset() -> Dataset {
    let scene = SceneSpec {
        width: 64,
        height: 64,
        ..SceneSpec::desk_default()
    };
    let stack = synth_binary_defocused(&scene).expect("valid scene");
    let truth = ground_truth_phase(&scene).expect("valid scene");
    build(
        &stack,
        &truth,
        &BuildOptions {
            mode: DatasetMode::Augmented,
            sample_fraction: 0.25,
            train_ratio: 0.5,
            seed: 1,
        },
    )
    .expect("buildable scene")
    .0
}
