//! Acceptance suite: one line per criterion, all evaluated in a single
//! ordered run so the three trained networks are shared across checks.
//!
//! Run with `cargo test -p pwppe-cli --test acceptance -- --nocapture`
//! to see the per-criterion PASS/FAIL lines and measured values.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pwppe_core::*;

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn record(outcomes: &mut Vec<Outcome>, id: usize, name: &'static str, pass: bool, detail: String) {
    println!(
        "criterion {:2}: {} — {} ({})",
        id,
        if pass { "PASS" } else { "FAIL" },
        name,
        detail
    );
    outcomes.push(Outcome {
        id,
        name,
        pass,
        detail,
    });
}

fn desk_scene(seed: u64) -> SceneSpec {
    SceneSpec {
        seed,
        ..SceneSpec::desk_default()
    }
}

struct SeedRun {
    final_train_mse: f64,
    epochs: usize,
    pwls: EvalReport,
    pwppe: EvalReport,
    network: Network,
    stack: FringeStack,
    truth: PhaseMap,
    heldout: Array2<bool>,
}

/// Pipeline for one seed: synthesize the default scene, label it from the
/// stack alone, build the augmented 1%-sampled dataset, train within the
/// 10k-iteration budget, and evaluate both methods on held-out pixels.
fn run_seed(seed: u64) -> SeedRun {
    let scene = desk_scene(seed);
    let stack = synth_binary_defocused(&scene).expect("synth");
    let labels = make_ground_truth(&stack).expect("labels");
    let truth = ground_truth_phase(&scene).expect("truth");
    let (train_set, test_set) = build(
        &stack,
        &labels,
        &BuildOptions {
            mode: DatasetMode::Augmented,
            sample_fraction: 0.01,
            train_ratio: 0.5,
            seed: seed + 10,
        },
    )
    .expect("build");
    let result = train(
        &train_set,
        &TrainConfig {
            iterations: 10_000,
            target_mse: 4.9e-4,
            lr_final: Some(1e-4),
            seed: seed + 20,
            ..TrainConfig::default()
        },
    )
    .expect("train");
    let heldout = test_set.pixel_mask(scene.width, scene.height);
    let opts = CompareOptions {
        eval_mask: Some(heldout.clone()),
        ..CompareOptions::default()
    };
    let (pwls, pwppe) = compare(&stack, &truth, &result.network, &opts).expect("compare");
    SeedRun {
        final_train_mse: result.final_mse(),
        epochs: result.loss_history.len(),
        pwls,
        pwppe,
        network: result.network,
        stack,
        truth,
        heldout,
    }
}

fn criterion_1_harmonic_cancellation(outcomes: &mut Vec<Outcome>) {
    let scene_for = |k: u32| SceneSpec {
        width: 96,
        height: 24,
        noise_sigma: 0.0,
        harmonics: vec![(k, 0.1)],
        ..desk_scene(1)
    };
    let mut detail = String::new();
    let mut pass = true;
    for k in [2u32, 3, 4, 6] {
        let scene = scene_for(k);
        let stack = synth_sinusoidal(&scene).expect("synth");
        let est = pwls_solve(&stack).expect("pwls");
        let truth = ground_truth_phase(&scene).expect("truth");
        let err = phase_error(&est, &truth).expect("error");
        let worst = err.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        pass &= worst <= 1e-10;
        detail.push_str(&format!("k{k}:{worst:.1e} "));
    }
    for k in [5u32, 7] {
        let scene = scene_for(k);
        let stack = synth_sinusoidal(&scene).expect("synth");
        let est = pwls_solve(&stack).expect("pwls");
        let truth = ground_truth_phase(&scene).expect("truth");
        let err = phase_error(&est, &truth).expect("error");
        let (_, rms, _) = error_metrics(&err).expect("metrics");
        pass &= rms > 1e-3;
        detail.push_str(&format!("k{k}:{rms:.1e} "));
    }
    record(outcomes, 1, "harmonic cancellation oracle", pass, detail);
}

/// Independent finite-difference oracle for the backward pass.
fn criterion_2_gradient_check(outcomes: &mut Vec<Outcome>) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for trial in 0..25 {
        let mut net_rng = ChaCha8Rng::seed_from_u64(500 + trial);
        let net = Network::init(
            Network::phase_estimator_dims(6),
            InputMode::Plain,
            &mut net_rng,
        )
        .expect("init");
        let input: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let target = (rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9));
        let (grads, _) = net.backward(&input, target).expect("backward");

        let loss_of = |n: &Network| {
            let (s, c) = n.forward(&input).expect("forward");
            0.5 * ((s - target.0).powi(2) + (c - target.1).powi(2))
        };
        // One random weight and one random bias per layer per trial.
        for layer in 0..3 {
            for is_bias in [false, true] {
                let h = 1e-6;
                let (analytic, numeric) = {
                    let mut plus = net.clone();
                    let mut minus = net.clone();
                    let analytic;
                    {
                        let (w_p, b_p) = plus.params_mut();
                        let (w_m, b_m) = minus.params_mut();
                        if is_bias {
                            let i = rng.random_range(0..b_p[layer].len());
                            analytic = grads.biases[layer][i];
                            b_p[layer][i] += h;
                            b_m[layer][i] -= h;
                        } else {
                            let i = rng.random_range(0..w_p[layer].len());
                            analytic = grads.weights[layer][i];
                            w_p[layer][i] += h;
                            w_m[layer][i] -= h;
                        }
                    }
                    (analytic, (loss_of(&plus) - loss_of(&minus)) / (2.0 * h))
                };
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    record(
        outcomes,
        2,
        "gradient correctness vs finite differences",
        worst <= 1e-5,
        format!("{checked} gradients over 25 nets, worst rel err {worst:.2e}"),
    );
}

fn criterion_9_augmentation_oracle(outcomes: &mut Vec<Outcome>) {
    let pwls_of_vector = |v: &[f64]| -> f64 {
        let shifts = FringeStack::uniform_shifts(v.len());
        let images = v.iter().map(|&x| Array2::from_elem((1, 1), x)).collect();
        let stack = FringeStack::new(images, shifts, None).expect("stack");
        pwls_solve(&stack).expect("pwls").values[[0, 0]]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let phi = rng.random_range(-PI..PI);
        let v: Vec<f64> = FringeStack::uniform_shifts(6)
            .iter()
            .map(|t| 0.5 + 0.4 * (phi + t).cos())
            .collect();
        let dn = normalize(&v).expect("normalize");
        for (vec, label, _) in augment(&dn, phi) {
            worst = worst.max(wrap(pwls_of_vector(&vec) - label).abs());
        }
    }
    record(
        outcomes,
        9,
        "augmentation consistency oracle (12 variants x 10^4 phases)",
        worst <= 1e-9,
        format!("worst |solver - label| = {worst:.2e}"),
    );
}

fn criterion_5_spectrum(outcomes: &mut Vec<Outcome>, run: &SeedRun) {
    let reduction = run.pwls.spectrum_peak_at_6f / run.pwppe.spectrum_peak_at_6f;
    record(
        outcomes,
        5,
        "6f periodic-error suppression >= 5x",
        reduction >= 5.0,
        format!(
            "pwls {:.2}, pwppe {:.2}, reduction {reduction:.2}x",
            run.pwls.spectrum_peak_at_6f, run.pwppe.spectrum_peak_at_6f
        ),
    );
}

fn criterion_6_selftest(outcomes: &mut Vec<Outcome>, run: &SeedRun) {
    let (_, selftest) = pwppe_solve(&run.stack, &run.network).expect("solve");
    let masked = SelfTestMap {
        values: selftest.values.clone(),
        mask: Array2::from_shape_fn(selftest.mask.dim(), |idx| {
            selftest.mask[idx] && run.heldout[idx]
        }),
    };
    let bands = [0.01, 0.05, 0.1, 0.12];
    let props = self_test_histogram(&masked, &bands).expect("histogram");
    let monotone = props.windows(2).all(|p| p[1] >= p[0]);
    let pass = props[2] >= 0.90 && monotone;
    record(
        outcomes,
        6,
        "self-test: >=90% within |v-1|<=0.1, monotone bands",
        pass,
        format!(
            "proportions {:?}",
            bands
                .iter()
                .zip(&props)
                .map(|(b, p)| format!("±{b}:{p:.3}"))
                .collect::<Vec<_>>()
        ),
    );
}

fn criterion_7_generalization(outcomes: &mut Vec<Outcome>, run: &SeedRun, scene: &SceneSpec) {
    let variations = standard_variations(scene);
    let rows = generalization_sweep(
        scene,
        PatternKind::BinaryDefocused,
        &variations,
        &run.network,
    )
    .expect("sweep");
    let trained_mse = rows[0].2.mse;
    let mut pass = true;
    let mut detail = String::new();
    let mut intensity_ratio = f64::NAN;
    for (name, pwls, pwppe) in &rows[1..] {
        let ordered = pwppe.mse < pwls.mse;
        pass &= ordered;
        if name == "intensity" {
            intensity_ratio = pwppe.mse / trained_mse;
            pass &= intensity_ratio <= 2.0;
        }
        detail.push_str(&format!(
            "{name}: pwppe {:.2e} vs pwls {:.2e}; ",
            pwppe.mse, pwls.mse
        ));
    }
    detail.push_str(&format!("intensity inflation {intensity_ratio:.3}x"));
    record(
        outcomes,
        7,
        "generalization sweep: pwppe < pwls on all analogs, intensity <= 2x",
        pass,
        detail,
    );
}

fn criterion_8_boundary(outcomes: &mut Vec<Outcome>, run: &SeedRun) {
    let (est, _) = pwppe_solve(&run.stack, &run.network).expect("solve");
    let err = phase_error(&est, &run.truth).expect("error");
    let mut near = (0.0, 0usize);
    let mut global = (0.0, 0usize);
    for ((e, &m), t) in err
        .values
        .iter()
        .zip(err.mask.iter())
        .zip(run.truth.values.iter())
    {
        if m {
            global = (global.0 + e * e, global.1 + 1);
            if t.abs() > 3.0 {
                near = (near.0 + e * e, near.1 + 1);
            }
        }
    }
    let near_rms = (near.0 / near.1 as f64).sqrt();
    let global_rms = (global.0 / global.1 as f64).sqrt();
    let ratio = near_rms / global_rms;
    record(
        outcomes,
        8,
        "no boundary effect at ±pi (ratio <= 1.5)",
        ratio <= 1.5,
        format!(
            "rms {near_rms:.4} over {} seam pixels vs global {global_rms:.4}, ratio {ratio:.3}",
            near.1
        ),
    );
}

fn criterion_10_determinism(outcomes: &mut Vec<Outcome>) {
    let bin = env!("CARGO_BIN_EXE_pwppe");
    let config = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/small.cfg")
        .canonicalize()
        .expect("small config exists");
    let tmp = tempfile::tempdir().expect("tempdir");
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for out in [&out_a, &out_b] {
        let status = Command::new(bin)
            .args(["repro", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .status()
            .expect("spawn pwppe repro");
        if !status.success() {
            record(
                outcomes,
                10,
                "cmd_repro determinism",
                false,
                format!("repro exited with {status}"),
            );
            return;
        }
    }
    let csvs = [
        "table1.csv",
        "table2.csv",
        "row_profile.csv",
        "sweep.csv",
        "loss_history.csv",
    ];
    let mut pass = true;
    let mut detail = String::new();
    for name in csvs {
        let a = std::fs::read(out_a.join(name)).expect("csv a");
        let b = std::fs::read(out_b.join(name)).expect("csv b");
        let same = a == b;
        pass &= same;
        detail.push_str(&format!("{name}:{} ", if same { "identical" } else { "DIFFERS" }));
    }
    record(outcomes, 10, "cmd_repro byte-identical CSVs", pass, detail);
}

#[test]
fn acceptance() {
    let mut outcomes = Vec::new();

    criterion_1_harmonic_cancellation(&mut outcomes);
    criterion_2_gradient_check(&mut outcomes);
    criterion_9_augmentation_oracle(&mut outcomes);

    let seeds = [1u64, 2, 3];
    let mut runs = Vec::new();
    for &seed in &seeds {
        let run = run_seed(seed);
        println!(
            "seed {seed}: {} epochs, train mse {:.4e}, pwls rms {:.4e}, pwppe rms {:.4e}",
            run.epochs, run.final_train_mse, run.pwls.rms, run.pwppe.rms
        );
        runs.push(run);
    }

    // Criterion 3: training convergence on the default augmented dataset.
    {
        let pass = runs
            .iter()
            .all(|r| r.final_train_mse <= 5e-4 && r.epochs <= 10_000);
        let detail = runs
            .iter()
            .zip(&seeds)
            .map(|(r, s)| format!("seed {s}: {:.3e} @{} epochs", r.final_train_mse, r.epochs))
            .collect::<Vec<_>>()
            .join(", ");
        record(
            &mut outcomes,
            3,
            "training MSE <= 5e-4 within 10k iterations (3 seeds)",
            pass,
            detail,
        );
    }

    // Criterion 4: held-out error headline.
    {
        let pass = runs
            .iter()
            .all(|r| r.pwppe.rms <= 0.03 && r.pwppe.mse <= 0.6 * r.pwls.mse);
        let detail = runs
            .iter()
            .zip(&seeds)
            .map(|(r, s)| {
                format!(
                    "seed {s}: rms {:.4}, mse ratio {:.3}",
                    r.pwppe.rms,
                    r.pwppe.mse / r.pwls.mse
                )
            })
            .collect::<Vec<_>>()
            .join(", ");
        record(
            &mut outcomes,
            4,
            "held-out pwppe rms <= 0.03 rad and mse <= 0.6x pwls (3 seeds)",
            pass,
            detail,
        );
    }

    criterion_5_spectrum(&mut outcomes, &runs[0]);
    criterion_6_selftest(&mut outcomes, &runs[0]);
    criterion_7_generalization(&mut outcomes, &runs[0], &desk_scene(seeds[0]));
    criterion_8_boundary(&mut outcomes, &runs[0]);
    criterion_10_determinism(&mut outcomes);

    outcomes.sort_by_key(|o| o.id);
    println!("\nacceptance summary:");
    for o in &outcomes {
        println!(
            "  criterion {:2} [{}] {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.name
        );
    }
    let failures: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| format!("criterion {} ({}): {}", o.id, o.name, o.detail))
        .collect();
    assert!(
        failures.is_empty(),
        "acceptance criteria failed:\n{}",
        failures.join("\n")
    );
}
