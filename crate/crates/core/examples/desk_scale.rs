// Scratch experiment: default desk-scale pipeline timing and accuracy.

use std::time::Instant;

use pwppe_core::*;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let target: f64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2.5e-4);
    let iterations: usize = std::env::args()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10_000);
    let lr_final: Option<f64> = std::env::args().nth(4).and_then(|s| s.parse().ok());
    let defocus = (
        std::env::var("DEF_L")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(0.5),
        std::env::var("DEF_R")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(4.0),
    );
    let scene = SceneSpec {
        seed,
        defocus_sigma: defocus,
        noise_sigma: std::env::var("NOISE")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(0.01),
        ..SceneSpec::desk_default()
    };

    let t0 = Instant::now();
    let stack = synth_binary_defocused(&scene).unwrap();
    println!("synth: {:?}", t0.elapsed());

    let t0 = Instant::now();
    let labels = make_ground_truth(&stack).unwrap();
    let truth = ground_truth_phase(&scene).unwrap();
    let label_err = phase_error(&labels, &truth).unwrap();
    let (lmse, lrms, lmax) = error_metrics(&label_err).unwrap();
    println!(
        "labels: {:?}  label-vs-analytic mse {lmse:.3e} rms {lrms:.3e} max {lmax:.3e}",
        t0.elapsed()
    );

    let t0 = Instant::now();
    let (train_set, test_set) = build(
        &stack,
        &labels,
        &BuildOptions {
            mode: std::env::var("MODE").ok().and_then(|s| s.parse().ok()).unwrap_or(DatasetMode::Augmented),
            sample_fraction: std::env::var("FRAC").ok().and_then(|s| s.parse().ok()).unwrap_or(0.01),
            train_ratio: 0.5,
            seed: seed + 10,
        },
    )
    .unwrap();
    println!(
        "build: {:?}  train {} test {}",
        t0.elapsed(),
        train_set.len(),
        test_set.len()
    );

    let t0 = Instant::now();
    let cfg = TrainConfig {
        iterations,
        target_mse: target,
        lr_final,
        learning_rate: std::env::var("LR")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(1e-3),
        optimizer: std::env::var("OPT")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(OptimizerKind::Adam),
        batch_size: std::env::var("BATCH")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(256),
        init_scale: std::env::var("INIT")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(1.0),
        seed: seed + 20,
    };
    let result = train(&train_set, &cfg).unwrap();
    println!(
        "train: {:?}  epochs {} final mse {:.3e} converged {:?}",
        t0.elapsed(),
        result.loss_history.len(),
        result.final_mse(),
        result.converged_at
    );
    for (i, mse) in result.loss_history.iter().enumerate() {
        if i < 10 || (i + 1) % 100 == 0 {
            println!("  epoch {:5}  mse {mse:.4e}", i + 1);
        }
    }

    let t0 = Instant::now();
    let heldout = test_set.pixel_mask(scene.width, scene.height);
    let opts = CompareOptions {
        eval_mask: Some(heldout),
        ..CompareOptions::default()
    };
    let (pwls_report, pwppe_report) = compare(&stack, &truth, &result.network, &opts).unwrap();
    println!("eval: {:?}", t0.elapsed());
    for r in [&pwls_report, &pwppe_report] {
        println!(
            "{}: mse {:.4e} rms {:.4e} max {:.4e} peak6f {:.2}",
            r.method, r.mse, r.rms, r.max_abs, r.spectrum_peak_at_6f
        );
    }
    if let Some(bands) = &pwppe_report.selftest_bands {
        println!("selftest: {bands:?}");
    }
    println!(
        "ratio pwppe/pwls = {:.3}",
        pwppe_report.mse / pwls_report.mse
    );

    // Boundary criterion: error rms near |phi|>3 vs global.
    let (est, _) = pwppe_solve(&stack, &result.network).unwrap();
    let err = phase_error(&est, &truth).unwrap();

    // Column-bucket diagnostics: where does the residual live?
    let w = scene.width;
    for bucket in 0..8 {
        let (x0, x1) = (bucket * w / 8, (bucket + 1) * w / 8);
        let mut ss = 0.0;
        let mut n = 0usize;
        for y in 0..scene.height {
            for x in x0..x1 {
                if err.mask[[y, x]] {
                    ss += err.values[[y, x]] * err.values[[y, x]];
                    n += 1;
                }
            }
        }
        println!(
            "  cols {x0:3}-{x1:3} (sigma {:.2}-{:.2})  pwppe rms {:.4e}",
            scene.sigma_at(x0 as f64),
            scene.sigma_at(x1 as f64 - 1.0),
            (ss / n as f64).sqrt()
        );
    }
    let mut near = (0.0, 0usize);
    let mut global = (0.0, 0usize);
    for ((e, &m), t) in err.values.iter().zip(err.mask.iter()).zip(truth.values.iter()) {
        if m {
            global = (global.0 + e * e, global.1 + 1);
            if t.abs() > 3.0 {
                near = (near.0 + e * e, near.1 + 1);
            }
        }
    }
    let near_rms = (near.0 / near.1 as f64).sqrt();
    let global_rms = (global.0 / global.1 as f64).sqrt();
    println!(
        "boundary: near rms {near_rms:.4e} ({} px) global {global_rms:.4e} ratio {:.3}",
        near.1,
        near_rms / global_rms
    );

    // Generalization sweep.
    let t0 = Instant::now();
    let variations = standard_variations(&scene);
    let rows = generalization_sweep(
        &scene,
        PatternKind::BinaryDefocused,
        &variations,
        &result.network,
    )
    .unwrap();
    println!("sweep: {:?}", t0.elapsed());
    for (name, pwls, pwppe) in &rows {
        println!(
            "  {name:10} pwls {:.4e}  pwppe {:.4e}  (pwppe/trained {:.3})",
            pwls.mse,
            pwppe.mse,
            pwppe.mse / rows[0].2.mse
        );
    }
}
