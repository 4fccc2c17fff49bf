//! Subcommand implementations. Every command is a pure function of its
//! inputs, flags and the seeds recorded in the config, so reruns produce
//! byte-identical artifacts.

use std::path::Path;

use pwppe_core::*;

use crate::config::ExperimentConfig;

pub fn cmd_synth(config: &ExperimentConfig, out: &Path, quantize_8bit: bool) -> Result<()> {
    let mut stack = synth(&config.scene, config.pattern)?;
    if quantize_8bit {
        stack = stack.quantize_8bit();
    }
    stack.save_dir(out)?;
    println!(
        "wrote {} {}x{} images (period {} px, seed {}) to {}",
        stack.n_steps(),
        stack.width(),
        stack.height(),
        config.scene.period,
        config.scene.seed,
        out.display()
    );
    Ok(())
}

pub fn cmd_truth(stack_dir: &Path, out: &Path) -> Result<()> {
    let stack = FringeStack::load_dir(stack_dir)?;
    let (truth, fit) = make_ground_truth_with_fit(&stack)?;
    truth.save(out)?;
    println!(
        "plane fit: a={:.6} rad/px, b={:.6} rad/px, c={:.6} rad, rms residual {:.6} rad",
        fit.a, fit.b, fit.c, fit.rms_residual
    );
    println!("wrote wrapped truth to {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_build(
    stack_dir: &Path,
    truth_path: &Path,
    mode: DatasetMode,
    fraction: f64,
    train_ratio: f64,
    seed: u64,
    out: &Path,
    csv: bool,
) -> Result<()> {
    let stack = FringeStack::load_dir(stack_dir)?;
    let truth = PhaseMap::load(truth_path)?;
    let opts = BuildOptions {
        mode,
        sample_fraction: fraction,
        train_ratio,
        seed,
    };
    let (train_set, test_set) = build(&stack, &truth, &opts)?;
    std::fs::create_dir_all(out)?;
    train_set.save(&out.join("train.ds"))?;
    test_set.save(&out.join("test.ds"))?;
    if csv {
        train_set.write_csv(&out.join("train.csv"))?;
        test_set.write_csv(&out.join("test.csv"))?;
    }
    println!(
        "wrote {} training and {} test samples ({}, seed {}) to {}",
        train_set.len(),
        test_set.len(),
        mode,
        seed,
        out.display()
    );
    Ok(())
}

pub fn cmd_train(dataset_path: &Path, config: &ExperimentConfig, out: &Path) -> Result<()> {
    let data = Dataset::load(dataset_path)?;
    let result = train(&data, &config.train)?;
    std::fs::create_dir_all(out)?;
    result.network.save(&out.join("weights.pwnn"))?;
    write_loss_history_csv(&result.loss_history, &out.join("loss_history.csv"))?;
    match result.converged_at {
        Some(epoch) => println!(
            "reached target mse {} at epoch {epoch} (final mse {:.6e})",
            config.train.target_mse,
            result.final_mse()
        ),
        None => println!(
            "stopped at the {}-epoch budget (final mse {:.6e})",
            config.train.iterations,
            result.final_mse()
        ),
    }
    println!("wrote weights and loss history to {}", out.display());
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    Pwls,
    Pwppe,
}

impl std::str::FromStr for SolveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pwls" => Ok(SolveMethod::Pwls),
            "pwppe" => Ok(SolveMethod::Pwppe),
            other => Err(Error::Config(format!(
                "unknown method {other:?}, expected pwls or pwppe"
            ))),
        }
    }
}

pub fn cmd_solve(
    stack_dir: &Path,
    weights: Option<&Path>,
    method: SolveMethod,
    out: &Path,
) -> Result<()> {
    let stack = FringeStack::load_dir(stack_dir)?;
    std::fs::create_dir_all(out)?;
    match method {
        SolveMethod::Pwls => {
            let map = pwls_solve(&stack)?;
            map.save(&out.join("phase.pmap"))?;
            println!("wrote PWLS phase to {}", out.join("phase.pmap").display());
        }
        SolveMethod::Pwppe => {
            let weights = weights.ok_or_else(|| {
                Error::Config("--weights is required unless --method pwls".into())
            })?;
            let net = Network::load(weights)?;
            let (map, selftest) = pwppe_solve(&stack, &net)?;
            map.save(&out.join("phase.pmap"))?;
            selftest.save(&out.join("selftest.pmap"))?;
            println!(
                "wrote PWPPE phase and self-test maps to {}",
                out.display()
            );
        }
    }
    Ok(())
}

pub fn cmd_eval(
    stack_dir: &Path,
    truth_path: &Path,
    weights: &Path,
    out: &Path,
    row: Option<usize>,
) -> Result<()> {
    let stack = FringeStack::load_dir(stack_dir)?;
    let truth = PhaseMap::load(truth_path)?;
    let net = Network::load(weights)?;
    let opts = CompareOptions {
        row,
        ..CompareOptions::default()
    };
    let reports = compare(&stack, &truth, &net, &opts)?;
    emit(&reports, out)?;
    print_report_pair(&reports);
    println!("wrote report set to {}", out.display());
    Ok(())
}

fn print_report_pair(reports: &(EvalReport, EvalReport)) {
    for r in [&reports.0, &reports.1] {
        println!(
            "{}: mse {:.6e} rad^2, rms {:.6e} rad, max {:.6e} rad, 6f peak {:.3}",
            r.method, r.mse, r.rms, r.max_abs, r.spectrum_peak_at_6f
        );
    }
}

/// End-to-end: synth -> truth -> build -> train -> solve -> eval (+ the
/// configured generalization sweep), all into one output directory.
pub fn cmd_repro(config: &ExperimentConfig, out_override: Option<&Path>) -> Result<()> {
    let out = out_override.unwrap_or(&config.eval.out_dir);
    std::fs::create_dir_all(out)?;

    let stack = synth(&config.scene, config.pattern)?;
    stack.save_dir(&out.join("stack"))?;

    let (labels, fit) = make_ground_truth_with_fit(&stack)?;
    labels.save(&out.join("truth.pmap"))?;
    println!(
        "plane fit: a={:.6}, b={:.6}, c={:.6}, rms residual {:.6}",
        fit.a, fit.b, fit.c, fit.rms_residual
    );

    let (train_set, test_set) = build(&stack, &labels, &config.dataset)?;
    train_set.save(&out.join("train.ds"))?;
    test_set.save(&out.join("test.ds"))?;
    println!(
        "dataset: {} train / {} test samples ({})",
        train_set.len(),
        test_set.len(),
        config.dataset.mode
    );

    let result = train(&train_set, &config.train)?;
    result.network.save(&out.join("weights.pwnn"))?;
    write_loss_history_csv(&result.loss_history, &out.join("loss_history.csv"))?;
    println!(
        "training: {} epochs, final mse {:.6e}",
        result.loss_history.len(),
        result.final_mse()
    );

    let (phase, selftest) = pwppe_solve(&stack, &result.network)?;
    phase.save(&out.join("phase.pmap"))?;
    selftest.save(&out.join("selftest.pmap"))?;

    // Held-out evaluation: metrics over the test split's pixels only,
    // scored against the analytic truth the simulator knows.
    let analytic = ground_truth_phase(&config.scene)?;
    let heldout = test_set.pixel_mask(stack.width(), stack.height());
    let opts = CompareOptions {
        row: config.eval.row,
        eval_mask: Some(heldout),
        ..CompareOptions::default()
    };
    let reports = compare(&stack, &analytic, &result.network, &opts)?;
    emit(&reports, out)?;
    print_report_pair(&reports);

    if !config.eval.variations.is_empty() {
        let variations: Vec<SceneVariation> = standard_variations(&config.scene)
            .into_iter()
            .filter(|v| config.eval.variations.contains(&v.name))
            .collect();
        let rows = generalization_sweep(&config.scene, config.pattern, &variations, &result.network)?;
        emit_sweep_csv(&rows, &out.join("sweep.csv"))?;
        for (name, pwls, pwppe) in &rows {
            println!(
                "sweep {name}: pwls mse {:.6e}, pwppe mse {:.6e}",
                pwls.mse, pwppe.mse
            );
        }
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
