//! Quantitative comparison of the classical and learned solvers: error
//! maps, summary metrics, row profiles, error spectra, self-test tables,
//! and CSV/PGM emission.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::estimator::{pwppe_solve, self_test_histogram};
use crate::net::Network;
use crate::pgm;
use crate::phase::{wrap, PhaseKind, PhaseMap};
use crate::pwls::pwls_solve;
use crate::scene::SceneSpec;
use crate::stack::FringeStack;
use crate::synth::{synth, ground_truth_phase, PatternKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Pwls,
    Pwppe,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Pwls => "PWLS",
            Method::Pwppe => "PWPPE",
        })
    }
}

/// Everything the harness measures for one method on one scene.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub method: Method,
    /// Mean squared wrapped-phase error over valid pixels, rad^2.
    pub mse: f64,
    /// sqrt(mse), rad.
    pub rms: f64,
    pub max_abs: f64,
    /// Wrapped per-pixel errors (estimate - truth).
    pub error_map: PhaseMap,
    /// The row whose profile is reported.
    pub profile_row: usize,
    /// Per-column error along `profile_row`; NaN where invalid.
    pub row_profile: Vec<f64>,
    /// Amplitude of the row-error spectrum at 6x the fringe frequency,
    /// normalized by the DC-excluded spectral median.
    pub spectrum_peak_at_6f: f64,
    /// (band, proportion) pairs from the self-test map (learned method only).
    pub selftest_bands: Option<Vec<(f64, f64)>>,
}

/// Wrapped per-pixel difference `wrap(estimate - truth)`, masked where
/// either input is invalid.
pub fn phase_error(estimate: &PhaseMap, truth: &PhaseMap) -> Result<PhaseMap> {
    if estimate.values.dim() != truth.values.dim() {
        return Err(Error::Shape(format!(
            "estimate is {:?} but truth is {:?}",
            estimate.values.dim(),
            truth.values.dim()
        )));
    }
    let values = Array2::from_shape_fn(estimate.values.dim(), |idx| {
        wrap(estimate.values[idx] - truth.values[idx])
    });
    let mask = Array2::from_shape_fn(estimate.values.dim(), |idx| {
        estimate.mask[idx] && truth.mask[idx]
    });
    PhaseMap::new(values, PhaseKind::Wrapped, mask)
}

/// (mse, rms, max_abs) over the valid pixels of an error map.
pub fn error_metrics(err: &PhaseMap) -> Result<(f64, f64, f64)> {
    let mut n = 0usize;
    let mut ss = 0.0;
    let mut max_abs: f64 = 0.0;
    for (v, &m) in err.values.iter().zip(err.mask.iter()) {
        if m {
            n += 1;
            ss += v * v;
            max_abs = max_abs.max(v.abs());
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput("error map has no valid pixels".into()));
    }
    let mse = ss / n as f64;
    Ok((mse, mse.sqrt(), max_abs))
}

/// Single-sided amplitude spectrum of a profile (mean removed, invalid
/// samples zero-filled): `2*|X_k|/W` for bins `1..W/2`.
pub fn amplitude_spectrum(profile: &[f64]) -> Vec<f64> {
    let w = profile.len();
    let finite: Vec<f64> = profile.iter().map(|v| if v.is_finite() { *v } else { 0.0 }).collect();
    let n_finite = profile.iter().filter(|v| v.is_finite()).count().max(1);
    let mean = finite.iter().sum::<f64>() / n_finite as f64;
    let mut buf: Vec<Complex<f64>> = profile
        .iter()
        .map(|v| Complex::new(if v.is_finite() { v - mean } else { 0.0 }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(w).process(&mut buf);
    (1..w / 2).map(|k| 2.0 * buf[k].norm() / w as f64).collect()
}

/// Spectral amplitude at 6x the fringe frequency (nearest integer bin),
/// normalized by the median of the DC-excluded spectrum.
pub fn spectrum_peak_at_6f(profile: &[f64], period: f64) -> Result<f64> {
    let w = profile.len();
    let bin = (6.0 * w as f64 / period).round() as usize;
    if bin == 0 || bin >= w / 2 {
        return Err(Error::Config(format!(
            "6x fringe frequency (bin {bin}) is outside the {w}-sample spectrum"
        )));
    }
    let spectrum = amplitude_spectrum(profile);
    let mut sorted = spectrum.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let peak = spectrum[bin - 1];
    if median > 0.0 {
        Ok(peak / median)
    } else {
        Ok(if peak > 0.0 { f64::INFINITY } else { 0.0 })
    }
}

/// Self-test tolerance bands reported by default.
pub const DEFAULT_BANDS: [f64; 4] = [0.01, 0.05, 0.1, 0.12];

#[derive(Clone, Debug)]
pub struct CompareOptions {
    /// Row for the profile; defaults to the middle row.
    pub row: Option<usize>,
    /// Restrict metrics to these pixels (e.g. a held-out split).
    pub eval_mask: Option<Array2<bool>>,
    pub selftest_bands: Vec<f64>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            row: None,
            eval_mask: None,
            selftest_bands: DEFAULT_BANDS.to_vec(),
        }
    }
}

/// Runs both solvers against the truth and fills a report for each.
/// The stack must carry scene provenance (for the fringe period).
pub fn compare(
    stack: &FringeStack,
    truth: &PhaseMap,
    net: &Network,
    opts: &CompareOptions,
) -> Result<(EvalReport, EvalReport)> {
    let period = stack
        .period()
        .ok_or_else(|| Error::Config("stack has no scene provenance with a fringe period".into()))?;
    let row = opts.row.unwrap_or(stack.height() / 2);
    if row >= stack.height() {
        return Err(Error::Config(format!(
            "profile row {row} is outside the {}-row image",
            stack.height()
        )));
    }

    let pwls_map = pwls_solve(stack)?;
    let (pwppe_map, selftest) = pwppe_solve(stack, net)?;

    let pwls_report = report_for(
        Method::Pwls,
        &pwls_map,
        truth,
        row,
        period,
        opts.eval_mask.as_ref(),
        None,
    )?;
    let bands = self_test_histogram(&selftest, &opts.selftest_bands)?;
    let pwppe_report = report_for(
        Method::Pwppe,
        &pwppe_map,
        truth,
        row,
        period,
        opts.eval_mask.as_ref(),
        Some(
            opts.selftest_bands
                .iter()
                .copied()
                .zip(bands)
                .collect::<Vec<_>>(),
        ),
    )?;
    Ok((pwls_report, pwppe_report))
}

fn report_for(
    method: Method,
    estimate: &PhaseMap,
    truth: &PhaseMap,
    row: usize,
    period: f64,
    eval_mask: Option<&Array2<bool>>,
    selftest_bands: Option<Vec<(f64, f64)>>,
) -> Result<EvalReport> {
    let mut err = phase_error(estimate, truth)?;
    // The profile always uses the full row; the eval mask only gates the
    // summary metrics.
    let row_profile: Vec<f64> = (0..err.width())
        .map(|x| {
            if err.mask[[row, x]] {
                err.values[[row, x]]
            } else {
                f64::NAN
            }
        })
        .collect();
    let spectrum = spectrum_peak_at_6f(&row_profile, period)?;
    if let Some(extra) = eval_mask {
        if extra.dim() != err.values.dim() {
            return Err(Error::Shape("eval mask dimensions differ from the image".into()));
        }
        let combined = Array2::from_shape_fn(err.values.dim(), |idx| err.mask[idx] && extra[idx]);
        err.mask = combined;
    }
    let (mse, rms, max_abs) = error_metrics(&err)?;
    Ok(EvalReport {
        method,
        mse,
        rms,
        max_abs,
        error_map: err,
        profile_row: row,
        row_profile,
        spectrum_peak_at_6f: spectrum,
        selftest_bands,
    })
}

/// A named scene under evaluation.
#[derive(Clone, Debug)]
pub struct SceneVariation {
    pub name: String,
    pub scene: SceneSpec,
}

/// The four standard generalization analogs of a base scene: a defocus
/// change, two calibration-plate pose changes, and an exposure halving
/// (half intensity, and with it half the recorded noise).
pub fn standard_variations(base: &SceneSpec) -> Vec<SceneVariation> {
    let defocus = SceneSpec {
        defocus_sigma: (1.5, 3.0),
        seed: base.seed.wrapping_add(101),
        ..base.clone()
    };
    let pose_tilt = SceneSpec {
        phase_plane: (base.phase_plane.0, base.phase_plane.1 + 0.0025, base.phase_plane.2 + 0.8),
        seed: base.seed.wrapping_add(102),
        ..base.clone()
    };
    let yaw_period = base.period * 17.0 / 16.0;
    let pose_yaw = SceneSpec {
        period: yaw_period,
        phase_plane: (
            std::f64::consts::TAU / yaw_period,
            base.phase_plane.1,
            base.phase_plane.2 + 0.4,
        ),
        seed: base.seed.wrapping_add(103),
        ..base.clone()
    };
    let intensity = SceneSpec {
        background: base.background * 0.5,
        modulation: base.modulation * 0.5,
        noise_sigma: base.noise_sigma * 0.5,
        seed: base.seed.wrapping_add(104),
        ..base.clone()
    };
    vec![
        SceneVariation { name: "defocus".into(), scene: defocus },
        SceneVariation { name: "pose_tilt".into(), scene: pose_tilt },
        SceneVariation { name: "pose_yaw".into(), scene: pose_yaw },
        SceneVariation { name: "intensity".into(), scene: intensity },
    ]
}

/// Evaluates both methods on the trained scene and on each variation,
/// without retraining. Truth is the analytic plane of each scene.
pub fn generalization_sweep(
    base: &SceneSpec,
    pattern: PatternKind,
    variations: &[SceneVariation],
    net: &Network,
) -> Result<Vec<(String, EvalReport, EvalReport)>> {
    let mut rows = Vec::with_capacity(variations.len() + 1);
    let trained = evaluate_scene(base, pattern, net)?;
    rows.push(("trained".to_string(), trained.0, trained.1));
    for variation in variations {
        let pair = evaluate_scene(&variation.scene, pattern, net)?;
        rows.push((variation.name.clone(), pair.0, pair.1));
    }
    Ok(rows)
}

fn evaluate_scene(
    scene: &SceneSpec,
    pattern: PatternKind,
    net: &Network,
) -> Result<(EvalReport, EvalReport)> {
    let stack = synth(scene, pattern)?;
    let truth = ground_truth_phase(scene)?;
    compare(&stack, &truth, net, &CompareOptions::default())
}

fn fmt9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Writes the report artifact set into `out_dir`:
/// `table1.csv` (per-method metrics), `table2.csv` (self-test bands),
/// `row_profile.csv` (per-column error of the chosen row for both
/// methods), and 16-bit `error_map_{method}.pgm` images with `.scale`
/// sidecars recording the radian range mapped onto the gray range.
pub fn emit(reports: &(EvalReport, EvalReport), out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let (pwls, pwppe) = reports;

    let mut table1 = String::from("method,mse_rad2,rms_rad,max_abs_rad,spectrum_peak_6f_rel\n");
    for r in [pwls, pwppe] {
        table1.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method,
            fmt9(r.mse),
            fmt9(r.rms),
            fmt9(r.max_abs),
            fmt9(r.spectrum_peak_at_6f)
        ));
    }
    fs::write(out_dir.join("table1.csv"), table1)?;

    let mut table2 = String::from("band,proportion\n");
    if let Some(bands) = &pwppe.selftest_bands {
        for (band, prop) in bands {
            table2.push_str(&format!("{},{}\n", fmt9(*band), fmt9(*prop)));
        }
    }
    fs::write(out_dir.join("table2.csv"), table2)?;

    let mut profile = String::from("x,pwls_error_rad,pwppe_error_rad\n");
    for x in 0..pwls.row_profile.len() {
        profile.push_str(&format!(
            "{},{},{}\n",
            x,
            fmt9(pwls.row_profile[x]),
            fmt9(pwppe.row_profile[x])
        ));
    }
    fs::write(out_dir.join("row_profile.csv"), profile)?;

    for r in [pwls, pwppe] {
        let name = format!("error_map_{}", r.method.to_string().to_lowercase());
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (v, &m) in r.error_map.values.iter().zip(r.error_map.mask.iter()) {
            if m {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = 0.0;
            hi = 0.0;
        }
        pgm::write_pgm16_scaled(&out_dir.join(format!("{name}.pgm")), &r.error_map.values, lo, hi)?;
        let scale = format!("min_rad={}\nmax_rad={}\n", fmt9(lo), fmt9(hi));
        fs::write(out_dir.join(format!("{name}.scale")), scale)?;
    }
    Ok(())
}

/// Table-1-shaped sweep CSV: one row per method, one mse column per scene.
pub fn emit_sweep_csv(rows: &[(String, EvalReport, EvalReport)], path: &Path) -> Result<()> {
    let mut header = String::from("method");
    for (name, _, _) in rows {
        header.push(',');
        header.push_str(name);
        header.push_str("_mse_rad2");
    }
    header.push('\n');
    let mut pwls_line = String::from("PWLS");
    let mut pwppe_line = String::from("PWPPE");
    for (_, pwls, pwppe) in rows {
        pwls_line.push(',');
        pwls_line.push_str(&fmt9(pwls.mse));
        pwppe_line.push(',');
        pwppe_line.push_str(&fmt9(pwppe.mse));
    }
    fs::write(path, format!("{header}{pwls_line}\n{pwppe_line}\n"))?;
    Ok(())
}

/// Writes the training loss history as `epoch,mse` rows.
pub fn write_loss_history_csv(history: &[f64], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "epoch,mse")?;
    for (i, mse) in history.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, fmt9(*mse))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn uniform_map(values: Array2<f64>) -> PhaseMap {
        PhaseMap::full(values, PhaseKind::Wrapped)
    }

    #[test]
    fn phase_error_examples() {
        let truth = uniform_map(Array2::from_shape_fn((4, 6), |(y, x)| {
            wrap(0.4 * x as f64 - 0.2 * y as f64)
        }));
        let same = phase_error(&truth, &truth).unwrap();
        assert!(same.values.iter().all(|&v| v == 0.0));

        let shifted = uniform_map(truth.values.mapv(|v| wrap(v + TAU)));
        let err = phase_error(&shifted, &truth).unwrap();
        assert!(err.values.iter().all(|&v| v.abs() < 1e-12));

        let offset = uniform_map(truth.values.mapv(|v| wrap(v + 0.05)));
        let err = phase_error(&offset, &truth).unwrap();
        assert!(err.values.iter().all(|&v| (v - 0.05).abs() < 1e-12));
    }

    #[test]
    fn phase_error_is_antisymmetric() {
        let a = uniform_map(Array2::from_shape_fn((5, 5), |(y, x)| {
            wrap(1.3 * x as f64 + 0.7 * y as f64)
        }));
        let b = uniform_map(Array2::from_shape_fn((5, 5), |(y, x)| {
            wrap(-0.4 * x as f64 + 0.1 * y as f64 + 3.0)
        }));
        let ab = phase_error(&a, &b).unwrap();
        let ba = phase_error(&b, &a).unwrap();
        for (x, y) in ab.values.iter().zip(ba.values.iter()) {
            assert!(wrap(x + y).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_are_consistent_with_the_error_map() {
        let err = uniform_map(Array2::from_shape_fn((8, 8), |(y, x)| {
            0.01 * ((x + 2 * y) as f64).sin()
        }));
        let (mse, rms, max_abs) = error_metrics(&err).unwrap();
        let recomputed: f64 =
            err.values.iter().map(|v| v * v).sum::<f64>() / err.values.len() as f64;
        assert!((mse - recomputed).abs() < 1e-15);
        assert!((rms - mse.sqrt()).abs() < 1e-15);
        assert!(max_abs <= 0.01 + 1e-12);
    }

    #[test]
    fn spectrum_picks_out_an_injected_tone() {
        // 512 samples, period 32 -> 6f bin is 96.
        let w = 512;
        let profile: Vec<f64> = (0..w)
            .map(|x| 0.05 * (TAU * 96.0 * x as f64 / w as f64).sin() + 1e-4 * (x as f64).cos())
            .collect();
        let peak = spectrum_peak_at_6f(&profile, 32.0).unwrap();
        assert!(peak > 50.0, "normalized peak {peak}");

        let flat: Vec<f64> = (0..w).map(|x| 1e-4 * (0.7 * x as f64).cos()).collect();
        let quiet = spectrum_peak_at_6f(&flat, 32.0).unwrap();
        assert!(quiet < 10.0, "flat profile peak {quiet}");
    }

    #[test]
    fn spectrum_guards_short_profiles() {
        // 16 samples of an 8-px period: the 6f bin (12) exceeds Nyquist (8).
        let profile = vec![0.0; 16];
        assert!(spectrum_peak_at_6f(&profile, 8.0).is_err());
    }

    #[test]
    fn emit_writes_parseable_artifacts_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let truth = uniform_map(Array2::from_shape_fn((64, 128), |(y, x)| {
            wrap(TAU / 32.0 * x as f64 + 0.01 * y as f64)
        }));
        let est = uniform_map(truth.values.mapv(|v| {
            wrap(v + 0.02 * (6.0 * v).sin())
        }));
        let report = report_for(Method::Pwls, &est, &truth, 32, 32.0, None, None).unwrap();
        let mut pwppe = report_for(Method::Pwppe, &est, &truth, 32, 32.0, None, None).unwrap();
        pwppe.selftest_bands = Some(vec![(0.01, 0.74), (0.1, 0.96)]);
        let pair = (report, pwppe);

        emit(&pair, dir.path()).unwrap();
        let first: Vec<(String, Vec<u8>)> = ["table1.csv", "table2.csv", "row_profile.csv"]
            .iter()
            .map(|n| (n.to_string(), fs::read(dir.path().join(n)).unwrap()))
            .collect();

        let profile = fs::read_to_string(dir.path().join("row_profile.csv")).unwrap();
        assert_eq!(profile.lines().count(), 128 + 1);
        assert!(dir.path().join("error_map_pwls.pgm").exists());
        assert!(dir.path().join("error_map_pwppe.scale").exists());

        emit(&pair, dir.path()).unwrap();
        for (name, bytes) in first {
            assert_eq!(fs::read(dir.path().join(&name)).unwrap(), bytes, "{name} changed");
        }
    }

    #[test]
    fn wrapped_difference_handles_the_seam() {
        let a = uniform_map(Array2::from_elem((1, 1), PI - 0.01));
        let b = uniform_map(Array2::from_elem((1, 1), -PI + 0.01));
        let err = phase_error(&a, &b).unwrap();
        assert!((err.values[[0, 0]] + 0.02).abs() < 1e-12);
    }
}
