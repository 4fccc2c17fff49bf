//! Least-squares plane fitting and measured ground-truth construction.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::phase::{PhaseKind, PhaseMap};
use crate::pwls::pwls_solve;
use crate::stack::FringeStack;
use crate::unwrap::{rewrap, unwrap_rows};

/// Coefficients of `a*x + b*y + c` fitted to an unwrapped map, with the
/// RMS of the residuals over the valid pixels.
#[derive(Clone, Copy, Debug)]
pub struct PlaneFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rms_residual: f64,
}

impl PlaneFit {
    pub fn evaluate_at(&self, x: f64, y: f64) -> f64 {
        self.a * x + self.b * y + self.c
    }

    /// Evaluates the plane over a full grid as an unwrapped map.
    pub fn evaluate(&self, width: usize, height: usize) -> PhaseMap {
        let values = Array2::from_shape_fn((height, width), |(y, x)| {
            self.evaluate_at(x as f64, y as f64)
        });
        PhaseMap::full(values, PhaseKind::Unwrapped)
    }
}

/// Unweighted least squares over all valid pixels. Coordinates are centered
/// before solving so the 3x3 normal equations stay well conditioned.
pub fn fit_plane(map: &PhaseMap) -> Result<PlaneFit> {
    if map.kind != PhaseKind::Unwrapped {
        return Err(Error::Config("fit_plane expects an unwrapped map".into()));
    }
    let (h, w) = map.values.dim();
    let mut n = 0usize;
    let (mut sx, mut sy) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            if map.mask[[y, x]] {
                n += 1;
                sx += x as f64;
                sy += y as f64;
            }
        }
    }
    if n < 3 {
        return Err(Error::DegenerateFit(format!(
            "plane fit needs at least 3 valid pixels (got {n})"
        )));
    }
    let mx = sx / n as f64;
    let my = sy / n as f64;

    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut sxv, mut syv, mut sv) = (0.0, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            if !map.mask[[y, x]] {
                continue;
            }
            let dx = x as f64 - mx;
            let dy = y as f64 - my;
            let v = map.values[[y, x]];
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
            sxv += dx * v;
            syv += dy * v;
            sv += v;
        }
    }
    let det = sxx * syy - sxy * sxy;
    let scale = sxx.max(syy).max(1.0);
    if det <= 1e-12 * scale * scale {
        return Err(Error::DegenerateFit(
            "valid pixels are collinear; slopes are not identifiable".into(),
        ));
    }
    let a = (syy * sxv - sxy * syv) / det;
    let b = (sxx * syv - sxy * sxv) / det;
    let c_centered = sv / n as f64;
    let c = c_centered - a * mx - b * my;

    let mut ss_res = 0.0;
    for y in 0..h {
        for x in 0..w {
            if map.mask[[y, x]] {
                let r = map.values[[y, x]] - (a * x as f64 + b * y as f64 + c);
                ss_res += r * r;
            }
        }
    }
    Ok(PlaneFit {
        a,
        b,
        c,
        rms_residual: (ss_res / n as f64).sqrt(),
    })
}

/// Measured wrapped truth from a stack of a planar target: solve, unwrap,
/// fit a plane (which strips the regular high-frequency ripple left by
/// higher-order harmonics), evaluate it per pixel and rewrap. The result
/// serves as training labels.
pub fn make_ground_truth(stack: &FringeStack) -> Result<PhaseMap> {
    Ok(make_ground_truth_with_fit(stack)?.0)
}

pub fn make_ground_truth_with_fit(stack: &FringeStack) -> Result<(PhaseMap, PlaneFit)> {
    let wrapped = pwls_solve(stack)?;
    let unwrapped = unwrap_rows(&wrapped)?;
    let fit = fit_plane(&unwrapped)?;
    let mut plane = fit.evaluate(stack.width(), stack.height());
    plane.mask = wrapped.mask;
    Ok((rewrap(&plane), fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::wrap;
    use crate::scene::SceneSpec;
    use crate::synth::{ground_truth_phase, synth_sinusoidal};
    use std::f64::consts::TAU;

    #[test]
    fn recovers_an_exact_plane() {
        let plane = PlaneFit {
            a: 0.2,
            b: -0.1,
            c: 1.0,
            rms_residual: 0.0,
        };
        let map = plane.evaluate(40, 30);
        let fit = fit_plane(&map).unwrap();
        assert!((fit.a - 0.2).abs() < 1e-10);
        assert!((fit.b + 0.1).abs() < 1e-10);
        assert!((fit.c - 1.0).abs() < 1e-10);
        assert!(fit.rms_residual <= 1e-10);
    }

    #[test]
    fn ripple_leaves_coefficients_and_sets_the_residual() {
        // 0.05-amplitude sinusoid with 10 periods across the image: the fit
        // ignores it and the residual is amplitude/sqrt(2).
        let (w, h) = (200, 50);
        let values = Array2::from_shape_fn((h, w), |(y, x)| {
            0.2 * x as f64 - 0.1 * y as f64 + 1.0
                + 0.05 * (TAU * 10.0 * x as f64 / w as f64).sin()
        });
        let map = PhaseMap::full(values, PhaseKind::Unwrapped);
        let fit = fit_plane(&map).unwrap();
        assert!((fit.a - 0.2).abs() < 1e-3);
        assert!((fit.b + 0.1).abs() < 1e-3);
        let expect = 0.05 / 2f64.sqrt();
        assert!(
            (fit.rms_residual - expect).abs() < 0.1 * expect,
            "residual {} vs {expect}",
            fit.rms_residual
        );
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let all_masked = PhaseMap::new(
            Array2::zeros((8, 8)),
            PhaseKind::Unwrapped,
            Array2::from_elem((8, 8), false),
        )
        .unwrap();
        assert!(matches!(
            fit_plane(&all_masked),
            Err(Error::DegenerateFit(_))
        ));

        // A single valid row cannot identify the y slope.
        let mut mask = Array2::from_elem((8, 8), false);
        for x in 0..8 {
            mask[[3, x]] = true;
        }
        let row_only = PhaseMap::new(Array2::zeros((8, 8)), PhaseKind::Unwrapped, mask).unwrap();
        assert!(matches!(fit_plane(&row_only), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn measured_truth_matches_the_analytic_plane_on_clean_data() {
        let scene = SceneSpec {
            width: 96,
            height: 48,
            noise_sigma: 0.0,
            harmonics: Vec::new(),
            phase_plane: (TAU / 24.0, 0.011, 0.4),
            period: 24.0,
            ..SceneSpec::desk_default()
        };
        let stack = synth_sinusoidal(&scene).unwrap();
        let labels = make_ground_truth(&stack).unwrap();
        let analytic = ground_truth_phase(&scene).unwrap();
        for (l, t) in labels.values.iter().zip(analytic.values.iter()) {
            assert!(wrap(l - t).abs() < 1e-9, "label {l} vs truth {t}");
        }
    }

    #[test]
    fn zero_modulation_stack_is_a_degenerate_fit() {
        let scene = SceneSpec {
            width: 16,
            height: 16,
            modulation: 0.0,
            noise_sigma: 0.0,
            ..SceneSpec::desk_default()
        };
        let stack = synth_sinusoidal(&scene).unwrap();
        assert!(matches!(
            make_ground_truth(&stack),
            Err(Error::DegenerateFit(_))
        ));
    }
}
