//! Point-wise least-squares phase solver for N-step stacks.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::phase::{wrap, PhaseKind, PhaseMap};
use crate::stack::FringeStack;

/// Below this magnitude on both correlation sums a pixel carries no
/// modulation and is masked invalid.
pub const MODULATION_EPS: f64 = 1e-6;

/// Solves `phi = -atan2(sum_i I_i*sin(2*pi*i/N), sum_i I_i*cos(2*pi*i/N))`
/// per pixel, wrapped to [-pi, pi). For a pure sinusoid this is the exact
/// least-squares phase; four samples are the minimum that decouples the
/// four per-pixel unknowns.
pub fn pwls_solve(stack: &FringeStack) -> Result<PhaseMap> {
    let n = stack.n_steps();
    if n < 4 {
        return Err(Error::Config(format!(
            "phase solving needs at least 4 equally spaced steps (got {n})"
        )));
    }
    let trig: Vec<(f64, f64)> = stack.shifts().iter().map(|t| t.sin_cos()).collect();
    let (h, w) = (stack.height(), stack.width());
    let mut values = Array2::zeros((h, w));
    let mut mask = Array2::from_elem((h, w), true);
    for y in 0..h {
        for x in 0..w {
            let mut ss = 0.0;
            let mut sc = 0.0;
            for (img, &(sin_t, cos_t)) in stack.images().iter().zip(&trig) {
                let v = img[[y, x]];
                ss += v * sin_t;
                sc += v * cos_t;
            }
            if ss.abs() < MODULATION_EPS && sc.abs() < MODULATION_EPS {
                mask[[y, x]] = false;
            } else {
                values[[y, x]] = wrap(-ss.atan2(sc));
            }
        }
    }
    PhaseMap::new(values, PhaseKind::Wrapped, mask)
}
