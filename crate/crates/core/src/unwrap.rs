//! Row-wise Itoh unwrapping with cross-row offset alignment, and rewrap.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::phase::{wrap, PhaseKind, PhaseMap};

/// Unwraps each row independently (adding the multiple of 2*pi that keeps
/// adjacent differences within (-pi, pi]), then chains the rows to a common
/// offset by matching each row's first mutually valid column against the
/// previous aligned row. Rows with fewer than two valid pixels are masked
/// invalid rather than failing the whole map.
pub fn unwrap_rows(map: &PhaseMap) -> Result<PhaseMap> {
    if map.kind != PhaseKind::Wrapped {
        return Err(Error::Config("unwrap_rows expects a wrapped map".into()));
    }
    let (h, w) = map.values.dim();
    let mut values = Array2::zeros((h, w));
    let mut mask = map.mask.clone();

    // Per-row Itoh pass.
    for y in 0..h {
        let valid_cols: Vec<usize> = (0..w).filter(|&x| map.mask[[y, x]]).collect();
        if valid_cols.len() < 2 {
            for x in 0..w {
                mask[[y, x]] = false;
            }
            continue;
        }
        let mut prev = map.values[[y, valid_cols[0]]];
        values[[y, valid_cols[0]]] = prev;
        for &x in &valid_cols[1..] {
            let next = prev + wrap(map.values[[y, x]] - prev);
            values[[y, x]] = next;
            prev = next;
        }
    }

    // Align rows: the step between vertically adjacent pixels is assumed to
    // be below pi, so the principal difference fixes each row's 2*pi offset.
    let mut prev_row: Option<usize> = None;
    for y in 0..h {
        let Some(x0) = first_valid(&mask, y, w, prev_row) else {
            if row_valid(&mask, y, w) {
                prev_row = Some(y);
            }
            continue;
        };
        if let Some(py) = prev_row {
            let anchor = values[[py, x0]];
            let here = values[[y, x0]];
            let offset = anchor + wrap(here - anchor) - here;
            if offset != 0.0 {
                for x in 0..w {
                    values[[y, x]] += offset;
                }
            }
        }
        prev_row = Some(y);
    }

    PhaseMap::new(values, PhaseKind::Unwrapped, mask)
}

fn row_valid(mask: &Array2<bool>, y: usize, w: usize) -> bool {
    (0..w).any(|x| mask[[y, x]])
}

/// First column valid in row `y` and, when given, also in `prev` row.
fn first_valid(mask: &Array2<bool>, y: usize, w: usize, prev: Option<usize>) -> Option<usize> {
    (0..w).find(|&x| mask[[y, x]] && prev.map_or(true, |py| mask[[py, x]]))
}

/// Wraps every value back to [-pi, pi). Offsets that are exact multiples of
/// 2*pi vanish, so rewrap(unwrap_rows(m)) reproduces m at valid pixels.
pub fn rewrap(map: &PhaseMap) -> PhaseMap {
    PhaseMap {
        values: map.values.mapv(wrap),
        kind: PhaseKind::Wrapped,
        mask: map.mask.clone(),
    }
}
