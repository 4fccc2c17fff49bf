//! Learned per-pixel phase inference and the self-test diagnostic.

use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use crate::dataset::{self, normalize_into};
use crate::error::{Error, Result};
use crate::net::{InputMode, Network};
use crate::phase::{wrap, PhaseKind, PhaseMap};
use crate::pwls::MODULATION_EPS;
use crate::stack::FringeStack;

/// Per-pixel `sqrt(O_s^2 + O_c^2)`; 1 for a perfect (sin, cos) pair, so
/// deviations flag suspect inputs or a suspect network. Reported, never
/// used to reject pixels automatically.
#[derive(Clone, Debug)]
pub struct SelfTestMap {
    pub values: Array2<f64>,
    pub mask: Array2<bool>,
}

impl SelfTestMap {
    pub fn save(&self, path: &Path) -> Result<()> {
        PhaseMap::new(self.values.clone(), PhaseKind::SelfTest, self.mask.clone())?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let map = PhaseMap::load(path)?;
        if map.kind != PhaseKind::SelfTest {
            return Err(Error::Config(format!(
                "{} is not a self-test map",
                path.display()
            )));
        }
        Ok(SelfTestMap {
            values: map.values,
            mask: map.mask,
        })
    }
}

/// Applies the trained network pixel-wise: normalize the N intensities,
/// run the forward pass, decode `atan2(O_s, O_c)` into [-pi, pi), and
/// record the self-test value. Networks trained on rotate-to-max data get
/// the same rotation applied on the way in and compensated on the way out.
/// Pixels without modulation are masked invalid.
pub fn pwppe_solve(stack: &FringeStack, net: &Network) -> Result<(PhaseMap, SelfTestMap)> {
    let n = stack.n_steps();
    if net.input_dim() != n {
        return Err(Error::Shape(format!(
            "network expects {} inputs but the stack has {} steps",
            net.input_dim(),
            n
        )));
    }
    let (h, w) = (stack.height(), stack.width());
    let mut rows: Vec<(Vec<f64>, Vec<f64>, Vec<bool>)> = Vec::new();
    (0..h)
        .into_par_iter()
        .map(|y| {
            let mut phase = vec![0.0; w];
            let mut selftest = vec![0.0; w];
            let mut mask = vec![true; w];
            let mut raw = Vec::with_capacity(n);
            let mut norm = Vec::with_capacity(n);
            for x in 0..w {
                stack.pixel_vector(x, y, &mut raw);
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for &v in &raw {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if hi - lo <= MODULATION_EPS {
                    mask[x] = false;
                    continue;
                }
                normalize_into(&raw, &mut norm);
                let (os, oc, rotation) = match net.input_mode {
                    InputMode::Plain => {
                        let (os, oc) = net.forward(&norm).expect("dims checked above");
                        (os, oc, 0u16)
                    }
                    InputMode::RotateToMax => {
                        let (rotated, _, r) = dataset::rotate_to_max(&norm, 0.0);
                        let (os, oc) = net.forward(&rotated).expect("dims checked above");
                        (os, oc, r)
                    }
                };
                let mut phi = wrap(os.atan2(oc));
                if rotation != 0 {
                    phi = dataset::undo_rotation(phi, rotation, n);
                }
                phase[x] = phi;
                selftest[x] = (os * os + oc * oc).sqrt();
            }
            (phase, selftest, mask)
        })
        .collect_into_vec(&mut rows);

    let mut phase = Array2::zeros((h, w));
    let mut selftest = Array2::zeros((h, w));
    let mut mask = Array2::from_elem((h, w), true);
    for (y, (p, s, m)) in rows.into_iter().enumerate() {
        for x in 0..w {
            phase[[y, x]] = p[x];
            selftest[[y, x]] = s[x];
            mask[[y, x]] = m[x];
        }
    }
    Ok((
        PhaseMap {
            values: phase,
            kind: PhaseKind::Wrapped,
            mask: mask.clone(),
        },
        SelfTestMap {
            values: selftest,
            mask,
        },
    ))
}

/// For each tolerance `t`, the fraction of valid pixels with
/// `|value - 1| <= t`. Bands must be positive and ascending.
pub fn self_test_histogram(map: &SelfTestMap, bands: &[f64]) -> Result<Vec<f64>> {
    if bands.is_empty() {
        return Err(Error::Config("at least one band is required".into()));
    }
    for pair in bands.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Config(format!(
                "bands must be ascending (got {} after {})",
                pair[1], pair[0]
            )));
        }
    }
    if !(bands[0] > 0.0) {
        return Err(Error::Config(format!(
            "bands must be positive (got {})",
            bands[0]
        )));
    }
    let mut total = 0usize;
    let mut counts = vec![0usize; bands.len()];
    for (v, &m) in map.values.iter().zip(map.mask.iter()) {
        if !m {
            continue;
        }
        total += 1;
        let dev = (v - 1.0).abs();
        for (i, &t) in bands.iter().enumerate() {
            if dev <= t {
                counts[i] += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptyInput("self-test map has no valid pixels".into()));
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}
