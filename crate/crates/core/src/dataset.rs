//! Per-pixel training data: normalization, rotation/reversal augmentation
//! with compensated labels, the rotate-to-max acceleration transform, and
//! dataset assembly/persistence.
//!
//! The index and sign conventions of the augmentation are pinned by one
//! requirement: for a clean sinusoidal sample, the phase solver applied to
//! a transformed input vector must reproduce the transformed label. Unit
//! tests enforce this rather than any particular reading of the formulas.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::phase::{wrap, PhaseKind, PhaseMap};
use crate::pwls::MODULATION_EPS;
use crate::stack::FringeStack;

/// Maps intensities to [-1, 1] with both endpoints attained:
/// `Dn(i) = (2*D(i) - max - min) / (max - min)`.
pub fn normalize(d: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(d.len());
    if normalize_into(d, &mut out) {
        Ok(out)
    } else {
        Err(Error::ZeroModulation(
            "cannot normalize a constant intensity vector".into(),
        ))
    }
}

/// In-place variant for hot loops; returns false on a constant vector.
/// Evaluated as `((v - min) - (max - v)) / (max - min)` so the extremes map
/// to exactly +/-1.
pub(crate) fn normalize_into(d: &[f64], out: &mut Vec<f64>) -> bool {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in d {
        min = min.min(v);
        max = max.max(v);
    }
    if !(max > min) {
        return false;
    }
    let span = max - min;
    out.clear();
    out.extend(d.iter().map(|&v| ((v - min) - (max - v)) / span));
    true
}

/// All 2N augmentation variants of one sample: N cyclic rotations and the
/// N rotations of the reversed vector, each with its compensated label.
/// Rotation by `r` steps shifts the label by `+r*2*pi/N`; reversal negates
/// it. Variant ids are `0..N` for rotations and `N..2N` for reversals.
pub fn augment(d: &[f64], truth_phase: f64) -> Vec<(Vec<f64>, f64, u16)> {
    let n = d.len();
    let step = TAU / n as f64;
    let mut out = Vec::with_capacity(2 * n);
    for r in 0..n {
        let rotated: Vec<f64> = (0..n).map(|m| d[(m + r) % n]).collect();
        out.push((rotated, wrap(truth_phase + r as f64 * step), r as u16));
    }
    for r in 0..n {
        let reversed: Vec<f64> = (0..n).map(|m| d[(2 * n - 2 - m - r) % n]).collect();
        out.push((
            reversed,
            wrap(-truth_phase + r as f64 * step),
            (n + r) as u16,
        ));
    }
    out
}

/// Rotates the vector so its maximum element lands in the zero-shift slot
/// (the last position, whose shift is 2*pi), compensating the label by the
/// rotation. For clean data the compensated label falls within
/// [-2*pi/N, 2*pi/N]; noise can push the argmax to a neighbouring sample,
/// so nothing downstream may assert that band. Ties break to the lowest
/// index. Returns (vector, label, rotation).
pub fn rotate_to_max(d: &[f64], truth_phase: f64) -> (Vec<f64>, f64, u16) {
    let n = d.len();
    let step = TAU / n as f64;
    let j = argmax(d);
    let r = (j + 1) % n;
    let rotated: Vec<f64> = (0..n).map(|m| d[(m + r) % n]).collect();
    (rotated, wrap(truth_phase + r as f64 * step), r as u16)
}

pub(crate) fn argmax(d: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in d.iter().enumerate().skip(1) {
        if v > d[best] {
            best = i;
        }
    }
    best
}

/// Undoes the rotate-to-max label compensation for a decoded phase.
pub fn undo_rotation(phase: f64, rotation: u16, n: usize) -> f64 {
    wrap(phase - rotation as f64 * TAU / n as f64)
}

/// (sin, cos) encoding of a phase; continuous across the +/-pi seam, which
/// direct phase targets are not.
pub fn encode_target(phase: f64) -> (f64, f64) {
    let (s, c) = phase.sin_cos();
    (s, c)
}

/// Decodes (sin, cos) back to a wrapped phase.
pub fn decode_target(sin: f64, cos: f64) -> f64 {
    wrap(sin.atan2(cos))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetMode {
    /// One sample per pixel.
    Plain,
    /// 2N samples per pixel via rotations and reversals.
    Augmented,
    /// One rotate-to-max sample per pixel.
    Accelerated,
}

impl std::str::FromStr for DatasetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(DatasetMode::Plain),
            "augmented" => Ok(DatasetMode::Augmented),
            "accelerated" => Ok(DatasetMode::Accelerated),
            other => Err(Error::Config(format!(
                "unknown dataset mode {other:?}, expected plain, augmented or accelerated"
            ))),
        }
    }
}

impl std::fmt::Display for DatasetMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DatasetMode::Plain => "plain",
            DatasetMode::Augmented => "augmented",
            DatasetMode::Accelerated => "accelerated",
        })
    }
}

/// Where a sample came from: pixel coordinates and augmentation variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleOrigin {
    pub x: u32,
    pub y: u32,
    pub aug: u16,
}

/// One training/inference record, borrowed from a `Dataset`.
#[derive(Clone, Copy, Debug)]
pub struct PixelSample<'a> {
    pub input: &'a [f64],
    pub target_sin: f64,
    pub target_cos: f64,
    pub origin: SampleOrigin,
}

/// Flat sample storage; all samples share the same N.
#[derive(Clone, Debug)]
pub struct Dataset {
    n_steps: usize,
    mode: DatasetMode,
    seed: u64,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    origins: Vec<SampleOrigin>,
}

impl Dataset {
    pub fn new(n_steps: usize, mode: DatasetMode, seed: u64) -> Self {
        Dataset {
            n_steps,
            mode,
            seed,
            inputs: Vec::new(),
            targets: Vec::new(),
            origins: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn mode(&self) -> DatasetMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n_steps..(i + 1) * self.n_steps]
    }

    pub fn target(&self, i: usize) -> (f64, f64) {
        (self.targets[2 * i], self.targets[2 * i + 1])
    }

    pub fn origin(&self, i: usize) -> SampleOrigin {
        self.origins[i]
    }

    pub fn sample(&self, i: usize) -> PixelSample<'_> {
        let (target_sin, target_cos) = self.target(i);
        PixelSample {
            input: self.input(i),
            target_sin,
            target_cos,
            origin: self.origin(i),
        }
    }

    pub fn push(&mut self, input: &[f64], target: (f64, f64), origin: SampleOrigin) {
        debug_assert_eq!(input.len(), self.n_steps);
        self.inputs.extend_from_slice(input);
        self.targets.push(target.0);
        self.targets.push(target.1);
        self.origins.push(origin);
    }

    /// Set of pixels this dataset draws from, as a mask over the source image.
    pub fn pixel_mask(&self, width: usize, height: usize) -> Array2<bool> {
        let mut mask = Array2::from_elem((height, width), false);
        for o in &self.origins {
            mask[[o.y as usize, o.x as usize]] = true;
        }
        mask
    }

    fn reorder(&mut self, perm: &[usize]) {
        let mut inputs = Vec::with_capacity(self.inputs.len());
        let mut targets = Vec::with_capacity(self.targets.len());
        let mut origins = Vec::with_capacity(self.origins.len());
        for &i in perm {
            inputs.extend_from_slice(self.input(i));
            let (s, c) = self.target(i);
            targets.push(s);
            targets.push(c);
            origins.push(self.origins[i]);
        }
        self.inputs = inputs;
        self.targets = targets;
        self.origins = origins;
    }

    fn truncate(&mut self, len: usize) {
        self.inputs.truncate(len * self.n_steps);
        self.targets.truncate(len * 2);
        self.origins.truncate(len);
    }

    /// Text header (n_steps, mode, count, seed) followed by little-endian
    /// f64 records `[input x N, sin, cos, x, y, aug]`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write!(
            w,
            "n_steps={}\nmode={}\ncount={}\nseed={}\n",
            self.n_steps,
            self.mode,
            self.len(),
            self.seed
        )?;
        for i in 0..self.len() {
            for v in self.input(i) {
                w.write_all(&v.to_le_bytes())?;
            }
            let (s, c) = self.target(i);
            let o = self.origins[i];
            for v in [s, c, o.x as f64, o.y as f64, o.aug as f64] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let mut r = BufReader::new(File::open(path)?);
        let mut header = Vec::new();
        let mut newlines = 0;
        let mut byte = [0u8; 1];
        while newlines < 4 {
            r.read_exact(&mut byte)
                .map_err(|_| Error::format(path, header.len() as u64, "truncated header"))?;
            if byte[0] == b'\n' {
                newlines += 1;
            }
            header.push(byte[0]);
        }
        let header = String::from_utf8(header)
            .map_err(|_| Error::format(path, 0, "header is not utf-8"))?;
        let mut n_steps = None;
        let mut mode = None;
        let mut count = None;
        let mut seed = None;
        for line in header.lines() {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(path, 0, format!("bad header line {line:?}")))?;
            match key {
                "n_steps" => n_steps = value.parse::<usize>().ok(),
                "mode" => mode = value.parse::<DatasetMode>().ok(),
                "count" => count = value.parse::<usize>().ok(),
                "seed" => seed = value.parse::<u64>().ok(),
                _ => return Err(Error::format(path, 0, format!("unknown header key {key:?}"))),
            }
        }
        let n_steps = n_steps.ok_or_else(|| Error::format(path, 0, "missing/bad n_steps"))?;
        let mode = mode.ok_or_else(|| Error::format(path, 0, "missing/bad mode"))?;
        let count = count.ok_or_else(|| Error::format(path, 0, "missing/bad count"))?;
        let seed = seed.ok_or_else(|| Error::format(path, 0, "missing/bad seed"))?;

        let record = n_steps + 5;
        let mut data = Dataset::new(n_steps, mode, seed);
        let mut rec = vec![0.0f64; record];
        let mut buf = vec![0u8; record * 8];
        for i in 0..count {
            r.read_exact(&mut buf).map_err(|_| {
                Error::format(
                    path,
                    (header.len() + i * record * 8) as u64,
                    format!("truncated record {i} of {count}"),
                )
            })?;
            for (j, chunk) in buf.chunks_exact(8).enumerate() {
                rec[j] = f64::from_le_bytes(chunk.try_into().unwrap());
            }
            data.push(
                &rec[..n_steps],
                (rec[n_steps], rec[n_steps + 1]),
                SampleOrigin {
                    x: rec[n_steps + 2] as u32,
                    y: rec[n_steps + 3] as u32,
                    aug: rec[n_steps + 4] as u16,
                },
            );
        }
        if r.read(&mut byte)? != 0 {
            return Err(Error::format(
                path,
                (header.len() + count * record * 8) as u64,
                "trailing bytes after records",
            ));
        }
        Ok(data)
    }

    /// CSV export for inspection: header row, 9 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let cols: Vec<String> = (0..self.n_steps).map(|i| format!("d{i}")).collect();
        writeln!(w, "{},sin,cos,x,y,aug", cols.join(","))?;
        for i in 0..self.len() {
            let vals: Vec<String> = self.input(i).iter().map(|v| format!("{v:.8e}")).collect();
            let (s, c) = self.target(i);
            let o = self.origins[i];
            writeln!(
                w,
                "{},{:.8e},{:.8e},{},{},{}",
                vals.join(","),
                s,
                c,
                o.x,
                o.y,
                o.aug
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    pub mode: DatasetMode,
    /// Fraction of the training pool kept after shuffling, in (0, 1].
    pub sample_fraction: f64,
    /// Fraction of valid pixels assigned to the training split, in (0, 1).
    pub train_ratio: f64,
    pub seed: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            mode: DatasetMode::Augmented,
            sample_fraction: 0.01,
            train_ratio: 0.5,
            seed: 0,
        }
    }
}

/// Builds disjoint train/test datasets from a stack and its wrapped truth:
/// valid pixels are shuffled and split by pixel (so no augmented variant of
/// a training pixel leaks into test), inputs are normalized, the mode's
/// variants are generated, each split is shuffled, and the training pool is
/// subsampled to `sample_fraction`.
pub fn build(
    stack: &FringeStack,
    truth: &PhaseMap,
    opts: &BuildOptions,
) -> Result<(Dataset, Dataset)> {
    if truth.kind != PhaseKind::Wrapped {
        return Err(Error::Config("dataset labels must be a wrapped map".into()));
    }
    if (truth.height(), truth.width()) != (stack.height(), stack.width()) {
        return Err(Error::Shape(format!(
            "truth is {}x{} but stack is {}x{}",
            truth.width(),
            truth.height(),
            stack.width(),
            stack.height()
        )));
    }
    if !(opts.sample_fraction > 0.0 && opts.sample_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "sample_fraction must be in (0, 1] (got {})",
            opts.sample_fraction
        )));
    }
    if !(opts.train_ratio > 0.0 && opts.train_ratio < 1.0) {
        return Err(Error::Config(format!(
            "train_ratio must be in (0, 1) (got {})",
            opts.train_ratio
        )));
    }

    let mut buf = Vec::new();
    let mut pixels: Vec<(u32, u32)> = Vec::new();
    for y in 0..stack.height() {
        for x in 0..stack.width() {
            if !truth.mask[[y, x]] {
                continue;
            }
            stack.pixel_vector(x, y, &mut buf);
            let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in &buf {
                min = min.min(v);
                max = max.max(v);
            }
            if max - min > MODULATION_EPS {
                pixels.push((x as u32, y as u32));
            }
        }
    }
    if pixels.is_empty() {
        return Err(Error::EmptyDataset(
            "no valid modulated pixels to sample".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    pixels.shuffle(&mut rng);
    let n_train = ((pixels.len() as f64 * opts.train_ratio).round() as usize)
        .clamp(1, pixels.len() - 1);
    let (train_px, test_px) = pixels.split_at(n_train);

    let mut train = collect_split(stack, truth, train_px, opts, &mut buf)?;
    let mut test = collect_split(stack, truth, test_px, opts, &mut buf)?;

    shuffle_dataset(&mut train, &mut rng);
    shuffle_dataset(&mut test, &mut rng);

    if opts.sample_fraction < 1.0 {
        let keep = ((train.len() as f64 * opts.sample_fraction).round() as usize).max(1);
        train.truncate(keep);
    }
    Ok((train, test))
}

fn collect_split(
    stack: &FringeStack,
    truth: &PhaseMap,
    pixels: &[(u32, u32)],
    opts: &BuildOptions,
    buf: &mut Vec<f64>,
) -> Result<Dataset> {
    let mut data = Dataset::new(stack.n_steps(), opts.mode, opts.seed);
    let mut normalized = Vec::new();
    for &(x, y) in pixels {
        stack.pixel_vector(x as usize, y as usize, buf);
        if !normalize_into(buf, &mut normalized) {
            continue;
        }
        let phi = truth.values[[y as usize, x as usize]];
        match opts.mode {
            DatasetMode::Plain => {
                data.push(&normalized, encode_target(phi), SampleOrigin { x, y, aug: 0 });
            }
            DatasetMode::Augmented => {
                for (vec, label, aug) in augment(&normalized, phi) {
                    data.push(&vec, encode_target(label), SampleOrigin { x, y, aug });
                }
            }
            DatasetMode::Accelerated => {
                let (vec, label, aug) = rotate_to_max(&normalized, phi);
                data.push(&vec, encode_target(label), SampleOrigin { x, y, aug });
            }
        }
    }
    Ok(data)
}

fn shuffle_dataset(data: &mut Dataset, rng: &mut ChaCha8Rng) {
    let mut perm: Vec<usize> = (0..data.len()).collect();
    perm.shuffle(rng);
    data.reorder(&perm);
}
