//! Fringe synthesis over a simulated tilted calibration plane: ideal
//! sinusoids with optional harmonic contamination, and binary patterns
//! blurred by a column-varying defocus kernel.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phase::{wrap, PhaseKind, PhaseMap};
use crate::scene::SceneSpec;
use crate::stack::FringeStack;

/// Which pattern family a stack was synthesized from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternKind {
    Sinusoidal,
    BinaryDefocused,
}

impl std::str::FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sinusoidal" => Ok(PatternKind::Sinusoidal),
            "binary" => Ok(PatternKind::BinaryDefocused),
            other => Err(Error::Config(format!(
                "unknown pattern {other:?}, expected sinusoidal or binary"
            ))),
        }
    }
}

/// Synthesizes a stack for the given pattern kind.
pub fn synth(scene: &SceneSpec, pattern: PatternKind) -> Result<FringeStack> {
    match pattern {
        PatternKind::Sinusoidal => synth_sinusoidal(scene),
        PatternKind::BinaryDefocused => synth_binary_defocused(scene),
    }
}

/// Ideal sinusoidal fringes plus explicit harmonics:
/// `I_i = A + B*cos(phi + theta_i) + B*sum_k e_k*cos(k*(phi + theta_i))`,
/// then seeded Gaussian noise, then clamping to [0, 1].
pub fn synth_sinusoidal(scene: &SceneSpec) -> Result<FringeStack> {
    scene.validate()?;
    let shifts = FringeStack::uniform_shifts(scene.n_steps);
    let mut images = Vec::with_capacity(scene.n_steps);
    for (i, &theta) in shifts.iter().enumerate() {
        let mut img = Array2::from_shape_fn((scene.height, scene.width), |(y, x)| {
            let psi = scene.plane_phase(x as f64, y as f64) + theta;
            let mut v = scene.background + scene.modulation * psi.cos();
            for &(k, amp) in &scene.harmonics {
                v += scene.modulation * amp * (k as f64 * psi).cos();
            }
            v
        });
        add_noise_and_clamp(&mut img, scene, i);
        images.push(img);
    }
    FringeStack::new(images, shifts, Some(scene.clone()))
}

/// Binary 50%-duty-cycle fringes blurred per column by a Gaussian whose
/// sigma interpolates from the left image edge to the right one, modelling
/// a focus gradient across the field of view. Optional dark seams at
/// projector-pixel boundaries. Noise and clamping as for sinusoids.
pub fn synth_binary_defocused(scene: &SceneSpec) -> Result<FringeStack> {
    scene.validate()?;
    let (sl, sr) = scene.defocus_sigma;
    if !(sl > 0.0) || !(sr > 0.0) {
        return Err(Error::Config(format!(
            "defocus_sigma must be strictly positive at both ends (got {sl}, {sr})"
        )));
    }
    let kernels: Vec<Kernel> = (0..scene.width)
        .map(|x| Kernel::gaussian(scene.sigma_at(x as f64)))
        .collect();
    let shifts = FringeStack::uniform_shifts(scene.n_steps);
    let mut images = Vec::with_capacity(scene.n_steps);
    for (i, &theta) in shifts.iter().enumerate() {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        (0..scene.height)
            .into_par_iter()
            .map(|y| {
                let mut row = Vec::with_capacity(scene.width);
                for (x, kernel) in kernels.iter().enumerate() {
                    let mut acc = 0.0;
                    for (t, &w) in kernel.taps() {
                        acc += w * binary_level(scene, x as f64 + t as f64, y as f64, theta);
                    }
                    row.push(acc);
                }
                row
            })
            .collect_into_vec(&mut rows);
        let mut img = Array2::from_shape_vec(
            (scene.height, scene.width),
            rows.into_iter().flatten().collect(),
        )
        .expect("row synthesis covers the full image");
        add_noise_and_clamp(&mut img, scene, i);
        images.push(img);
    }
    FringeStack::new(images, shifts, Some(scene.clone()))
}

/// The recorded level of one camera pixel before defocus blur: the
/// projected pattern is strictly binary (A+B where the cosine is
/// non-negative, A-B elsewhere, dark seams forced to A-B), and the camera
/// pixel integrates it over its unit footprint along x. Point sampling
/// instead would alias the square wave's high odd harmonics (orders
/// period-1 and period+1) straight onto the carrier, an artifact a real
/// sensor does not exhibit. The pattern extends analytically past the
/// image edges, so blur needs no boundary handling.
fn binary_level(scene: &SceneSpec, x: f64, y: f64, theta: f64) -> f64 {
    let a = scene.phase_plane.0;
    let center = scene.plane_phase(x, y) + theta;
    let high_fraction = if a.abs() < 1e-12 {
        if center.cos() >= 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        let half = a.abs() / 2.0;
        (high_measure(center + half) - high_measure(center - half)) / a.abs()
    };
    let mut level =
        scene.background - scene.modulation + 2.0 * scene.modulation * high_fraction;
    if scene.seam_gap > 0.0 {
        let dark = seam_overlap(scene, x);
        level = (1.0 - dark) * level + dark * (scene.background - scene.modulation);
    }
    level
}

/// Measure of `{xi in [0, t] : cos(xi) >= 0}`, extended oddly to t < 0.
fn high_measure(t: f64) -> f64 {
    if t < 0.0 {
        return -high_measure(-t);
    }
    let cycles = (t / TAU).floor();
    let rem = t - cycles * TAU;
    let partial = rem.min(FRAC_PI_2) + (rem - 1.5 * PI).max(0.0);
    cycles * PI + partial
}

/// Length of the pixel footprint [x-1/2, x+1/2] covered by dark seams
/// centered at multiples of the projector pixel pitch.
fn seam_overlap(scene: &SceneSpec, x: f64) -> f64 {
    let pitch = scene.projector_pitch();
    let half_gap = scene.seam_gap / 2.0;
    let (x0, x1) = (x - 0.5, x + 0.5);
    let k0 = ((x0 - half_gap) / pitch).floor() as i64;
    let k1 = ((x1 + half_gap) / pitch).ceil() as i64;
    let mut total = 0.0;
    for k in k0..=k1 {
        let c = k as f64 * pitch;
        total += (x1.min(c + half_gap) - x0.max(c - half_gap)).max(0.0);
    }
    total.min(1.0)
}

/// Analytic wrapped ground truth `wrap(a*x + b*y + c)`.
pub fn ground_truth_phase(scene: &SceneSpec) -> Result<PhaseMap> {
    scene.validate()?;
    let values = Array2::from_shape_fn((scene.height, scene.width), |(y, x)| {
        wrap(scene.plane_phase(x as f64, y as f64))
    });
    Ok(PhaseMap::full(values, PhaseKind::Wrapped))
}

/// Analytic unwrapped ground-truth plane.
pub fn ground_truth_unwrapped(scene: &SceneSpec) -> Result<PhaseMap> {
    scene.validate()?;
    let values = Array2::from_shape_fn((scene.height, scene.width), |(y, x)| {
        scene.plane_phase(x as f64, y as f64)
    });
    Ok(PhaseMap::full(values, PhaseKind::Unwrapped))
}

/// Noise is drawn sequentially in row-major order from a per-image stream
/// so synthesis is reproducible regardless of blur parallelism.
fn add_noise_and_clamp(img: &mut Array2<f64>, scene: &SceneSpec, image_index: usize) {
    if scene.noise_sigma > 0.0 {
        let mut rng = noise_rng(scene.seed, image_index);
        let normal = Normal::new(0.0, scene.noise_sigma).expect("validated sigma");
        for v in img.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    img.mapv_inplace(|v| v.clamp(0.0, 1.0));
}

fn noise_rng(seed: u64, image_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(image_index as u64 + 1)))
}

struct Kernel {
    weights: Vec<f64>,
    radius: isize,
}

impl Kernel {
    /// Discrete Gaussian taps out to 4 sigma, normalized to unit sum.
    fn gaussian(sigma: f64) -> Kernel {
        let radius = (4.0 * sigma).ceil().max(1.0) as isize;
        let inv = 1.0 / (2.0 * sigma * sigma);
        let mut weights: Vec<f64> = (-radius..=radius)
            .map(|t| (-(t as f64) * (t as f64) * inv).exp())
            .collect();
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        Kernel { weights, radius }
    }

    fn taps(&self) -> impl Iterator<Item = (isize, &f64)> {
        self.weights
            .iter()
            .enumerate()
            .map(move |(i, w)| (i as isize - self.radius, w))
    }
}
