//! Synthetic scene description for the fringe simulator.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// A simulated tilted calibration plane under projected fringes.
///
/// The ground-truth unwrapped phase is the plane
/// `phi(x, y) = a*x + b*y + c` with `(a, b, c) = phase_plane`, in radians,
/// where `x` is the column and `y` the row. Defocus blur acts along `x`
/// (the fringe-variation axis) with a Gaussian sigma interpolated linearly
/// from the left to the right image edge.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Fringe period in camera pixels (> 4).
    pub period: f64,
    /// Phase-shift count N (>= 4).
    pub n_steps: usize,
    /// (a, b, c) of the ground-truth phase plane, radians.
    pub phase_plane: (f64, f64, f64),
    /// Gaussian blur sigma in pixels at the left and right edges.
    pub defocus_sigma: (f64, f64),
    /// Additive Gaussian noise std-dev in normalized intensity units.
    pub noise_sigma: f64,
    /// Background intensity A in [0, 1].
    pub background: f64,
    /// Modulation amplitude B, with A+B <= 1 and A-B >= 0.
    pub modulation: f64,
    /// Harmonic contamination for sinusoid-plus-harmonics mode:
    /// (order k, amplitude relative to the fundamental).
    pub harmonics: Vec<(u32, f64)>,
    /// Dark-gap width in camera pixels at projector-pixel boundaries
    /// (binary patterns only; 0 disables).
    pub seam_gap: f64,
    /// Noise seed; synthesis is a pure function of (scene, seed).
    pub seed: u64,
}

impl SceneSpec {
    /// The desk-scale evaluation scene: 512x512, six steps, period 32 px,
    /// defocus sweeping 0.5 -> 4.0 px across the image, 1% noise, tilted
    /// plane carrying one fringe per period along x.
    pub fn desk_default() -> Self {
        SceneSpec {
            width: 512,
            height: 512,
            period: 32.0,
            n_steps: 6,
            phase_plane: (TAU / 32.0, 0.003, 0.3),
            defocus_sigma: (0.5, 4.0),
            noise_sigma: 0.01,
            background: 0.5,
            modulation: 0.4,
            harmonics: Vec::new(),
            seam_gap: 0.0,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config(format!(
                "image dimensions must be positive (got {}x{})",
                self.width, self.height
            )));
        }
        if self.n_steps < 4 {
            return Err(Error::Config(format!(
                "n_steps must be >= 4 to decouple the four unknowns (got {})",
                self.n_steps
            )));
        }
        if !(self.period > 4.0) {
            return Err(Error::Config(format!(
                "period must be > 4 pixels (got {})",
                self.period
            )));
        }
        let (a, b) = (self.background, self.modulation);
        if !(a - b >= 0.0) {
            return Err(Error::Config(format!(
                "background - modulation must be >= 0 (got {a} - {b})"
            )));
        }
        if !(a + b <= 1.0) {
            return Err(Error::Config(format!(
                "background + modulation must be <= 1 (got {a} + {b})"
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sigma must be >= 0 (got {})",
                self.noise_sigma
            )));
        }
        for &(k, amp) in &self.harmonics {
            if k < 2 {
                return Err(Error::Config(format!(
                    "harmonic orders must be >= 2 (got {k})"
                )));
            }
            if !amp.is_finite() {
                return Err(Error::Config(format!(
                    "harmonic amplitude for order {k} must be finite"
                )));
            }
        }
        if !(self.seam_gap >= 0.0) {
            return Err(Error::Config(format!(
                "seam_gap must be >= 0 (got {})",
                self.seam_gap
            )));
        }
        if self.seam_gap > 0.0 && self.seam_gap >= self.projector_pitch() {
            return Err(Error::Config(format!(
                "seam_gap {} must be smaller than the projector pixel pitch {}",
                self.seam_gap,
                self.projector_pitch()
            )));
        }
        let (pa, pb, pc) = self.phase_plane;
        if !(pa.is_finite() && pb.is_finite() && pc.is_finite()) {
            return Err(Error::Config("phase_plane coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Ground-truth unwrapped phase at (possibly fractional) pixel coordinates.
    pub fn plane_phase(&self, x: f64, y: f64) -> f64 {
        let (a, b, c) = self.phase_plane;
        a * x + b * y + c
    }

    /// Defocus sigma at column `x`, interpolated between the image edges.
    pub fn sigma_at(&self, x: f64) -> f64 {
        let (left, right) = self.defocus_sigma;
        if self.width <= 1 {
            return left;
        }
        let t = x / (self.width as f64 - 1.0);
        left + (right - left) * t
    }

    /// Camera pixels per projector pixel: one fringe cycle spans four
    /// projector pixels, so the seam grid repeats every period/4 pixels.
    pub fn projector_pitch(&self) -> f64 {
        self.period / 4.0
    }
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec::desk_default()
    }
}
