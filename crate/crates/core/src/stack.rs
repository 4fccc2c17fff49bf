//! Phase-shifted fringe stacks and their on-disk directory layout.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::pgm;
use crate::scene::SceneSpec;

/// N phase-shifted intensity images plus acquisition metadata.
///
/// Image `i` (0-based) was captured at shift `theta = 2*pi*(i+1)/N`; the
/// shift list is stored explicitly and validated to be uniformly spaced.
#[derive(Clone, Debug)]
pub struct FringeStack {
    images: Vec<Array2<f64>>,
    shifts: Vec<f64>,
    pub scene: Option<SceneSpec>,
}

const SHIFT_SPACING_TOL: f64 = 1e-9;

impl FringeStack {
    pub fn new(
        images: Vec<Array2<f64>>,
        shifts: Vec<f64>,
        scene: Option<SceneSpec>,
    ) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Shape("stack has no images".into()));
        }
        if images.len() != shifts.len() {
            return Err(Error::Shape(format!(
                "{} images but {} shifts",
                images.len(),
                shifts.len()
            )));
        }
        let dim = images[0].dim();
        for (i, img) in images.iter().enumerate() {
            if img.dim() != dim {
                return Err(Error::Shape(format!(
                    "image {} has dimensions {:?}, expected {:?}",
                    i + 1,
                    img.dim(),
                    dim
                )));
            }
        }
        let n = shifts.len();
        let step = TAU / n as f64;
        for (i, pair) in shifts.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::Shape(format!(
                    "shifts must be strictly increasing (entries {} and {})",
                    i + 1,
                    i + 2
                )));
            }
            if (pair[1] - pair[0] - step).abs() > SHIFT_SPACING_TOL {
                return Err(Error::Shape(format!(
                    "shifts must be spaced 2*pi/{n}, found gap {}",
                    pair[1] - pair[0]
                )));
            }
        }
        Ok(FringeStack {
            images,
            shifts,
            scene,
        })
    }

    /// The canonical shift list `2*pi*i/N` for `i = 1..=N`.
    pub fn uniform_shifts(n: usize) -> Vec<f64> {
        (1..=n).map(|i| TAU * i as f64 / n as f64).collect()
    }

    pub fn n_steps(&self) -> usize {
        self.images.len()
    }

    pub fn width(&self) -> usize {
        self.images[0].ncols()
    }

    pub fn height(&self) -> usize {
        self.images[0].nrows()
    }

    pub fn images(&self) -> &[Array2<f64>] {
        &self.images
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    /// Fringe period in camera pixels, when scene provenance is available.
    pub fn period(&self) -> Option<f64> {
        self.scene.as_ref().map(|s| s.period)
    }

    /// Copies the N intensities of pixel (x, y) into `buf`.
    pub fn pixel_vector(&self, x: usize, y: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.images.iter().map(|img| img[[y, x]]));
    }

    /// Applies `f` to every intensity, keeping shifts and provenance.
    pub fn map_intensities(&self, f: impl Fn(f64) -> f64) -> FringeStack {
        FringeStack {
            images: self.images.iter().map(|img| img.mapv(&f)).collect(),
            shifts: self.shifts.clone(),
            scene: self.scene.clone(),
        }
    }

    /// Optional 8-bit quantization post-step (round to 1/255 levels) so
    /// quantization error can be studied separately from synthesis.
    pub fn quantize_8bit(&self) -> FringeStack {
        self.map_intensities(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
    }

    /// Writes `step_01.pgm .. step_NN.pgm` plus `stack.meta` into `dir`.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (i, img) in self.images.iter().enumerate() {
            pgm::write_pgm16(&dir.join(step_name(i)), img)?;
        }
        let mut meta = String::new();
        meta.push_str(&format!("n_steps={}\n", self.n_steps()));
        meta.push_str(&format!("width={}\n", self.width()));
        meta.push_str(&format!("height={}\n", self.height()));
        let shift_list: Vec<String> = self.shifts.iter().map(|s| format!("{s}")).collect();
        meta.push_str(&format!("shifts={}\n", shift_list.join(",")));
        if let Some(scene) = &self.scene {
            meta.push_str(&format!("period={}\n", scene.period));
            meta.push_str(&format!("seed={}\n", scene.seed));
            meta.push_str(&format!("scene.width={}\n", scene.width));
            meta.push_str(&format!("scene.height={}\n", scene.height));
            meta.push_str(&format!("scene.period={}\n", scene.period));
            meta.push_str(&format!("scene.n_steps={}\n", scene.n_steps));
            meta.push_str(&format!("scene.phase_a={}\n", scene.phase_plane.0));
            meta.push_str(&format!("scene.phase_b={}\n", scene.phase_plane.1));
            meta.push_str(&format!("scene.phase_c={}\n", scene.phase_plane.2));
            meta.push_str(&format!("scene.defocus_left={}\n", scene.defocus_sigma.0));
            meta.push_str(&format!("scene.defocus_right={}\n", scene.defocus_sigma.1));
            meta.push_str(&format!("scene.noise_sigma={}\n", scene.noise_sigma));
            meta.push_str(&format!("scene.background={}\n", scene.background));
            meta.push_str(&format!("scene.modulation={}\n", scene.modulation));
            let harm: Vec<String> = scene
                .harmonics
                .iter()
                .map(|(k, a)| format!("{k}:{a}"))
                .collect();
            meta.push_str(&format!("scene.harmonics={}\n", harm.join(",")));
            meta.push_str(&format!("scene.seam_gap={}\n", scene.seam_gap));
            meta.push_str(&format!("scene.seed={}\n", scene.seed));
        }
        fs::write(dir.join("stack.meta"), meta)?;
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<FringeStack> {
        let meta_path = dir.join("stack.meta");
        let meta = fs::read_to_string(&meta_path)?;
        let mut kv = BTreeMap::new();
        for line in meta.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::format(&meta_path, 0, format!("expected key=value, found {line:?}"))
            })?;
            kv.insert(key.trim().to_string(), value.trim().to_string());
        }
        let n_steps: usize = parse_meta(&kv, "n_steps", &meta_path)?;
        let shifts_raw = kv
            .get("shifts")
            .ok_or_else(|| Error::format(&meta_path, 0, "missing shifts"))?;
        let shifts: Vec<f64> = shifts_raw
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::format(&meta_path, 0, format!("bad shift value {s:?}")))
            })
            .collect::<Result<_>>()?;
        if shifts.len() != n_steps {
            return Err(Error::format(
                &meta_path,
                0,
                format!("{} shifts for n_steps={n_steps}", shifts.len()),
            ));
        }
        let mut images = Vec::with_capacity(n_steps);
        for i in 0..n_steps {
            images.push(pgm::read_pgm16(&dir.join(step_name(i)))?);
        }
        let scene = load_scene(&kv);
        FringeStack::new(images, shifts, scene)
    }
}

fn step_name(index: usize) -> String {
    format!("step_{:02}.pgm", index + 1)
}

fn parse_meta<T: std::str::FromStr>(
    kv: &BTreeMap<String, String>,
    key: &str,
    path: &Path,
) -> Result<T> {
    kv.get(key)
        .ok_or_else(|| Error::format(path, 0, format!("missing {key}")))?
        .parse::<T>()
        .map_err(|_| Error::format(path, 0, format!("bad value for {key}")))
}

/// Scene provenance is optional; reconstruct it only if every field parses.
fn load_scene(kv: &BTreeMap<String, String>) -> Option<SceneSpec> {
    let get = |k: &str| kv.get(&format!("scene.{k}"));
    let harmonics = match get("harmonics") {
        Some(s) if s.is_empty() => Vec::new(),
        Some(s) => {
            let mut list = Vec::new();
            for part in s.split(',') {
                let (k, a) = part.split_once(':')?;
                list.push((k.trim().parse().ok()?, a.trim().parse().ok()?));
            }
            list
        }
        None => return None,
    };
    Some(SceneSpec {
        width: get("width")?.parse().ok()?,
        height: get("height")?.parse().ok()?,
        period: get("period")?.parse().ok()?,
        n_steps: get("n_steps")?.parse().ok()?,
        phase_plane: (
            get("phase_a")?.parse().ok()?,
            get("phase_b")?.parse().ok()?,
            get("phase_c")?.parse().ok()?,
        ),
        defocus_sigma: (
            get("defocus_left")?.parse().ok()?,
            get("defocus_right")?.parse().ok()?,
        ),
        noise_sigma: get("noise_sigma")?.parse().ok()?,
        background: get("background")?.parse().ok()?,
        modulation: get("modulation")?.parse().ok()?,
        harmonics,
        seam_gap: get("seam_gap")?.parse().ok()?,
        seed: get("seed")?.parse().ok()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_stack() -> FringeStack {
        let n = 6;
        let images = (0..n)
            .map(|i| Array2::from_shape_fn((4, 5), |(y, x)| ((x + y + i) % 7) as f64 / 10.0))
            .collect();
        FringeStack::new(images, FringeStack::uniform_shifts(n), Some(SceneSpec::desk_default()))
            .unwrap()
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let images = vec![Array2::zeros((4, 5)), Array2::zeros((5, 4))];
        let err = FringeStack::new(images, FringeStack::uniform_shifts(2), None).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn rejects_nonuniform_shifts() {
        let images = vec![Array2::zeros((2, 2)); 4];
        let mut shifts = FringeStack::uniform_shifts(4);
        shifts[2] += 0.01;
        assert!(FringeStack::new(images, shifts, None).is_err());
    }

    #[test]
    fn directory_round_trip_preserves_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let stack = tiny_stack();
        stack.save_dir(dir.path()).unwrap();
        let back = FringeStack::load_dir(dir.path()).unwrap();
        assert_eq!(back.n_steps(), 6);
        assert_eq!(back.shifts(), stack.shifts());
        assert_eq!(back.scene, stack.scene);
        // Intensities round-trip through 16-bit quantization.
        for (a, b) in stack.images()[3].iter().zip(back.images()[3].iter()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }

    #[test]
    fn quantize_8bit_snaps_to_levels() {
        let stack = tiny_stack().quantize_8bit();
        for img in stack.images() {
            for v in img.iter() {
                let steps = v * 255.0;
                assert!((steps - steps.round()).abs() < 1e-9);
            }
        }
    }
}
