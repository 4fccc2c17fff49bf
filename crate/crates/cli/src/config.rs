//! Flat key=value experiment configuration with section prefixes
//! (`scene.period=32`). Unknown keys are rejected so typos fail loudly.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use pwppe_core::{
    BuildOptions, DatasetMode, Error, OptimizerKind, PatternKind, Result, SceneSpec, TrainConfig,
};

#[derive(Clone, Debug)]
pub struct EvalSettings {
    pub out_dir: PathBuf,
    /// Profile row; the image middle when absent.
    pub row: Option<usize>,
    /// Names of the generalization variations to run in `repro`.
    pub variations: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub scene: SceneSpec,
    pub pattern: PatternKind,
    pub dataset: BuildOptions,
    pub train: TrainConfig,
    pub eval: EvalSettings,
}

pub const KNOWN_VARIATIONS: [&str; 4] = ["defocus", "pose_tilt", "pose_yaw", "intensity"];

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, found {raw:?}", lineno + 1))
            })?;
            if kv.insert(key.trim().to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {}",
                    lineno + 1,
                    key.trim()
                )));
            }
        }
        Self::from_map(kv)
    }

    fn from_map(mut kv: BTreeMap<String, String>) -> Result<Self> {
        let mut take = |key: &str| kv.remove(key);

        let mut scene = SceneSpec::desk_default();
        if let Some(v) = take("scene.width") {
            scene.width = parse(&v, "scene.width")?;
        }
        if let Some(v) = take("scene.height") {
            scene.height = parse(&v, "scene.height")?;
        }
        if let Some(v) = take("scene.period") {
            scene.period = parse(&v, "scene.period")?;
            // Keep one fringe per period unless the slope is set explicitly.
            scene.phase_plane.0 = TAU / scene.period;
        }
        if let Some(v) = take("scene.n_steps") {
            scene.n_steps = parse(&v, "scene.n_steps")?;
        }
        if let Some(v) = take("scene.phase_a") {
            scene.phase_plane.0 = parse(&v, "scene.phase_a")?;
        }
        if let Some(v) = take("scene.phase_b") {
            scene.phase_plane.1 = parse(&v, "scene.phase_b")?;
        }
        if let Some(v) = take("scene.phase_c") {
            scene.phase_plane.2 = parse(&v, "scene.phase_c")?;
        }
        if let Some(v) = take("scene.defocus_left") {
            scene.defocus_sigma.0 = parse(&v, "scene.defocus_left")?;
        }
        if let Some(v) = take("scene.defocus_right") {
            scene.defocus_sigma.1 = parse(&v, "scene.defocus_right")?;
        }
        if let Some(v) = take("scene.noise_sigma") {
            scene.noise_sigma = parse(&v, "scene.noise_sigma")?;
        }
        if let Some(v) = take("scene.background") {
            scene.background = parse(&v, "scene.background")?;
        }
        if let Some(v) = take("scene.modulation") {
            scene.modulation = parse(&v, "scene.modulation")?;
        }
        if let Some(v) = take("scene.harmonics") {
            scene.harmonics = parse_harmonics(&v)?;
        }
        if let Some(v) = take("scene.seam_gap") {
            scene.seam_gap = parse(&v, "scene.seam_gap")?;
        }
        if let Some(v) = take("scene.seed") {
            scene.seed = parse(&v, "scene.seed")?;
        }
        let pattern = match take("scene.pattern") {
            Some(v) => v.parse::<PatternKind>()?,
            None => PatternKind::BinaryDefocused,
        };

        let mut dataset = BuildOptions::default();
        if let Some(v) = take("dataset.mode") {
            dataset.mode = v.parse::<DatasetMode>()?;
        }
        if let Some(v) = take("dataset.sample_fraction") {
            dataset.sample_fraction = parse(&v, "dataset.sample_fraction")?;
        }
        if let Some(v) = take("dataset.train_ratio") {
            dataset.train_ratio = parse(&v, "dataset.train_ratio")?;
        }
        if let Some(v) = take("dataset.seed") {
            dataset.seed = parse(&v, "dataset.seed")?;
        }

        let mut train = TrainConfig::default();
        if let Some(v) = take("train.iterations") {
            train.iterations = parse(&v, "train.iterations")?;
        }
        if let Some(v) = take("train.learning_rate") {
            train.learning_rate = parse(&v, "train.learning_rate")?;
        }
        if let Some(v) = take("train.lr_final") {
            if !v.is_empty() {
                train.lr_final = Some(parse(&v, "train.lr_final")?);
            }
        }
        if let Some(v) = take("train.batch_size") {
            train.batch_size = parse(&v, "train.batch_size")?;
        }
        if let Some(v) = take("train.optimizer") {
            train.optimizer = v.parse::<OptimizerKind>()?;
        }
        if let Some(v) = take("train.target_mse") {
            train.target_mse = parse(&v, "train.target_mse")?;
        }
        if let Some(v) = take("train.init_scale") {
            train.init_scale = parse(&v, "train.init_scale")?;
        }
        if let Some(v) = take("train.seed") {
            train.seed = parse(&v, "train.seed")?;
        }

        let out_dir = PathBuf::from(take("eval.out_dir").unwrap_or_else(|| "out".into()));
        let row = match take("eval.row") {
            Some(v) if !v.is_empty() => Some(parse(&v, "eval.row")?),
            _ => None,
        };
        let variations = match take("eval.variations") {
            None => KNOWN_VARIATIONS.iter().map(|s| s.to_string()).collect(),
            Some(v) if v.is_empty() || v == "none" => Vec::new(),
            Some(v) => {
                let names: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
                for name in &names {
                    if !KNOWN_VARIATIONS.contains(&name.as_str()) {
                        return Err(Error::Config(format!(
                            "unknown variation {name:?}, expected one of {KNOWN_VARIATIONS:?}"
                        )));
                    }
                }
                names
            }
        };

        if let Some((key, _)) = kv.into_iter().next() {
            return Err(Error::Config(format!("unknown config key {key:?}")));
        }

        scene.validate()?;
        train.validate()?;
        Ok(ExperimentConfig {
            scene,
            pattern,
            dataset,
            train,
            eval: EvalSettings {
                out_dir,
                row,
                variations,
            },
        })
    }
}

fn parse<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_harmonics(value: &str) -> Result<Vec<(u32, f64)>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for part in value.split(',') {
        let (k, amp) = part.split_once(':').ok_or_else(|| {
            Error::Config(format!("harmonic {part:?} must be order:amplitude"))
        })?;
        out.push((
            parse(k.trim(), "scene.harmonics order")?,
            parse(amp.trim(), "scene.harmonics amplitude")?,
        ));
    }
    Ok(out)
}
