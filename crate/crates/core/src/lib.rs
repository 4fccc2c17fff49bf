//! Phase estimation for fringe projection profilometry at desk scale.
//!
//! The crate simulates phase-shifted fringe stacks over a tilted
//! calibration plane (ideal sinusoids, harmonic-contaminated sinusoids,
//! and defocused binary patterns), solves them with the classical
//! point-wise least-squares estimator, builds per-pixel training data with
//! plane-fitted labels, trains a small feedforward network that maps a
//! normalized intensity vector to (sin, cos) of the phase, and compares
//! both estimators quantitatively.
//!
//! Pipeline stages are pure functions of their inputs and seeds, so every
//! artifact is reproducible byte for byte.

pub mod dataset;
pub mod error;
pub mod estimator;
pub mod net;
pub mod pgm;
pub mod phase;
pub mod plane;
pub mod pwls;
pub mod report;
pub mod scene;
pub mod stack;
pub mod synth;
pub mod train;
pub mod unwrap;

pub use dataset::{
    augment, build, decode_target, encode_target, normalize, rotate_to_max, undo_rotation,
    BuildOptions, Dataset, DatasetMode, PixelSample, SampleOrigin,
};
pub use error::{Error, Result};
pub use estimator::{pwppe_solve, self_test_histogram, SelfTestMap};
pub use net::{activation, Gradients, InputMode, Network};
pub use phase::{wrap, PhaseKind, PhaseMap};
pub use plane::{fit_plane, make_ground_truth, make_ground_truth_with_fit, PlaneFit};
pub use pwls::{pwls_solve, MODULATION_EPS};
pub use report::{
    amplitude_spectrum, compare, emit, emit_sweep_csv, error_metrics, generalization_sweep,
    phase_error, spectrum_peak_at_6f, standard_variations, write_loss_history_csv, CompareOptions,
    EvalReport, Method, SceneVariation, DEFAULT_BANDS,
};
pub use scene::SceneSpec;
pub use stack::FringeStack;
pub use synth::{
    ground_truth_phase, ground_truth_unwrapped, synth, synth_binary_defocused, synth_sinusoidal,
    PatternKind,
};
pub use train::{train, OptimizerKind, TrainConfig, TrainResult};
pub use unwrap::{rewrap, unwrap_rows};
