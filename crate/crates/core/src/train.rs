//! Mini-batch training loop with seeded shuffling and a choice of plain
//! gradient descent or adaptive-moment estimation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{Dataset, DatasetMode};
use crate::error::{Error, Result};
use crate::net::{Gradients, InputMode, Network, Scratch};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Momentum,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "momentum" => Ok(OptimizerKind::Momentum),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!(
                "unknown optimizer {other:?}, expected sgd, momentum or adam"
            ))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Momentum => "momentum",
            OptimizerKind::Adam => "adam",
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    /// Epoch budget; one iteration is a full pass over the sampled pool.
    pub iterations: usize,
    pub learning_rate: f64,
    /// Final learning rate of the geometric decay schedule across the
    /// epoch budget; `None` keeps the rate constant. Decay drains the
    /// optimizer's stationary noise, which otherwise floors the MSE.
    pub lr_final: Option<f64>,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Training stops early once the epoch MSE drops to this level.
    pub target_mse: f64,
    /// Multiplier on the uniform init bound; 1.0 is the standard
    /// fan-in/fan-out rule.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 10_000,
            learning_rate: 1e-3,
            lr_final: None,
            batch_size: 256,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            target_mse: 5e-4,
            init_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be > 0".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0 (got {})",
                self.learning_rate
            )));
        }
        if let Some(lf) = self.lr_final {
            if !(lf > 0.0 && lf <= self.learning_rate) {
                return Err(Error::Config(format!(
                    "lr_final must be in (0, learning_rate] (got {lf})"
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be > 0".into()));
        }
        if !(self.target_mse > 0.0) {
            return Err(Error::Config(format!(
                "target_mse must be > 0 (got {})",
                self.target_mse
            )));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::Config(format!(
                "init_scale must be > 0 (got {})",
                self.init_scale
            )));
        }
        Ok(())
    }

    /// Learning rate for a 1-based epoch under the geometric schedule.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_final {
            None => self.learning_rate,
            Some(lf) => {
                if self.iterations <= 1 {
                    return self.learning_rate;
                }
                let t = (epoch - 1) as f64 / (self.iterations - 1) as f64;
                self.learning_rate * (lf / self.learning_rate).powf(t)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub network: Network,
    /// Mean per-sample loss `0.5*|output - target|^2` of each epoch,
    /// i.e. the MSE over both output components.
    pub loss_history: Vec<f64>,
    /// Epoch (1-based) at which the target MSE was reached, if it was.
    pub converged_at: Option<usize>,
}

impl TrainResult {
    pub fn final_mse(&self) -> f64 {
        *self.loss_history.last().expect("training runs at least one epoch")
    }
}

/// Samples are split into fixed 64-sample chunks whose gradients are
/// reduced in chunk order, so results do not depend on thread scheduling.
const GRAD_CHUNK: usize = 64;

/// Trains a fresh phase-estimator network on the dataset. Deterministic
/// given the config seed; the network's input mode is inherited from the
/// dataset representation.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset("cannot train on an empty dataset".into()));
    }
    let input_mode = match data.mode() {
        DatasetMode::Accelerated => InputMode::RotateToMax,
        _ => InputMode::Plain,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Network::init_scaled(
        Network::phase_estimator_dims(data.n_steps()),
        input_mode,
        cfg.init_scale,
        &mut rng,
    )?;

    let mut optimizer = Optimizer::new(cfg, net.dims());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::new();
    let mut converged_at = None;

    for epoch in 1..=cfg.iterations {
        order.shuffle(&mut rng);
        let lr = cfg.lr_at(epoch);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (mut grads, loss_sum) = batch_gradients(&net, data, batch);
            grads.scale(1.0 / batch.len() as f64);
            optimizer.step(&mut net, &grads, lr);
            epoch_loss += loss_sum;
        }
        let mse = epoch_loss / data.len() as f64;
        history.push(mse);
        if !mse.is_finite() || !net.all_finite() {
            return Err(Error::TrainingDiverged {
                iteration: epoch,
                mse,
            });
        }
        if mse <= cfg.target_mse {
            converged_at = Some(epoch);
            break;
        }
    }
    Ok(TrainResult {
        network: net,
        loss_history: history,
        converged_at,
    })
}

fn batch_gradients(net: &Network, data: &Dataset, batch: &[usize]) -> (Gradients, f64) {
    if batch.len() <= GRAD_CHUNK {
        return chunk_gradients(net, data, batch);
    }
    let mut partials = Vec::new();
    batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| chunk_gradients(net, data, chunk))
        .collect_into_vec(&mut partials);
    let mut total = Gradients::zeros(net.dims());
    let mut loss = 0.0;
    for (g, l) in &partials {
        total.add(g);
        loss += l;
    }
    (total, loss)
}

fn chunk_gradients(net: &Network, data: &Dataset, chunk: &[usize]) -> (Gradients, f64) {
    let mut grads = Gradients::zeros(net.dims());
    let mut scratch = Scratch::new(net.dims());
    let mut loss = 0.0;
    for &i in chunk {
        loss += net.accumulate_gradients(data.input(i), data.target(i), &mut scratch, &mut grads);
    }
    (grads, loss)
}

struct Optimizer {
    kind: OptimizerKind,
    m: Gradients,
    v: Gradients,
    t: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    fn new(cfg: &TrainConfig, dims: &[usize]) -> Self {
        Optimizer {
            kind: cfg.optimizer,
            m: Gradients::zeros(dims),
            v: Gradients::zeros(dims),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Network, grads: &Gradients, lr: f64) {
        let (weights, biases) = net.params_mut();
        let params = weights.iter_mut().chain(biases.iter_mut());
        let gs = grads.weights.iter().chain(grads.biases.iter());
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.zip(gs) {
                    for (x, gi) in p.iter_mut().zip(g) {
                        *x -= lr * gi;
                    }
                }
            }
            OptimizerKind::Momentum => {
                let ms = self.m.weights.iter_mut().chain(self.m.biases.iter_mut());
                for ((p, g), m) in params.zip(gs).zip(ms) {
                    for i in 0..p.len() {
                        m[i] = BETA1 * m[i] + g[i];
                        p[i] -= lr * m[i];
                    }
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let bc1 = 1.0 - BETA1.powi(self.t as i32);
                let bc2 = 1.0 - BETA2.powi(self.t as i32);
                let ms = self.m.weights.iter_mut().chain(self.m.biases.iter_mut());
                let vs = self.v.weights.iter_mut().chain(self.v.biases.iter_mut());
                for (((p, g), m), v) in params.zip(gs).zip(ms).zip(vs) {
                    for i in 0..p.len() {
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                        let mhat = m[i] / bc1;
                        let vhat = v[i] / bc2;
                        p[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{encode_target, SampleOrigin};

    fn toy_dataset(n_samples: usize) -> Dataset {
        let mut data = Dataset::new(6, DatasetMode::Plain, 0);
        for i in 0..n_samples {
            let phi = -3.0 + 6.0 * i as f64 / n_samples as f64;
            let input: Vec<f64> = crate::stack::FringeStack::uniform_shifts(6)
                .iter()
                .map(|t| (phi + t).cos())
                .collect();
            data.push(
                &input,
                encode_target(phi),
                SampleOrigin {
                    x: i as u32,
                    y: 0,
                    aug: 0,
                },
            );
        }
        data
    }

    #[test]
    fn loss_is_non_increasing_for_small_sgd_steps() {
        let data = toy_dataset(10);
        let cfg = TrainConfig {
            iterations: 200,
            learning_rate: 1e-3,
            batch_size: 10,
            seed: 1,
            optimizer: OptimizerKind::Sgd,
            target_mse: 1e-12,
            ..TrainConfig::default()
        };
        let result = train(&data, &cfg).unwrap();
        for pair in result.loss_history.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-12,
                "loss increased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn training_is_deterministic_given_the_seed() {
        let data = toy_dataset(300);
        let cfg = TrainConfig {
            iterations: 30,
            batch_size: 64,
            seed: 9,
            target_mse: 1e-12,
            ..TrainConfig::default()
        };
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn divergence_is_reported_with_the_iteration() {
        // The saturating activation keeps healthy runs finite, so the
        // realistic divergence path is non-finite data poisoning the loss.
        let mut data = toy_dataset(50);
        data.push(
            &[f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0],
            (0.0, 1.0),
            SampleOrigin { x: 99, y: 0, aug: 0 },
        );
        let cfg = TrainConfig {
            iterations: 50,
            batch_size: 51,
            seed: 2,
            target_mse: 1e-12,
            ..TrainConfig::default()
        };
        match train(&data, &cfg) {
            Err(Error::TrainingDiverged { iteration, mse }) => {
                assert_eq!(iteration, 1);
                assert!(!mse.is_finite());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn adam_fits_the_toy_problem() {
        let data = toy_dataset(400);
        let cfg = TrainConfig {
            iterations: 3000,
            target_mse: 2e-4,
            seed: 3,
            ..TrainConfig::default()
        };
        let result = train(&data, &cfg).unwrap();
        assert!(
            result.final_mse() <= 2e-4,
            "final mse {}",
            result.final_mse()
        );
        assert!(result.converged_at.is_some());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let data = toy_dataset(10);
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&data, &bad), Err(Error::Config(_))));
        let empty = Dataset::new(6, DatasetMode::Plain, 0);
        assert!(matches!(
            train(&empty, &TrainConfig::default()),
            Err(Error::EmptyDataset(_))
        ));
    }
}
