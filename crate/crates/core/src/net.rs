//! The feedforward phase estimator: N inputs, three hidden layers of
//! twelve neurons, two outputs (sin, cos), with the same saturating
//! activation on every layer including the output.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// `F(x) = 2/(1 + e^(-2x)) - 1`, which is tanh in disguise; evaluating it
/// as tanh saturates cleanly for large |x| instead of overflowing.
pub fn activation(x: f64) -> f64 {
    x.tanh()
}

/// `F'` expressed through the activation output: `1 - F(x)^2`.
pub fn activation_deriv(fx: f64) -> f64 {
    1.0 - fx * fx
}

/// How inference must preprocess a normalized pixel vector; fixed by the
/// dataset representation the network was trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputMode {
    /// Feed the normalized vector directly.
    Plain,
    /// Apply rotate-to-max first and undo the label compensation after.
    RotateToMax,
}

pub const HIDDEN_WIDTH: usize = 12;
pub const HIDDEN_LAYERS: usize = 3;

/// Dense feedforward network. Layer `l` maps `dims[l] -> dims[l+1]` through
/// weights stored row-major (one row per output neuron) plus a bias, then
/// the activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    pub input_mode: InputMode,
}

impl Network {
    /// The standard topology for an N-step estimator: [N, 12, 12, 12, 2].
    pub fn phase_estimator_dims(n_steps: usize) -> Vec<usize> {
        let mut dims = vec![n_steps];
        dims.extend(std::iter::repeat(HIDDEN_WIDTH).take(HIDDEN_LAYERS));
        dims.push(2);
        dims
    }

    /// Seeded uniform init in +/-sqrt(6/(fan_in+fan_out)).
    pub fn init(dims: Vec<usize>, input_mode: InputMode, rng: &mut ChaCha8Rng) -> Result<Self> {
        Network::init_scaled(dims, input_mode, 1.0, rng)
    }

    /// Init with the uniform bound multiplied by `scale`. Bounds near 1
    /// start the units in their linear regime; estimating strongly
    /// non-sinusoidal fringes needs saturating units early, which a larger
    /// scale provides.
    pub fn init_scaled(
        dims: Vec<usize>,
        input_mode: InputMode,
        scale: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        validate_dims(&dims)?;
        if !(scale > 0.0) {
            return Err(Error::Config(format!(
                "init scale must be > 0 (got {scale})"
            )));
        }
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = scale * (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Network {
            dims,
            weights,
            biases,
            input_mode,
        })
    }

    /// All-zero parameters; mostly useful in tests.
    pub fn zeros(dims: Vec<usize>, input_mode: InputMode) -> Result<Self> {
        validate_dims(&dims)?;
        let weights = (0..dims.len() - 1)
            .map(|l| vec![0.0; dims[l] * dims[l + 1]])
            .collect();
        let biases = (0..dims.len() - 1).map(|l| vec![0.0; dims[l + 1]]).collect();
        Ok(Network {
            dims,
            weights,
            biases,
            input_mode,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub(crate) fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        (&self.weights[l], &self.biases[l])
    }

    /// Raw per-layer parameters (weights row-major, then biases), mutable.
    /// Meant for optimizers and gradient checking; keeping the shapes
    /// consistent is the caller's responsibility.
    pub fn params_mut(&mut self) -> (&mut Vec<Vec<f64>>, &mut Vec<Vec<f64>>) {
        (&mut self.weights, &mut self.biases)
    }

    /// Runs the network, returning (O_s, O_c). Both outputs lie in (-1, 1)
    /// because the output layer is activated too.
    pub fn forward(&self, input: &[f64]) -> Result<(f64, f64)> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} values, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut scratch = Scratch::new(&self.dims);
        self.forward_trace(input, &mut scratch);
        let out = scratch.output();
        Ok((out[0], out[1]))
    }

    /// Forward pass that keeps every layer's activations for backprop.
    pub(crate) fn forward_trace(&self, input: &[f64], scratch: &mut Scratch) {
        debug_assert_eq!(input.len(), self.input_dim());
        scratch.activations[0].copy_from_slice(input);
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            let (prev_slice, next_slice) = scratch.activations.split_at_mut(l + 1);
            let prev = &prev_slice[l];
            let next = &mut next_slice[0];
            let fan_in = self.dims[l];
            for (o, out) in next.iter_mut().enumerate() {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let mut acc = b[o];
                for (wi, ai) in row.iter().zip(prev.iter()) {
                    acc += wi * ai;
                }
                *out = activation(acc);
            }
        }
    }

    /// Exact gradients of the per-sample loss
    /// `0.5*((O_s - t_s)^2 + (O_c - t_c)^2)` for every parameter.
    /// Returns the gradients and the loss value.
    pub fn backward(&self, input: &[f64], target: (f64, f64)) -> Result<(Gradients, f64)> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} values, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut scratch = Scratch::new(&self.dims);
        let mut grads = Gradients::zeros(&self.dims);
        let loss = self.accumulate_gradients(input, target, &mut scratch, &mut grads);
        Ok((grads, loss))
    }

    /// Adds this sample's gradients into `grads`; shared by `backward` and
    /// the batched training loop.
    pub(crate) fn accumulate_gradients(
        &self,
        input: &[f64],
        target: (f64, f64),
        scratch: &mut Scratch,
        grads: &mut Gradients,
    ) -> f64 {
        self.forward_trace(input, scratch);
        let (os, oc) = {
            let out = scratch.output();
            (out[0], out[1])
        };
        let (es, ec) = (os - target.0, oc - target.1);
        let loss = 0.5 * (es * es + ec * ec);

        // Output deltas: dL/dz = (a - t) * F'(z), with F' from the output.
        scratch.delta[0] = es * activation_deriv(os);
        scratch.delta[1] = ec * activation_deriv(oc);

        for l in (0..self.n_layers()).rev() {
            let fan_in = self.dims[l];
            let fan_out = self.dims[l + 1];
            let prev = &scratch.activations[l];
            let (w, _) = self.layer(l);
            for o in 0..fan_out {
                let d = scratch.delta[o];
                grads.biases[l][o] += d;
                let grow = &mut grads.weights[l][o * fan_in..(o + 1) * fan_in];
                for (g, a) in grow.iter_mut().zip(prev.iter()) {
                    *g += d * a;
                }
            }
            if l > 0 {
                for i in 0..fan_in {
                    let mut acc = 0.0;
                    for o in 0..fan_out {
                        acc += scratch.delta[o] * w[o * fan_in + i];
                    }
                    scratch.next_delta[i] = acc * activation_deriv(prev[i]);
                }
                scratch.delta[..fan_in].copy_from_slice(&scratch.next_delta[..fan_in]);
            }
        }
        loss
    }

    pub fn all_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Weight file: magic "PWNN", version (1 = plain input, 2 = rotate-to-
    /// max input), layer count, layer dims, then little-endian f64 weights
    /// (row-major) and biases per layer.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        let version: u32 = match self.input_mode {
            InputMode::Plain => 1,
            InputMode::RotateToMax => 2,
        };
        w.write_all(&version.to_le_bytes())?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for l in 0..self.n_layers() {
            for v in &self.weights[l] {
                w.write_all(&v.to_le_bytes())?;
            }
            for v in &self.biases[l] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Network> {
        let mut r = BufReader::new(File::open(path)?);
        let mut offset = 0u64;
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, path, &mut offset)?;
        if &magic != MAGIC {
            return Err(Error::format(path, 0, "bad magic, expected PWNN"));
        }
        let version = read_u32(&mut r, path, &mut offset)?;
        let input_mode = match version {
            1 => InputMode::Plain,
            2 => InputMode::RotateToMax,
            other => {
                return Err(Error::Version {
                    path: path.to_path_buf(),
                    found: other,
                    supported: "1 (plain input) or 2 (rotate-to-max input)",
                })
            }
        };
        let n_dims = read_u32(&mut r, path, &mut offset)? as usize;
        if !(2..=64).contains(&n_dims) {
            return Err(Error::format(path, offset - 4, "implausible layer count"));
        }
        let mut dims = Vec::with_capacity(n_dims);
        for _ in 0..n_dims {
            dims.push(read_u32(&mut r, path, &mut offset)? as usize);
        }
        validate_dims(&dims).map_err(|e| Error::format(path, offset, e.to_string()))?;

        let mut net = Network::zeros(dims, input_mode).expect("dims validated");
        for l in 0..net.n_layers() {
            for i in 0..net.weights[l].len() {
                net.weights[l][i] = read_f64(&mut r, path, &mut offset)?;
            }
            for i in 0..net.biases[l].len() {
                net.biases[l][i] = read_f64(&mut r, path, &mut offset)?;
            }
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::format(path, offset, "trailing bytes after weights"));
        }
        Ok(net)
    }
}

const MAGIC: &[u8; 4] = b"PWNN";

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Config("network needs at least one layer".into()));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::Config("layer widths must be positive".into()));
    }
    if *dims.last().unwrap() != 2 {
        return Err(Error::Config(format!(
            "output layer must have width 2 (sin, cos), got {}",
            dims.last().unwrap()
        )));
    }
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path, offset: &mut u64) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::format(path, *offset, "unexpected end of file"))?;
    *offset += buf.len() as u64;
    Ok(())
}

fn read_u32(r: &mut impl Read, path: &Path, offset: &mut u64) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, path, offset)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read, path: &Path, offset: &mut u64) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, path, offset)?;
    Ok(f64::from_le_bytes(b))
}

/// Reusable per-thread buffers for forward/backward passes.
#[derive(Clone, Debug)]
pub(crate) struct Scratch {
    pub activations: Vec<Vec<f64>>,
    pub delta: Vec<f64>,
    pub next_delta: Vec<f64>,
}

impl Scratch {
    pub fn new(dims: &[usize]) -> Self {
        let max_dim = *dims.iter().max().unwrap();
        Scratch {
            activations: dims.iter().map(|&d| vec![0.0; d]).collect(),
            delta: vec![0.0; max_dim],
            next_delta: vec![0.0; max_dim],
        }
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

/// Parameter gradients with the same layout as the network.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros(dims: &[usize]) -> Self {
        Gradients {
            weights: (0..dims.len() - 1)
                .map(|l| vec![0.0; dims[l] * dims[l + 1]])
                .collect(),
            biases: (0..dims.len() - 1).map(|l| vec![0.0; dims[l + 1]]).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for x in v.iter_mut() {
                *x *= s;
            }
        }
    }
}
