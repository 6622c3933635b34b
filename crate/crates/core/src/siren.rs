//! Sine-activation MLP over Fourier feature rows.
//!
//! Hidden layers compute `sin(W z + b)`; the single output neuron applies a
//! sigmoid, so every prediction lies strictly in (0, 1). Gradients are
//! hand-derived for exactly this architecture (the sine derivative is the
//! cosine of the cached pre-activation), no autodiff engine involved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{sigmoid, MappingMatrix};
use crate::lattice::FrequencyLattice;

pub const DEFAULT_HIDDEN_DIMS: [usize; 3] = [256, 256, 256];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Row-major `out x in` weights.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Weights and biases of the MLP, with the dims chain and the seed that
/// initialized them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirenParams {
    dims: Vec<usize>,
    layers: Vec<Layer>,
    seed: u64,
}

impl SirenParams {
    /// Build from explicit layers; dims must chain and end in one output.
    pub fn from_layers(dims: Vec<usize>, layers: Vec<Layer>, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.len() != layers.len() + 1 {
            return Err(Error::InvalidConfig(format!(
                "{} dims cannot frame {} layers",
                dims.len(),
                layers.len()
            )));
        }
        if *dims.last().unwrap() != 1 {
            return Err(Error::InvalidConfig("output layer must have one neuron".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            if layer.weights.len() != fan_in * fan_out || layer.biases.len() != fan_out {
                return Err(Error::ShapeMismatch(format!(
                    "layer {l} expects {fan_out}x{fan_in} weights and {fan_out} biases"
                )));
            }
        }
        Ok(SirenParams { dims, layers, seed })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    /// Total parameter count across all weights and biases.
    pub fn flat_len(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Copy parameters into one flat vector: per layer, weights then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    /// Overwrite parameters from a flat vector laid out as [`to_flat`].
    pub fn from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.flat_len() {
            return Err(Error::ShapeMismatch(format!(
                "flat vector has {} values, network has {} parameters",
                flat.len(),
                self.flat_len()
            )));
        }
        let mut pos = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[pos..pos + nw]);
            pos += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&flat[pos..pos + nb]);
            pos += nb;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        Self::from_layers(self.dims.clone(), self.layers.clone(), self.seed).map(|_| ())
    }
}

/// Initialize an MLP whose input width is the lattice feature width `2c`.
///
/// Weights are drawn uniformly from `(-sqrt(6/fan_in), sqrt(6/fan_in))` by a
/// deterministic generator; biases start at zero.
pub fn init_siren(
    lattice: &FrequencyLattice,
    hidden_dims: &[usize],
    seed: u64,
) -> Result<SirenParams> {
    init_siren_with_input_dim(2 * lattice.len(), hidden_dims, seed)
}

/// [`init_siren`] with an explicit input width (used when extra feature
/// channels are concatenated onto the Fourier features).
pub fn init_siren_with_input_dim(
    input_dim: usize,
    hidden_dims: &[usize],
    seed: u64,
) -> Result<SirenParams> {
    if hidden_dims.is_empty() {
        return Err(Error::InvalidConfig("hidden_dims must be nonempty".into()));
    }
    if input_dim == 0 || hidden_dims.contains(&0) {
        return Err(Error::InvalidConfig("layer widths must be positive".into()));
    }
    let mut dims = Vec::with_capacity(hidden_dims.len() + 2);
    dims.push(input_dim);
    dims.extend_from_slice(hidden_dims);
    dims.push(1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for l in 0..dims.len() - 1 {
        let (fan_in, fan_out) = (dims[l], dims[l + 1]);
        let bound = (6.0 / fan_in as f64).sqrt();
        let weights = (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
        layers.push(Layer { weights, biases: vec![0.0; fan_out] });
    }
    SirenParams::from_layers(dims, layers, seed)
}

fn check_width(params: &SirenParams, width: usize) -> Result<()> {
    if width != params.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "features have width {width}, network expects {}",
            params.input_dim()
        )));
    }
    Ok(())
}

fn affine(layer: &Layer, fan_in: usize, input: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for (o, &b) in layer.biases.iter().enumerate() {
        let row = &layer.weights[o * fan_in..(o + 1) * fan_in];
        let mut z = b;
        for (wv, av) in row.iter().zip(input) {
            z += wv * av;
        }
        out.push(z);
    }
}

/// Pre-activations of every layer for one input row, shared by forward and
/// backward. The last entry has length 1.
fn forward_cache(params: &SirenParams, row: &[f64]) -> Vec<Vec<f64>> {
    let n_layers = params.layers.len();
    let mut caches = Vec::with_capacity(n_layers);
    let mut activ = row.to_vec();
    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = Vec::new();
        affine(layer, params.dims[l], &activ, &mut z);
        if l + 1 < n_layers {
            activ = z.iter().map(|v| v.sin()).collect();
        }
        caches.push(z);
    }
    caches
}

/// Evaluate one feature row to a value in (0, 1).
pub fn siren_forward_row(params: &SirenParams, row: &[f64]) -> Result<f64> {
    check_width(params, row.len())?;
    let caches = forward_cache(params, row);
    Ok(sigmoid(caches.last().expect("at least one layer")[0]))
}

/// Evaluate every feature row to a value in (0, 1).
pub fn siren_forward(params: &SirenParams, features: &MappingMatrix) -> Result<Vec<f64>> {
    check_width(params, features.cols())?;
    (0..features.rows()).map(|r| siren_forward_row(params, features.row(r))).collect()
}

/// Parameter and input-feature gradients for a batch of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SirenGradients {
    /// Flat layout matching [`SirenParams::to_flat`].
    pub params: Vec<f64>,
    /// Row-major `p x input_dim`, aligned with the input features.
    pub features: Vec<f64>,
}

/// Exact analytic gradients of `sum_r upstream_r * output_r` with respect to
/// every weight, bias and input feature.
pub fn siren_backward(
    params: &SirenParams,
    features: &MappingMatrix,
    upstream: &[f64],
) -> Result<SirenGradients> {
    check_width(params, features.cols())?;
    if upstream.len() != features.rows() {
        return Err(Error::ShapeMismatch(format!(
            "upstream has {} entries, features have {} rows",
            upstream.len(),
            features.rows()
        )));
    }

    let n_layers = params.layers.len();
    let mut grad_layers: Vec<Layer> = params
        .layers
        .iter()
        .map(|l| Layer { weights: vec![0.0; l.weights.len()], biases: vec![0.0; l.biases.len()] })
        .collect();
    let mut grad_features = vec![0.0; features.rows() * features.cols()];

    for r in 0..features.rows() {
        let row = features.row(r);
        let caches = forward_cache(params, row);

        // Post-activation outputs of each hidden layer, rebuilt from caches.
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        activations.push(row.to_vec());
        for z in caches.iter().take(n_layers - 1) {
            activations.push(z.iter().map(|v| v.sin()).collect());
        }

        let y = sigmoid(caches[n_layers - 1][0]);
        let mut dz = vec![upstream[r] * y * (1.0 - y)];
        for l in (0..n_layers).rev() {
            let fan_in = params.dims[l];
            let layer = &params.layers[l];
            let grad = &mut grad_layers[l];
            let input = &activations[l];
            let mut da_prev = vec![0.0; fan_in];
            for (o, &dzo) in dz.iter().enumerate() {
                grad.biases[o] += dzo;
                let w_row = &layer.weights[o * fan_in..(o + 1) * fan_in];
                let g_row = &mut grad.weights[o * fan_in..(o + 1) * fan_in];
                for i in 0..fan_in {
                    g_row[i] += dzo * input[i];
                    da_prev[i] += dzo * w_row[i];
                }
            }
            if l == 0 {
                let dst = &mut grad_features[r * features.cols()..(r + 1) * features.cols()];
                dst.copy_from_slice(&da_prev);
            } else {
                // d sin(z) = cos(z) dz
                dz = da_prev
                    .iter()
                    .zip(&caches[l - 1])
                    .map(|(da, z)| da * z.cos())
                    .collect();
            }
        }
    }

    let mut flat = Vec::with_capacity(params.flat_len());
    for layer in &grad_layers {
        flat.extend_from_slice(&layer.weights);
        flat.extend_from_slice(&layer.biases);
    }
    Ok(SirenGradients { params: flat, features: grad_features })
}
