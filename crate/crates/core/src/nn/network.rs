use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{config, shape, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    /// Derivative evaluated at the pre-activation value (0 at the ReLU kink).
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Fully connected layer `act(drop(x) W + b)`; dropout acts on the layer input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
    pub dropout_rate: f64,
}

impl DenseLayer {
    pub fn new(
        weights: Matrix,
        bias: Vec<f64>,
        activation: Activation,
        dropout_rate: f64,
    ) -> Result<Self> {
        if bias.len() != weights.cols() {
            return shape(format!(
                "bias of length {} does not match {} output units",
                bias.len(),
                weights.cols()
            ));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return config(format!("dropout rate {dropout_rate} outside [0, 1)"));
        }
        Ok(Self {
            weights,
            bias,
            activation,
            dropout_rate,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        dropout_rate: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self::new(
            Matrix::from_vec(in_dim, out_dim, data)?,
            vec![0.0; out_dim],
            activation,
            dropout_rate,
        )
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }
}

/// Layer sizes of an autoencoder. `hidden[latent_position]` is the code layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub latent_position: usize,
    pub output_dim: usize,
    pub dropout: f64,
}

impl Architecture {
    /// Seven ReLU hidden layers `(8, 8, 128, 4, 128, 8, 8)` with dropout 0.2 and
    /// a 4-unit code, followed by a linear reconstruction layer.
    pub fn traffic_default(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: vec![8, 8, 128, 4, 128, 8, 8],
            latent_position: 3,
            output_dim,
            dropout: 0.2,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.hidden[self.latent_position]
    }
}

/// Dense autoencoder; `layers[..latent_index]` form the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
    pub latent_index: usize,
    pub rng_seed: u64,
}

/// Dropout behaviour for a forward pass.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

struct LayerCache {
    /// Layer input after dropout.
    input: Matrix,
    /// Inverted-dropout multipliers for the input, if dropout was applied.
    mask: Option<Vec<f64>>,
    pre: Matrix,
}

/// Activations retained for backpropagation.
pub struct ForwardPass {
    pub latent: Matrix,
    pub output: Matrix,
    cache: Vec<LayerCache>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients, one entry per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    /// Flat views in the same order as [`Network::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|g| [g.weights.as_slice(), g.bias.as_slice()])
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>, latent_index: usize, rng_seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return config("network needs at least one layer");
        }
        if latent_index == 0 || latent_index > layers.len() {
            return config(format!(
                "latent index {latent_index} is not a layer boundary of a {}-layer network",
                layers.len()
            ));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return config(format!(
                    "layer {k} emits {} units but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                ));
            }
        }
        Ok(Self {
            layers,
            latent_index,
            rng_seed,
        })
    }

    /// Randomly initialized autoencoder. Hidden layers use ReLU, the output
    /// layer is linear. Dropout is applied to every layer input except the
    /// raw network input.
    pub fn from_architecture(arch: &Architecture, seed: u64) -> Result<Self> {
        if arch.latent_position >= arch.hidden.len() {
            return config("latent position outside the hidden layers");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![arch.input_dim];
        dims.extend(&arch.hidden);
        dims.push(arch.output_dim);
        let n_layers = dims.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for k in 0..n_layers {
            let activation = if k + 1 == n_layers {
                Activation::Linear
            } else {
                Activation::Relu
            };
            let dropout = if k == 0 { 0.0 } else { arch.dropout };
            layers.push(DenseLayer::glorot(
                dims[k],
                dims[k + 1],
                activation,
                dropout,
                &mut rng,
            )?);
        }
        Self::new(layers, arch.latent_position + 1, seed)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[self.latent_index - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Mutable flat parameter views: weights then bias for each layer.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn forward(&self, input: &Matrix, mut mode: Mode<'_>) -> Result<ForwardPass> {
        if input.cols() != self.input_dim() {
            return config(format!(
                "input has {} columns but the network expects {}",
                input.cols(),
                self.input_dim()
            ));
        }
        let mut cache = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        let mut latent = None;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut mask = None;
            if let Mode::Train(rng) = &mut mode {
                if layer.dropout_rate > 0.0 {
                    let keep = 1.0 - layer.dropout_rate;
                    let m: Vec<f64> = (0..current.as_slice().len())
                        .map(|_| {
                            if rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    for (v, f) in current.as_mut_slice().iter_mut().zip(&m) {
                        *v *= f;
                    }
                    mask = Some(m);
                }
            }
            let mut pre = current.matmul(&layer.weights)?;
            for row in 0..pre.rows() {
                for (v, b) in pre.row_mut(row).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            let mut act = pre.clone();
            let activation = layer.activation;
            act.map_inplace(|v| activation.apply(v));
            cache.push(LayerCache {
                input: current,
                mask,
                pre,
            });
            if k + 1 == self.latent_index {
                latent = Some(act.clone());
            }
            current = act;
        }
        Ok(ForwardPass {
            latent: latent.expect("latent index validated at construction"),
            output: current,
            cache,
        })
    }

    /// Encoder output with dropout disabled.
    pub fn encode(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.input_dim() {
            return config(format!(
                "input has {} columns but the network expects {}",
                input.cols(),
                self.input_dim()
            ));
        }
        let mut current = input.clone();
        for layer in &self.layers[..self.latent_index] {
            let mut next = current.matmul(&layer.weights)?;
            for row in 0..next.rows() {
                for (v, b) in next.row_mut(row).iter_mut().zip(&layer.bias) {
                    *v = layer.activation.apply(*v + b);
                }
            }
            current = next;
        }
        Ok(current)
    }

    /// Backpropagates `output_grad` (dL/d output) and `latent_grad`
    /// (dL/d latent from heads attached to the code layer).
    pub fn backward(
        &self,
        pass: &ForwardPass,
        output_grad: &Matrix,
        latent_grad: &Matrix,
    ) -> Result<Gradients> {
        if output_grad.shape() != pass.output.shape() {
            return shape(format!(
                "output gradient is {:?}, output is {:?}",
                output_grad.shape(),
                pass.output.shape()
            ));
        }
        if latent_grad.shape() != pass.latent.shape() {
            return shape(format!(
                "latent gradient is {:?}, latent is {:?}",
                latent_grad.shape(),
                pass.latent.shape()
            ));
        }
        let mut grads: Vec<Option<LayerGrads>> = vec![None; self.layers.len()];
        let mut upstream = output_grad.clone();
        for k in (0..self.layers.len()).rev() {
            if k + 1 == self.latent_index {
                upstream.add_assign(latent_grad)?;
            }
            let layer = &self.layers[k];
            let cache = &pass.cache[k];
            let mut dpre = upstream;
            for (g, &p) in dpre.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
                *g *= layer.activation.derivative(p);
            }
            let weights = cache.input.t_matmul(&dpre)?;
            let bias = dpre.col_sums();
            grads[k] = Some(LayerGrads { weights, bias });
            if k > 0 {
                let mut dinput = dpre.matmul_t(&layer.weights)?;
                if let Some(mask) = &cache.mask {
                    for (g, m) in dinput.as_mut_slice().iter_mut().zip(mask) {
                        *g *= m;
                    }
                }
                upstream = dinput;
            } else {
                upstream = Matrix::zeros(0, 0);
            }
        }
        Ok(Gradients {
            layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
        })
    }
}
