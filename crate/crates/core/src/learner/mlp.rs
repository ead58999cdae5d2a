use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::Features;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `fan_in × fan_out`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    /// Dropout rate on this layer's input.
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl MlpParams {
    /// Uniform weights in `±√(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(input_dim: usize, hidden: &[usize], output_dim: usize, dropout: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidTrainConfig(format!("dropout {dropout} outside [0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(output_dim);
        let layers = dims
            .windows(2)
            .map(|d| {
                let bound = (6.0 / (d[0] + d[1]) as f64).sqrt();
                Layer {
                    weight: Array2::from_shape_fn((d[0], d[1]), |_| rng.random_range(-bound..bound)),
                    bias: Array1::zeros(d[1]),
                    dropout,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.nrows())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.ncols())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Weights then bias, layer by layer.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut pos = 0;
        for l in &mut self.layers {
            for w in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *w = flat[pos];
                pos += 1;
            }
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
            .map(|w| w * w)
            .sum()
    }

    fn check(&self, features: &Features) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidTrainConfig("MLP has no layers".into()));
        }
        for pair in self.layers.windows(2) {
            if pair[0].weight.ncols() != pair[1].weight.nrows() {
                return Err(Error::shape(
                    format!("layer input {}", pair[0].weight.ncols()),
                    format!("{}", pair[1].weight.nrows()),
                ));
            }
        }
        if features.ncols() != self.input_dim() {
            return Err(Error::shape(
                format!("{} feature columns", self.input_dim()),
                format!("{}", features.ncols()),
            ));
        }
        Ok(())
    }
}

/// Flattens gradients in the same order as [`MlpParams::to_flat`].
pub fn flatten_grads(grads: &[LayerGrad]) -> Vec<f64> {
    grads
        .iter()
        .flat_map(|g| g.weight.iter().chain(g.bias.iter()).copied())
        .collect()
}

/// Intermediate values kept for the backward pass.
pub(crate) struct Tape {
    input: Features,
    /// Post-dropout inputs of layers 1.. and their pre-activations.
    hidden_inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    /// Scaled keep masks applied to hidden inputs (`None` without dropout).
    masks: Vec<Option<Array2<f64>>>,
}

/// Affine/ReLU stack; no activation after the last layer.
pub fn mlp_forward(p: &MlpParams, features: &Features, dropout_active: bool, rng_seed: u64) -> Result<Array2<f64>> {
    forward_tape(p, features, dropout_active, rng_seed).map(|(out, _)| out)
}

pub(crate) fn forward_tape(
    p: &MlpParams,
    features: &Features,
    dropout_active: bool,
    rng_seed: u64,
) -> Result<(Array2<f64>, Tape)> {
    p.check(features)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let first = &p.layers[0];
    let input = if dropout_active {
        features.dropout(first.dropout, &mut rng)
    } else {
        features.clone()
    };
    let mut z = input.matmul(first.weight.view()) + &first.bias;
    let mut tape = Tape {
        input,
        hidden_inputs: Vec::new(),
        pre_activations: Vec::new(),
        masks: Vec::new(),
    };
    for layer in &p.layers[1..] {
        let mut a = z.mapv(|x| x.max(0.0));
        let mask = if dropout_active && layer.dropout > 0.0 {
            let scale = 1.0 / (1.0 - layer.dropout);
            let m = Array2::from_shape_fn(a.dim(), |_| {
                if rng.random::<f64>() < layer.dropout {
                    0.0
                } else {
                    scale
                }
            });
            a *= &m;
            Some(m)
        } else {
            None
        };
        let next = a.dot(&layer.weight) + &layer.bias;
        tape.pre_activations.push(z);
        tape.hidden_inputs.push(a);
        tape.masks.push(mask);
        z = next;
    }
    Ok((z, tape))
}

/// Gradients of a scalar with respect to every layer, given its gradient
/// with respect to the output logits.
pub(crate) fn backward(p: &MlpParams, tape: &Tape, d_out: Array2<f64>) -> Vec<LayerGrad> {
    let mut grads = Vec::with_capacity(p.layers.len());
    let mut dz = d_out;
    for l in (0..p.layers.len()).rev() {
        let bias = dz.sum_axis(Axis(0));
        let weight = if l == 0 {
            tape.input.t_matmul(dz.view())
        } else {
            tape.hidden_inputs[l - 1].t().dot(&dz)
        };
        grads.push(LayerGrad { weight, bias });
        if l > 0 {
            let mut da = dz.dot(&p.layers[l].weight.t());
            if let Some(m) = &tape.masks[l - 1] {
                da *= m;
            }
            ndarray::Zip::from(&mut da)
                .and(&tape.pre_activations[l - 1])
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            dz = da;
        }
    }
    grads.reverse();
    grads
}
