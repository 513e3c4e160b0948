//! Small dense networks on the tape. Inputs and activations are laid out
//! `feature x batch`, so a layer is one `W.dot(x)` plus a broadcast bias.

use ndarray::Array2;
use rand::Rng;

use super::params::{BoundParams, ParameterSet};
use super::tape::{Node, Tape};
use crate::error::{OfrlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
}

/// Layer sizes and nonlinearity of a multilayer perceptron.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MlpArch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpArch {
    pub fn new(input_dim: usize, hidden: &[usize], output_dim: usize) -> Self {
        MlpArch {
            input_dim,
            hidden: hidden.to_vec(),
            output_dim,
            activation: Activation::Relu,
        }
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            dims.push((h, prev));
            prev = h;
        }
        dims.push((self.output_dim, prev));
        dims
    }
}

/// Uniform fan-in initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
/// With `zero_final` the last layer starts at exactly zero, so a freshly
/// built offset network contributes nothing to the composed critic.
pub fn mlp_init(arch: &MlpArch, rng: &mut impl Rng, zero_final: bool) -> ParameterSet {
    let mut params = ParameterSet::new();
    let dims = arch.layer_dims();
    let last = dims.len() - 1;
    for (l, &(out, inp)) in dims.iter().enumerate() {
        let (w, b) = if zero_final && l == last {
            (Array2::zeros((out, inp)), Array2::zeros((out, 1)))
        } else {
            let bound = 1.0 / (inp as f64).sqrt();
            let w = Array2::from_shape_fn((out, inp), |_| rng.random_range(-bound..bound));
            let b = Array2::from_shape_fn((out, 1), |_| rng.random_range(-bound..bound));
            (w, b)
        };
        params.push(format!("w{l}"), w);
        params.push(format!("b{l}"), b);
    }
    params
}

/// Forward pass through bound parameters. `input` must be
/// `input_dim x batch`; the result is `output_dim x batch`.
pub fn mlp_apply(
    tape: &Tape,
    arch: &MlpArch,
    bound: &BoundParams,
    input: Node,
) -> Result<Node> {
    let (rows, _) = tape.shape(input);
    if rows != arch.input_dim {
        return Err(OfrlError::ShapeMismatch {
            context: "mlp_apply",
            expected: format!("{} input rows", arch.input_dim),
            got: format!("{rows}"),
        });
    }
    let n_layers = arch.hidden.len() + 1;
    if bound.nodes.len() != 2 * n_layers {
        return Err(OfrlError::ShapeMismatch {
            context: "mlp_apply",
            expected: format!("{} bound tensors", 2 * n_layers),
            got: format!("{}", bound.nodes.len()),
        });
    }
    let mut x = input;
    for l in 0..n_layers {
        let w = bound.node(2 * l);
        let b = bound.node(2 * l + 1);
        let z = tape.matmul(w, x);
        x = tape.add(z, b);
        if l + 1 < n_layers {
            x = match arch.activation {
                Activation::Relu => tape.relu(x),
                Activation::Tanh => tape.tanh(x),
            };
        }
    }
    Ok(x)
}
