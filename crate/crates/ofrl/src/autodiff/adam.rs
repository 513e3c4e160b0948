use ndarray::Array2;

use super::params::ParameterSet;
use crate::error::{OfrlError, Result};

/// Adam optimizer state for one `ParameterSet`.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(params: &ParameterSet, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params
                .entries()
                .iter()
                .map(|e| Array2::zeros(e.value.dim()))
                .collect(),
            v: params
                .entries()
                .iter()
                .map(|e| Array2::zeros(e.value.dim()))
                .collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One Adam update. `grads` must match the parameter set entry-for-entry.
    /// Non-finite gradients are a training-divergence signal and abort.
    pub fn step(&mut self, params: &mut ParameterSet, grads: &[Array2<f64>]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(OfrlError::ShapeMismatch {
                context: "adam_step",
                expected: format!("{} gradient tensors", params.len()),
                got: format!("{}", grads.len()),
            });
        }
        for (i, g) in grads.iter().enumerate() {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(OfrlError::Diverged {
                    step: self.t,
                    what: format!("non-finite gradient for '{}'", params.entry(i).name),
                });
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = &grads[i];
            self.m[i].zip_mut_with(g, |m, &gv| *m = self.beta1 * *m + (1.0 - self.beta1) * gv);
            self.v[i]
                .zip_mut_with(g, |v, &gv| *v = self.beta2 * *v + (1.0 - self.beta2) * gv * gv);
            let m = &self.m[i];
            let v = &self.v[i];
            let p = params.value_mut(i);
            ndarray::Zip::from(p)
                .and(m)
                .and(v)
                .for_each(|p, &m, &v| {
                    let mhat = m / bc1;
                    let vhat = v / bc2;
                    *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
                });
        }
        Ok(())
    }
}
