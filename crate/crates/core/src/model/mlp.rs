use rand::Rng;

use crate::error::Result;
use crate::numerics::{join, relu, relu_backward, Dense, Matrix, Params, Real, Visitor, VisitorMut};

/// Position-wise dense stack with ReLU between layers (none after the last).
#[derive(Clone, Debug)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
}

#[derive(Clone, Debug)]
pub struct MlpTrace<T> {
    inputs: Vec<Matrix<T>>,
    pre_activations: Vec<Matrix<T>>,
}

impl<T: Real> Mlp<T> {
    pub fn init(input_dim: usize, widths: &[usize], rng: &mut impl Rng) -> Self {
        let mut layers = Vec::with_capacity(widths.len());
        let mut d = input_dim;
        for &w in widths {
            layers.push(Dense::init(d, w, rng));
            d = w;
        }
        Self { layers }
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers.last().map(Dense::fan_out)
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<(Matrix<T>, MlpTrace<T>)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h)?;
            inputs.push(h);
            h = if i < last {
                let a = relu(&z);
                pre_activations.push(z);
                a
            } else {
                z
            };
        }
        Ok((
            h,
            MlpTrace {
                inputs,
                pre_activations,
            },
        ))
    }

    pub fn backward(&self, trace: &MlpTrace<T>, upstream: &Matrix<T>, grads: &mut Self) -> Result<Matrix<T>> {
        let mut g = upstream.clone();
        let last = self.layers.len().saturating_sub(1);
        for i in (0..self.layers.len()).rev() {
            if i < last {
                g = relu_backward(&trace.pre_activations[i], &g);
            }
            g = self.layers[i].backward(&trace.inputs[i], &g, &mut grads.layers[i])?;
        }
        Ok(g)
    }
}

impl<T: Real> Params<T> for Mlp<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&join(prefix, &format!("dense{i}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_mut(&join(prefix, &format!("dense{i}")), f);
        }
    }
}
