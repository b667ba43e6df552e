use rand::Rng;

use super::params::{join, visit_matrix, visit_vec, Params};
use super::{Matrix, Real, Visitor, VisitorMut};
use crate::error::{Error, Result};

/// Fully connected layer applied row-wise: `y = x·W + b`.
#[derive(Clone, Debug)]
pub struct Dense<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    /// Uniform `[-1/√fan_in, 1/√fan_in]` weights, zero bias.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        Self {
            weight: Matrix::from_fn(fan_in, fan_out, |_, _| T::lit(rng.random_range(-bound..=bound))),
            bias: vec![T::zero(); fan_out],
        }
    }

    pub fn from_parts(weight: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::dims(
                "Dense::from_parts",
                format!("weight {}", weight.shape_str()),
                format!("bias {}", bias.len()),
            ));
        }
        Ok(Self { weight, bias })
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        dense_forward(x, &self.weight, &self.bias)
    }

    /// Accumulates parameter gradients into `grads` and returns `∂L/∂x`.
    pub fn backward(&self, x: &Matrix<T>, upstream: &Matrix<T>, grads: &mut Self) -> Result<Matrix<T>> {
        x.accumulate_tn(upstream, &mut grads.weight)?;
        upstream.accumulate_col_sums(&mut grads.bias);
        upstream.matmul_nt(&self.weight)
    }
}

pub fn dense_forward<T: Real>(x: &Matrix<T>, weight: &Matrix<T>, bias: &[T]) -> Result<Matrix<T>> {
    if x.cols() != weight.rows() {
        return Err(Error::dims(
            "dense_forward",
            format!("input {}", x.shape_str()),
            format!("weight {}", weight.shape_str()),
        ));
    }
    let mut out = x.matmul(weight)?;
    out.add_row_vector(bias)?;
    Ok(out)
}

impl<T: Real> Params<T> for Dense<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        visit_matrix(&self.weight, join(prefix, "weight"), f);
        visit_vec(&self.bias, join(prefix, "bias"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        f(&join(prefix, "weight"), self.weight.as_mut_slice());
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

pub fn relu<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of [`relu`] given its input; zero at and below the kink.
pub fn relu_backward<T: Real>(x: &Matrix<T>, upstream: &Matrix<T>) -> Matrix<T> {
    let mut out = upstream.clone();
    for (g, &v) in out.as_mut_slice().iter_mut().zip(x.as_slice()) {
        if v <= T::zero() {
            *g = T::zero();
        }
    }
    out
}
