//! Per-frame affine regression from features to the three angles
//! (`m` weights plus one bias per angle), with no temporal context.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Prediction, PredictionGrad, SequenceModel};
use crate::error::{Error, Result};
use crate::numerics::{join, Dense, Matrix, Params, Real, Visitor, VisitorMut};

#[derive(Clone, Debug)]
pub struct LinearBaseline<T> {
    pub affine: Dense<T>,
}

impl<T: Real> LinearBaseline<T> {
    pub fn new(input_dim: usize, seed: u64) -> Self {
        Self {
            affine: Dense::init(input_dim, 3, &mut ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn from_parts(weight: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        if weight.cols() != 3 {
            return Err(Error::dims("LinearBaseline", weight.shape_str(), "mx3"));
        }
        Ok(Self {
            affine: Dense::from_parts(weight, bias)?,
        })
    }

    fn forward(&self, x: &Matrix<T>) -> Result<Prediction<T>> {
        let raw = self.affine.forward(x)?;
        Ok(Prediction {
            smoothed: raw.clone(),
            raw,
        })
    }
}

impl<T: Real> SequenceModel<T> for LinearBaseline<T> {
    type Trace = Vec<Matrix<T>>;

    fn input_dim(&self) -> usize {
        self.affine.fan_in()
    }

    fn predict(&self, x: &Matrix<T>) -> Result<Prediction<T>> {
        self.forward(x)
    }

    fn forward_train(&self, batch: &[&Matrix<T>]) -> Result<(Vec<Prediction<T>>, Self::Trace)> {
        let preds = batch.iter().map(|x| self.forward(x)).collect::<Result<_>>()?;
        Ok((preds, batch.iter().map(|&x| x.clone()).collect()))
    }

    fn backward_train(&self, trace: &Self::Trace, grads: &[PredictionGrad<T>]) -> Result<Self> {
        let mut out = crate::numerics::zeros_like(self);
        for (x, g) in trace.iter().zip(grads) {
            let mut up = g.raw.clone();
            up.add_assign(&g.smoothed)?;
            self.affine.backward(x, &up, &mut out.affine)?;
        }
        Ok(out)
    }
}

impl<T: Real> Params<T> for LinearBaseline<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        self.affine.visit(&join(prefix, "linear"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        self.affine.visit_mut(&join(prefix, "linear"), f);
    }
}
