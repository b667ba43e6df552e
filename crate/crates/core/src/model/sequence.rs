use crate::error::Result;
use crate::numerics::{Matrix, Params, Real};

/// Per-frame pose estimate before and after temporal smoothing.
///
/// Models without a smoother return the same matrix in both fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<T> {
    pub raw: Matrix<T>,
    pub smoothed: Matrix<T>,
}

/// Loss gradients with respect to both halves of a [`Prediction`].
#[derive(Clone, Debug)]
pub struct PredictionGrad<T> {
    pub raw: Matrix<T>,
    pub smoothed: Matrix<T>,
}

/// A trainable map from an `M×m` feature matrix to an `M×3` pose matrix.
///
/// Training goes through whole batches so that models with batch statistics
/// can couple sequences; per-sequence models treat each item independently.
pub trait SequenceModel<T: Real>: Params<T> + Clone + Send + Sync {
    type Trace: Send + Sync;

    fn input_dim(&self) -> usize;

    /// Inference-mode forward pass.
    fn predict(&self, x: &Matrix<T>) -> Result<Prediction<T>>;

    /// Training-mode forward pass over a batch.
    fn forward_train(&self, batch: &[&Matrix<T>]) -> Result<(Vec<Prediction<T>>, Self::Trace)>;

    /// Parameter gradients summed over the batch, in the model's own layout.
    fn backward_train(&self, trace: &Self::Trace, grads: &[PredictionGrad<T>]) -> Result<Self>;

    /// Folds batch statistics from a training step into running state.
    fn commit_batch(&mut self, _trace: &Self::Trace) {}
}
