//! Differentiable building blocks: dense layers, ReLU, LSTM cells and
//! time-axis convolution, each with a hand-written backward pass.
//!
//! Backward passes consume the values (or trace structs) produced by the
//! matching forward call, so a backward without a forward cannot be expressed.

mod conv;
mod dense;
mod lstm;
mod matrix;
mod params;
mod scalar;

pub use conv::{conv1d_time, conv1d_time_backward};
pub use dense::{dense_forward, relu, relu_backward, Dense};
pub use lstm::{LstmCell, LstmSequenceTrace, LstmStepTrace};
pub use matrix::Matrix;
pub use params::{accumulate, count_params, flatten, scale_all, zeros_like, Params, Visitor, VisitorMut};
pub use scalar::Real;

pub(crate) use params::{join, visit_matrix, visit_vec};
