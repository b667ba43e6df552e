//! Loss, optimizer, learning-rate schedule and the training loop.

mod adam;
mod loss;
mod scheduler;
mod trainer;

pub use adam::{Adam, AdamConfig};
pub use loss::{cosine_similarity, loss, loss_and_grad, loss_parts, LossParts, COSINE_EPS};
pub use scheduler::PlateauScheduler;
pub use trainer::{fit, train, write_loss_history, EpochRecord, TrainConfig, TrainOutcome, TrainingPair};
