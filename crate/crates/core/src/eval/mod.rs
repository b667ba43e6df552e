//! Error metrics, cross-validation folds and runs, and the speed benchmark.

mod bench;
mod cv;
mod folds;
mod metrics;
mod report;

pub use bench::{benchmark_speed, BenchResult, Environment, LATENCY_WINDOW_S, MAX_LATENCY_MS, TARGET_FPS};
pub use cv::{fold_seed, run_cross_validation, CvConfig, CvModel, CvOutcome, FoldOutput};
pub use folds::{make_folds, FoldMode, FoldSplit, DEPENDENT_FOLDS};
pub use metrics::{aggregate, mae, mean_std, Mae, MaeAccumulator};
pub use report::{FoldReport, FoldRow};
