use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{aggregate, make_folds, FoldMode, FoldReport, FoldRow, FoldSplit, Mae, MaeAccumulator};
use crate::data::{Manifest, Sample};
use crate::error::{Error, Result};
use crate::model::{model_forward, param_count, Architecture, FeatureConfig, ModelCheckpoint};
use crate::numerics::Matrix;
use crate::signal::PoseSequence;
use crate::training::{train, EpochRecord, TrainConfig};

/// What to fit on each fold.
#[derive(Clone, Debug, PartialEq)]
pub enum CvModel {
    Network(Architecture),
    /// Predicts the per-angle mean of the training poses at every frame.
    TrainingMean,
}

impl CvModel {
    pub fn name(&self) -> String {
        match self {
            CvModel::Network(a) => a.kind().to_string(),
            CvModel::TrainingMean => "training_mean".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub mode: FoldMode,
    pub train: TrainConfig,
    /// Folds trained concurrently.
    pub jobs: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            mode: FoldMode::SubjectIndependent,
            train: TrainConfig::default(),
            jobs: 1,
        }
    }
}

/// Everything one fold produced.
#[derive(Clone, Debug)]
pub struct FoldOutput {
    pub split: FoldSplit,
    pub checkpoint: Option<ModelCheckpoint>,
    pub history: Vec<EpochRecord>,
    /// Test-set predictions keyed by pair id.
    pub predictions: Vec<(String, PoseSequence)>,
    pub sequence_mae: Vec<Mae>,
    pub mae: Mae,
    pub test_frames: usize,
}

#[derive(Clone, Debug)]
pub struct CvOutcome {
    pub report: FoldReport,
    pub folds: Vec<FoldOutput>,
}

/// Seed for fold `k` derived from the master seed.
pub fn fold_seed(master: u64, fold: usize) -> u64 {
    master ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn training_mean(samples: &[&Sample]) -> [f32; 3] {
    let mut sums = [0.0f64; 3];
    let mut n = 0usize;
    for s in samples {
        for i in 0..s.pose.len() {
            for (c, acc) in sums.iter_mut().enumerate() {
                *acc += f64::from(s.pose.angles().get(i, c));
            }
        }
        n += s.pose.len();
    }
    sums.map(|v| (v / n.max(1) as f64) as f32)
}

fn run_fold(
    samples: &[Sample],
    split: FoldSplit,
    model: &CvModel,
    features: &FeatureConfig,
    config: &TrainConfig,
) -> Result<FoldOutput> {
    let train_set: Vec<&Sample> = split.train.iter().map(|&i| &samples[i]).collect();
    let (checkpoint, history) = match model {
        CvModel::Network(arch) => {
            let pairs: Vec<_> = train_set.iter().map(|s| (s.features.clone(), s.pose.clone())).collect();
            let cfg = TrainConfig {
                seed: fold_seed(config.seed, split.fold_id),
                ..config.clone()
            };
            let out = train(&pairs, arch, features, &cfg)?;
            log::info!(
                "fold {}: {} epochs, final loss {:.5}",
                split.fold_id,
                out.history.len(),
                out.history.last().map_or(f64::NAN, |r| r.loss)
            );
            (Some(out.checkpoint), out.history)
        }
        CvModel::TrainingMean => (None, Vec::new()),
    };
    let mean = training_mean(&train_set);

    let mut pooled = MaeAccumulator::default();
    let mut predictions = Vec::with_capacity(split.test.len());
    let mut sequence_mae = Vec::with_capacity(split.test.len());
    for &i in &split.test {
        let s = &samples[i];
        let pred = match &checkpoint {
            Some(ck) => model_forward(&s.features, ck)?,
            None => PoseSequence::new(Matrix::from_fn(s.pose.len(), 3, |_, c| mean[c]), s.pose.rate())?,
        };
        pooled.add(&pred, &s.pose)?;
        sequence_mae.push(super::mae(&pred, &s.pose)?);
        predictions.push((s.pair_id.clone(), pred));
    }
    Ok(FoldOutput {
        split,
        checkpoint,
        history,
        predictions,
        sequence_mae,
        mae: pooled.finish(),
        test_frames: pooled.frames(),
    })
}

/// Trains and evaluates `model` on every fold of `manifest`.
///
/// `samples` must be the loaded pairs in manifest order. Fold `k` trains
/// with [`fold_seed`]`(config.train.seed, k)`; per-fold MAE pools all test
/// frames, and the aggregate is the mean and population std over folds.
pub fn run_cross_validation(
    manifest: &Manifest,
    samples: &[Sample],
    model: &CvModel,
    features: &FeatureConfig,
    config: &CvConfig,
) -> Result<CvOutcome> {
    if samples.len() != manifest.len() {
        return Err(Error::Input(format!(
            "{} samples for {} manifest entries",
            samples.len(),
            manifest.len()
        )));
    }
    let splits = make_folds(manifest, config.mode, config.train.seed)?;
    let jobs = config.jobs.max(1).min(splits.len());
    let folds: Vec<FoldOutput> = if jobs == 1 {
        splits
            .into_iter()
            .map(|s| run_fold(samples, s, model, features, &config.train))
            .collect::<Result<_>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?
            .install(|| {
                splits
                    .into_par_iter()
                    .map(|s| run_fold(samples, s, model, features, &config.train))
                    .collect::<Result<Vec<_>>>()
            })?
    };

    let fold_maes: Vec<Mae> = folds.iter().map(|f| f.mae).collect();
    let (mean, std) = aggregate(&fold_maes);
    let all_sequences: Vec<Mae> = folds.iter().flat_map(|f| f.sequence_mae.iter().copied()).collect();
    let (_, sequence_std) = aggregate(&all_sequences);
    let rows = folds
        .iter()
        .map(|f| FoldRow {
            fold_id: f.split.fold_id,
            test_sessions: f.split.test_session_ids.clone(),
            train_pairs: f.split.train.len(),
            test_pairs: f.split.test.len(),
            test_frames: f.test_frames,
            mae: f.mae,
            sequence_std: aggregate(&f.sequence_mae).1,
            epochs: f.history.len(),
            final_loss: f.history.last().map(|r| r.loss),
        })
        .collect();
    let (smoothing, cosine) = match model {
        CvModel::Network(a) => (
            config.train.smoothing_enabled && !matches!(a, Architecture::LinearBaseline { .. }),
            config.train.cosine_enabled && a.cosine_enabled(),
        ),
        CvModel::TrainingMean => (false, false),
    };
    let report = FoldReport {
        model: model.name(),
        mode: config.mode,
        features: features.clone(),
        seed: config.train.seed,
        smoothing_enabled: smoothing,
        cosine_enabled: cosine,
        params: folds.first().and_then(|f| f.checkpoint.as_ref()).map_or(0, param_count),
        folds: rows,
        mean,
        std,
        sequence_std,
        std_kind: "population std of fold means".into(),
        speed: None,
    };
    Ok(CvOutcome { report, folds })
}
