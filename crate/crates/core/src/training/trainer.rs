use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss_and_grad, Adam, AdamConfig, PlateauScheduler};
use crate::error::{Error, Result};
use crate::model::{
    Architecture, FeatureConfig, LinearBaseline, LstmBaseline, ModelCheckpoint, Network, Normalizer, PredictionGrad,
    ProposedModel, SequenceModel, TrainingMeta,
};
use crate::numerics::{Matrix, Params};
use crate::signal::{rate_matches, FeatureSequence, PoseSequence};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub lr_factor: f64,
    pub lr_patience: usize,
    pub lr_rel_threshold: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub min_lr: f64,
    pub seed: u64,
    pub smoothing_enabled: bool,
    pub cosine_enabled: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            lr_factor: 0.5,
            lr_patience: 50,
            lr_rel_threshold: 0.01,
            batch_size: 64,
            max_epochs: 500,
            min_lr: 1e-6,
            seed: 0,
            smoothing_enabled: true,
            cosine_enabled: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("lr_factor", self.lr_factor),
            ("lr_rel_threshold", self.lr_rel_threshold),
            ("min_lr", self.min_lr),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
        if self.lr_factor >= 1.0 {
            return Err(Error::Config("lr_factor must be below 1".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.lr_patience == 0 {
            return Err(Error::Config(
                "batch_size, max_epochs and lr_patience must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the loss history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sequence training loss over the epoch.
    pub loss: f64,
    /// Rate used during the epoch.
    pub lr: f64,
}

/// Feature/target matrices already in model space.
#[derive(Clone, Debug)]
pub struct TrainingPair {
    pub features: Matrix<f32>,
    pub pose: Matrix<f32>,
}

/// Optimises `model` in place and returns the per-epoch history.
pub fn fit<M: SequenceModel<f32>>(
    model: &mut M,
    data: &[TrainingPair],
    config: &TrainConfig,
    cosine_enabled: bool,
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(AdamConfig::default());
    let mut scheduler = PlateauScheduler::new(
        config.learning_rate,
        config.lr_factor,
        config.lr_patience,
        config.lr_rel_threshold,
    );
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::new();

    for epoch in 0..config.max_epochs {
        let lr = scheduler.lr;
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0f64;
        for batch_idx in order.chunks(config.batch_size) {
            let inputs: Vec<&Matrix<f32>> = batch_idx.iter().map(|&i| &data[i].features).collect();
            let (preds, trace) = model.forward_train(&inputs)?;
            let scale = 1.0 / batch_idx.len() as f32;
            let mut grads = Vec::with_capacity(preds.len());
            for (&i, p) in batch_idx.iter().zip(&preds) {
                let (value, g) = loss_and_grad(&data[i].pose, &p.raw, &p.smoothed, cosine_enabled)?;
                if !value.is_finite() {
                    return Err(Error::Divergence(format!("loss became {value} at epoch {epoch}")));
                }
                epoch_sum += f64::from(value);
                grads.push(PredictionGrad {
                    raw: g.raw.map(|v| v * scale),
                    smoothed: g.smoothed.map(|v| v * scale),
                });
            }
            let grad = model.backward_train(&trace, &grads)?;
            adam.step(model, &grad, lr)
                .map_err(|e| Error::Divergence(format!("epoch {epoch}: {e}")))?;
            model.commit_batch(&trace);
        }
        let epoch_loss = epoch_sum / data.len() as f64;
        log::debug!("epoch {epoch}: loss {epoch_loss:.6} lr {lr:.3e}");
        history.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            lr,
        });
        if scheduler.step(epoch_loss) < config.min_lr {
            log::info!("learning rate fell below {:.1e} after epoch {epoch}", config.min_lr);
            break;
        }
    }
    Ok(history)
}

/// A trained checkpoint and the loss history that produced it.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: ModelCheckpoint,
    pub history: Vec<EpochRecord>,
}

/// Fits normalisation on `dataset`, trains a fresh network of `architecture`
/// (with the ablation switches from `config` applied) and packages the result.
pub fn train(
    dataset: &[(FeatureSequence, PoseSequence)],
    architecture: &Architecture,
    features: &FeatureConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let architecture = architecture
        .clone()
        .with_ablations(config.smoothing_enabled, config.cosine_enabled);
    for (k, (f, p)) in dataset.iter().enumerate() {
        if f.num_frames() != p.len() {
            return Err(Error::Input(format!(
                "pair {k}: {} feature frames but {} pose samples",
                f.num_frames(),
                p.len()
            )));
        }
        if f.feature_dim() != architecture.input_dim() {
            return Err(Error::Config(format!(
                "pair {k}: {} feature channels, model expects {}",
                f.feature_dim(),
                architecture.input_dim()
            )));
        }
        if !rate_matches(f.frame_rate(), features.frame_rate()) || !rate_matches(p.rate(), f.frame_rate()) {
            return Err(Error::Config(format!(
                "pair {k}: features at {} Hz, pose at {} Hz, expected {} Hz",
                f.frame_rate(),
                p.rate(),
                features.frame_rate()
            )));
        }
    }

    let normalizer = Normalizer::fit(
        dataset.iter().map(|(f, _)| f.frames()),
        dataset.iter().map(|(_, p)| p.angles()),
    )?;
    let data = dataset
        .iter()
        .map(|(f, p)| {
            Ok(TrainingPair {
                features: normalizer.normalize_features(f.frames())?,
                pose: normalizer.scale_pose(p.angles()),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let cosine = architecture.cosine_enabled();
    let (network, history) = match &architecture {
        Architecture::Proposed(c) => {
            let mut m = ProposedModel::new(c, config.seed)?;
            let h = fit(&mut m, &data, config, cosine)?;
            (Network::Proposed(m), h)
        }
        Architecture::LstmBaseline(c) => {
            let mut m = LstmBaseline::new(c, config.seed)?;
            let h = fit(&mut m, &data, config, cosine)?;
            (Network::LstmBaseline(m), h)
        }
        Architecture::LinearBaseline { input_dim } => {
            let mut m = LinearBaseline::new(*input_dim, config.seed);
            let h = fit(&mut m, &data, config, cosine)?;
            (Network::LinearBaseline(m), h)
        }
    };
    debug_assert!(network_is_finite(&network));
    let last = history.last().copied();
    Ok(TrainOutcome {
        checkpoint: ModelCheckpoint {
            architecture,
            features: features.clone(),
            normalizer,
            meta: TrainingMeta {
                epochs_run: history.len(),
                final_learning_rate: last.map_or(config.learning_rate, |r| r.lr),
                seed: config.seed,
                final_loss: last.map(|r| r.loss),
            },
            network,
        },
        history,
    })
}

fn network_is_finite(n: &Network<f32>) -> bool {
    let mut ok = true;
    n.visit("", &mut |_, _, d| ok &= d.iter().all(|v| v.is_finite()));
    ok
}

/// Writes `epoch,loss,lr` rows.
pub fn write_loss_history(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,loss,lr\n");
    for r in history {
        out.push_str(&format!("{},{:e},{:e}\n", r.epoch, r.loss, r.lr));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
