//! Head-motion generators: the graph encoder-decoder and its two baselines,
//! plus the checkpoint that bundles a trained network with everything needed
//! to run it on new speech.

mod checkpoint;
mod linear;
mod lstm_baseline;
mod mlp;
mod proposed;
mod sage;
mod sequence;
mod smoother;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use linear::LinearBaseline;
pub use lstm_baseline::{BatchNorm, LstmBaseline, LstmBaselineConfig, LstmBaselineTrace, BN_EPSILON, BN_MOMENTUM};
pub use mlp::{Mlp, MlpTrace};
pub use proposed::{ModelConfig, ProposedModel, ProposedTrace};
pub use sage::{SageLayer, SageTrace};
pub use sequence::{Prediction, PredictionGrad, SequenceModel};
pub use smoother::{gaussian_kernel, inverse_softplus, softplus, GaussianSmoother};

use crate::error::{Error, Result};
use crate::numerics::{count_params, Matrix, Params, Real, Visitor, VisitorMut};
use crate::signal::{rate_matches, FeatureKind, FeatureSequence, MfccConfig, PoseSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Proposed,
    LstmBaseline,
    LinearBaseline,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Proposed => "proposed",
            ModelKind::LstmBaseline => "lstm_baseline",
            ModelKind::LinearBaseline => "linear_baseline",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Proposed(ModelConfig),
    LstmBaseline(LstmBaselineConfig),
    LinearBaseline { input_dim: usize },
}

impl Architecture {
    pub fn kind(&self) -> ModelKind {
        match self {
            Architecture::Proposed(_) => ModelKind::Proposed,
            Architecture::LstmBaseline(_) => ModelKind::LstmBaseline,
            Architecture::LinearBaseline { .. } => ModelKind::LinearBaseline,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Architecture::Proposed(c) => c.input_dim(),
            Architecture::LstmBaseline(c) => c.input_dim(),
            Architecture::LinearBaseline { input_dim } => *input_dim,
        }
    }

    /// Whether training adds the cosine term to the loss.
    pub fn cosine_enabled(&self) -> bool {
        match self {
            Architecture::Proposed(c) => c.cosine_enabled,
            Architecture::LstmBaseline(c) => c.cosine_enabled,
            Architecture::LinearBaseline { .. } => false,
        }
    }

    /// Default configuration of `kind` for `feature_dim` speech channels plus
    /// `extra_dim` appended channels.
    pub fn default_for(kind: ModelKind, feature_dim: usize, extra_dim: usize) -> Self {
        match kind {
            ModelKind::Proposed => Architecture::Proposed(ModelConfig {
                extra_feature_dim: extra_dim,
                ..ModelConfig::new(feature_dim)
            }),
            ModelKind::LstmBaseline => Architecture::LstmBaseline(LstmBaselineConfig {
                extra_feature_dim: extra_dim,
                ..LstmBaselineConfig::new(feature_dim)
            }),
            ModelKind::LinearBaseline => Architecture::LinearBaseline {
                input_dim: feature_dim + extra_dim,
            },
        }
    }

    pub fn with_ablations(mut self, smoothing: bool, cosine: bool) -> Self {
        match &mut self {
            Architecture::Proposed(c) => {
                c.smoothing_enabled = smoothing;
                c.cosine_enabled = cosine;
            }
            Architecture::LstmBaseline(c) => {
                c.smoothing_enabled = smoothing;
                c.cosine_enabled = cosine;
            }
            Architecture::LinearBaseline { .. } => {}
        }
        self
    }
}

/// A network of any supported kind.
#[derive(Clone, Debug)]
pub enum Network<T> {
    Proposed(ProposedModel<T>),
    LstmBaseline(LstmBaseline<T>),
    LinearBaseline(LinearBaseline<T>),
}

impl<T: Real> Network<T> {
    pub fn build(arch: &Architecture, seed: u64) -> Result<Self> {
        Ok(match arch {
            Architecture::Proposed(c) => Network::Proposed(ProposedModel::new(c, seed)?),
            Architecture::LstmBaseline(c) => Network::LstmBaseline(LstmBaseline::new(c, seed)?),
            Architecture::LinearBaseline { input_dim } => {
                Network::LinearBaseline(LinearBaseline::new(*input_dim, seed))
            }
        })
    }

    pub fn predict(&self, x: &Matrix<T>) -> Result<Prediction<T>> {
        match self {
            Network::Proposed(m) => m.predict(x),
            Network::LstmBaseline(m) => m.predict(x),
            Network::LinearBaseline(m) => m.predict(x),
        }
    }
}

impl<T: Real> Params<T> for Network<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        match self {
            Network::Proposed(m) => m.visit(prefix, f),
            Network::LstmBaseline(m) => m.visit(prefix, f),
            Network::LinearBaseline(m) => m.visit(prefix, f),
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        match self {
            Network::Proposed(m) => m.visit_mut(prefix, f),
            Network::LstmBaseline(m) => m.visit_mut(prefix, f),
            Network::LinearBaseline(m) => m.visit_mut(prefix, f),
        }
    }

    fn visit_buffers(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        match self {
            Network::Proposed(m) => m.visit_buffers(prefix, f),
            Network::LstmBaseline(m) => m.visit_buffers(prefix, f),
            Network::LinearBaseline(m) => m.visit_buffers(prefix, f),
        }
    }

    fn visit_buffers_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        match self {
            Network::Proposed(m) => m.visit_buffers_mut(prefix, f),
            Network::LstmBaseline(m) => m.visit_buffers_mut(prefix, f),
            Network::LinearBaseline(m) => m.visit_buffers_mut(prefix, f),
        }
    }
}

/// How the speech features a checkpoint expects are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureConfig {
    Mfcc(MfccConfig),
    External { dim: usize, frame_rate: f64 },
}

impl FeatureConfig {
    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureConfig::Mfcc(_) => FeatureKind::Mfcc,
            FeatureConfig::External { .. } => FeatureKind::External,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureConfig::Mfcc(c) => c.n_coeffs,
            FeatureConfig::External { dim, .. } => *dim,
        }
    }

    pub fn frame_rate(&self) -> f64 {
        match self {
            FeatureConfig::Mfcc(c) => c.frame_rate,
            FeatureConfig::External { frame_rate, .. } => *frame_rate,
        }
    }
}

/// Input standardisation and output scaling fitted on training data.
///
/// Targets are divided by one global `pose_scale`, which keeps per-frame
/// cosine similarities unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub feature_mean: Vec<f32>,
    pub feature_std: Vec<f32>,
    pub pose_scale: f32,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            feature_mean: vec![0.0; dim],
            feature_std: vec![1.0; dim],
            pose_scale: 1.0,
        }
    }

    /// Per-channel mean/std over all training frames; pose scale is the
    /// largest absolute training angle (at least 1°).
    pub fn fit<'a>(
        features: impl IntoIterator<Item = &'a Matrix<f32>>,
        poses: impl IntoIterator<Item = &'a Matrix<f32>>,
    ) -> Result<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for f in features {
            if sum.is_empty() {
                sum = vec![0.0; f.cols()];
                sq = vec![0.0; f.cols()];
            }
            if f.cols() != sum.len() {
                return Err(Error::dims(
                    "Normalizer::fit",
                    format!("{} channels", sum.len()),
                    f.shape_str(),
                ));
            }
            for r in 0..f.rows() {
                for (j, &v) in f.row(r).iter().enumerate() {
                    sum[j] += f64::from(v);
                    sq[j] += f64::from(v) * f64::from(v);
                }
            }
            n += f.rows();
        }
        if n == 0 {
            return Err(Error::Config("cannot fit normalisation on an empty dataset".into()));
        }
        let nf = n as f64;
        let feature_mean: Vec<f32> = sum.iter().map(|s| (s / nf) as f32).collect();
        let feature_std = sum
            .iter()
            .zip(&sq)
            .map(|(s, q)| {
                let var = (q / nf - (s / nf).powi(2)).max(0.0);
                let sd = var.sqrt();
                if sd > 1e-6 {
                    sd as f32
                } else {
                    1.0
                }
            })
            .collect();
        let pose_scale = poses
            .into_iter()
            .flat_map(|p| p.as_slice().iter().map(|v| v.abs()))
            .fold(1.0f32, f32::max);
        Ok(Self {
            feature_mean,
            feature_std,
            pose_scale,
        })
    }

    pub fn normalize_features(&self, x: &Matrix<f32>) -> Result<Matrix<f32>> {
        if x.cols() != self.feature_mean.len() {
            return Err(Error::Config(format!(
                "features have {} channels, model expects {}",
                x.cols(),
                self.feature_mean.len()
            )));
        }
        Ok(Matrix::from_fn(x.rows(), x.cols(), |r, j| {
            (x.get(r, j) - self.feature_mean[j]) / self.feature_std[j]
        }))
    }

    pub fn scale_pose(&self, p: &Matrix<f32>) -> Matrix<f32> {
        p.map(|v| v / self.pose_scale)
    }

    pub fn unscale_pose(&self, p: &Matrix<f32>) -> Matrix<f32> {
        p.map(|v| v * self.pose_scale)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub final_learning_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub final_loss: Option<f64>,
}

/// A trained network together with its feature front end, normalisation and
/// provenance.
#[derive(Clone, Debug)]
pub struct ModelCheckpoint {
    pub architecture: Architecture,
    pub features: FeatureConfig,
    pub normalizer: Normalizer,
    pub meta: TrainingMeta,
    pub network: Network<f32>,
}

impl ModelCheckpoint {
    pub fn kind(&self) -> ModelKind {
        self.architecture.kind()
    }

    /// Expected input channels (speech features plus extra channels).
    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim()
    }
}

/// Total learnable scalars, including the smoother widths.
pub fn param_count(checkpoint: &ModelCheckpoint) -> usize {
    count_params(&checkpoint.network)
}

/// Generates the listener pose for a speech feature sequence; the output has
/// one sample per input frame at the input frame rate.
pub fn model_forward(features: &FeatureSequence, checkpoint: &ModelCheckpoint) -> Result<PoseSequence> {
    if features.feature_dim() != checkpoint.input_dim() {
        return Err(Error::Config(format!(
            "features have {} channels, checkpoint expects {}",
            features.feature_dim(),
            checkpoint.input_dim()
        )));
    }
    if !rate_matches(features.frame_rate(), checkpoint.features.frame_rate()) {
        return Err(Error::Config(format!(
            "features are at {} Hz, checkpoint was trained at {} Hz",
            features.frame_rate(),
            checkpoint.features.frame_rate()
        )));
    }
    let x = checkpoint.normalizer.normalize_features(features.frames())?;
    let pred = checkpoint.network.predict(&x)?;
    PoseSequence::new(
        checkpoint.normalizer.unscale_pose(&pred.smoothed),
        features.frame_rate(),
    )
}
