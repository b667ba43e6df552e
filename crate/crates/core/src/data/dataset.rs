use rayon::prelude::*;

use super::Manifest;
use crate::error::{Error, Result};
use crate::model::FeatureConfig;
use crate::signal::{
    align_pair, load_external_features, rate_matches, read_feature_file, read_wav, resample_pose, FeatureSequence,
    MfccExtractor, PoseSequence,
};

/// One aligned pair (`M` feature frames, `M` pose samples at the same rate).
#[derive(Clone, Debug)]
pub struct Sample {
    pub pair_id: String,
    pub features: FeatureSequence,
    pub pose: PoseSequence,
}

/// Loads every manifest entry, extracting or reading features as `features`
/// dictates, appending `extra_dim` extra channels when non-zero, and
/// resampling/truncating poses to the feature grid. Order follows the
/// manifest.
pub fn load_dataset(manifest: &Manifest, features: &FeatureConfig, extra_dim: usize) -> Result<Vec<Sample>> {
    let extractor = match features {
        FeatureConfig::Mfcc(c) => Some(MfccExtractor::new(c.clone())?),
        FeatureConfig::External { .. } => None,
    };
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let context = |err: Error| Error::Data(format!("pair `{}`: {err}", e.pair_id));
            let mut seq = match (features, &extractor) {
                (FeatureConfig::Mfcc(_), Some(x)) => {
                    let wav = e
                        .wav_path
                        .as_ref()
                        .ok_or_else(|| Error::Data(format!("pair `{}` has no wav_path", e.pair_id)))?;
                    x.extract(&read_wav(wav)?).map_err(context)?
                }
                (FeatureConfig::External { dim, frame_rate }, _) => {
                    let file = e
                        .feature_path
                        .as_ref()
                        .ok_or_else(|| Error::Data(format!("pair `{}` has no feature_path", e.pair_id)))?;
                    let seq = load_external_features(file, *dim)?;
                    if !rate_matches(seq.frame_rate(), *frame_rate) {
                        return Err(Error::Config(format!(
                            "{}: features at {} Hz, expected {frame_rate} Hz",
                            file.display(),
                            seq.frame_rate()
                        )));
                    }
                    seq
                }
                _ => unreachable!("extractor exists exactly for MFCC configs"),
            };
            if extra_dim > 0 {
                let file = e
                    .extra_feature_path
                    .as_ref()
                    .ok_or_else(|| Error::Data(format!("pair `{}` has no extra_feature_path", e.pair_id)))?;
                let (extra, _) = read_feature_file(file)?;
                if extra.cols() != extra_dim {
                    return Err(Error::Config(format!(
                        "{}: {} extra channels, expected {extra_dim}",
                        file.display(),
                        extra.cols()
                    )));
                }
                seq = seq.with_extra_channels(&extra).map_err(context)?;
            }
            let pose = PoseSequence::read_csv(&e.pose_path)?;
            let pose = resample_pose(&pose, seq.frame_rate()).map_err(context)?;
            let (features, pose) = align_pair(&seq, &pose).map_err(context)?;
            Ok(Sample {
                pair_id: e.pair_id.clone(),
                features,
                pose,
            })
        })
        .collect()
}
