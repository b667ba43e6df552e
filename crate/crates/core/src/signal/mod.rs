//! Audio ingestion, MFCC extraction, precomputed feature loading and
//! head-pose resampling/alignment.

mod features;
mod mfcc;
mod pose;
mod wav;

pub use features::{
    load_external_features, read_feature_file, write_feature_file, FeatureKind, FeatureSequence, EGEMAPS_DIM,
    SUPPORTED_FRAME_RATES, WAV2VEC2_DIM,
};
pub use mfcc::{extract_mfcc, hz_to_mel, mel_to_hz, MfccConfig, MfccExtractor};
pub use pose::{align_pair, resample_pose, PoseSequence, ANGLE_NAMES};
pub use wav::{read_wav, write_wav, AudioClip};

pub(crate) use features::rate_matches;
