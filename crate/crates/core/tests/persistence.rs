mod common;

use common::pseudo_random;
use headmotion::model::{
    load_checkpoint, model_forward, save_checkpoint, Architecture, FeatureConfig, ModelCheckpoint, ModelKind, Network,
    Normalizer, TrainingMeta, CHECKPOINT_VERSION,
};
use headmotion::signal::{FeatureKind, FeatureSequence, MfccConfig};
use headmotion::Error;

fn checkpoint(kind: ModelKind) -> ModelCheckpoint {
    let architecture = Architecture::default_for(kind, 28, 0);
    let mut normalizer = Normalizer::identity(28);
    normalizer.feature_mean[3] = 0.25;
    normalizer.feature_std[5] = 2.0;
    normalizer.pose_scale = 17.5;
    ModelCheckpoint {
        network: Network::build(&architecture, 5).unwrap(),
        architecture,
        features: FeatureConfig::Mfcc(MfccConfig::default()),
        normalizer,
        meta: TrainingMeta {
            epochs_run: 3,
            final_learning_rate: 1e-4,
            seed: 5,
            final_loss: Some(0.5),
        },
    }
}

fn input() -> FeatureSequence {
    FeatureSequence::new(pseudo_random(40, 28, 3, 2.0).cast(), 30.0, FeatureKind::Mfcc).unwrap()
}

#[test]
fn round_trip_is_bit_identical_for_every_kind() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [ModelKind::Proposed, ModelKind::LstmBaseline, ModelKind::LinearBaseline] {
        let ck = checkpoint(kind);
        let path = dir.path().join(format!("{kind}.ckpt"));
        save_checkpoint(&ck, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.architecture, ck.architecture);
        assert_eq!(back.normalizer, ck.normalizer);
        assert_eq!(back.meta, ck.meta);
        let a = model_forward(&input(), &ck).unwrap();
        let b = model_forward(&input(), &back).unwrap();
        assert!(a
            .angles()
            .as_slice()
            .iter()
            .zip(b.angles().as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn forward_keeps_frame_count() {
    let ck = checkpoint(ModelKind::Proposed);
    for n in [2, 3, 17, 90] {
        let x = FeatureSequence::new(pseudo_random(n, 28, n as u64, 1.0).cast(), 30.0, FeatureKind::Mfcc).unwrap();
        assert_eq!(model_forward(&x, &ck).unwrap().len(), n);
    }
}

#[test]
fn forward_is_reentrant() {
    let ck = checkpoint(ModelKind::LstmBaseline);
    let reference = model_forward(&input(), &ck).unwrap();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|_| s.spawn(|| model_forward(&input(), &ck).unwrap()))
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), reference);
        }
    });
}

#[test]
fn corrupted_magic_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&checkpoint(ModelKind::LinearBaseline), &path).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));
}

#[test]
fn other_version_is_incompatible() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&checkpoint(ModelKind::LinearBaseline), &path).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[4..8].copy_from_slice(&(CHECKPOINT_VERSION + 1).to_le_bytes());
    std::fs::write(&path, &bytes).unwrap();
    match load_checkpoint(&path) {
        Err(Error::Version { found, expected }) => assert_eq!((found, expected), (2, 1)),
        other => panic!("expected version error, got {other:?}"),
    }
}

#[test]
fn truncation_anywhere_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&checkpoint(ModelKind::LinearBaseline), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    for cut in [3, 7, 11, 40, bytes.len() / 2, bytes.len() - 1] {
        std::fs::write(&path, &bytes[..cut]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))), "cut at {cut}");
    }
}

#[test]
fn wrong_feature_width_or_rate_is_rejected() {
    let ck = checkpoint(ModelKind::Proposed);
    let narrow = FeatureSequence::new(pseudo_random(10, 27, 1, 1.0).cast(), 30.0, FeatureKind::Mfcc).unwrap();
    assert!(matches!(model_forward(&narrow, &ck), Err(Error::Config(_))));
    let fast = FeatureSequence::new(pseudo_random(10, 28, 1, 1.0).cast(), 50.0, FeatureKind::External).unwrap();
    assert!(matches!(model_forward(&fast, &ck), Err(Error::Config(_))));
}

#[test]
fn external_features_keep_their_rate() {
    let architecture = Architecture::default_for(ModelKind::Proposed, 512, 0);
    let ck = ModelCheckpoint {
        network: Network::build(&architecture, 0).unwrap(),
        architecture,
        features: FeatureConfig::External {
            dim: 512,
            frame_rate: 50.0,
        },
        normalizer: Normalizer::identity(512),
        meta: TrainingMeta::default(),
    };
    let x = FeatureSequence::new(pseudo_random(50, 512, 2, 1.0).cast(), 50.0, FeatureKind::External).unwrap();
    let pose = model_forward(&x, &ck).unwrap();
    assert_eq!((pose.len(), pose.rate()), (50, 50.0));
}
