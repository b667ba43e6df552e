use std::collections::BTreeSet;
use std::path::Path;

use headmotion::data::{
    generate_synthetic, load_dataset, load_manifest, write_manifest, Coupling, Manifest, ManifestEntry, SynthConfig,
};
use headmotion::eval::{
    aggregate, benchmark_speed, make_folds, mean_std, run_cross_validation, CvConfig, CvModel, FoldMode, Mae,
};
use headmotion::model::{Architecture, FeatureConfig, ModelKind};
use headmotion::signal::{read_wav, MfccConfig, MfccExtractor, PoseSequence};
use headmotion::training::TrainConfig;
use headmotion::Error;

fn small_synth(dir: &Path, pairs: usize, coupling: Coupling, noise: f64) -> Manifest {
    let config = SynthConfig {
        num_pairs: pairs,
        min_duration_s: 1.5,
        max_duration_s: 2.5,
        noise_deg: noise,
        coupling,
        seed: 3,
        ..SynthConfig::default()
    };
    generate_synthetic(&config, dir).unwrap()
}

fn entry(id: &str, session: &str, listener: &str, speaker: &str) -> ManifestEntry {
    ManifestEntry {
        pair_id: id.into(),
        session_id: session.into(),
        listener_subject_id: listener.into(),
        speaker_subject_id: speaker.into(),
        wav_path: Some("a.wav".into()),
        feature_path: None,
        pose_path: "a.csv".into(),
        extra_feature_path: None,
    }
}

fn touch_files(dir: &Path) {
    std::fs::write(dir.join("a.wav"), b"").unwrap();
    std::fs::write(dir.join("a.csv"), b"").unwrap();
}

#[test]
fn manifest_loads_and_filters_self_pairs() {
    let dir = tempfile::tempdir().unwrap();
    touch_files(dir.path());
    let path = dir.path().join("m.json");
    write_manifest(
        &path,
        &[
            entry("p1", "s1", "A", "B"),
            entry("p2", "s1", "B", "A"),
            entry("p3", "s2", "C", "D"),
        ],
    )
    .unwrap();
    let m = load_manifest(&path).unwrap();
    assert_eq!((m.len(), m.excluded_self_pairs), (3, 0));
    assert!(m.entries[0].pose_path.is_absolute() || m.entries[0].pose_path.starts_with(dir.path()));

    write_manifest(&path, &[entry("p1", "s1", "A", "B"), entry("p2", "s1", "A", "A")]).unwrap();
    let m = load_manifest(&path).unwrap();
    assert_eq!((m.len(), m.excluded_self_pairs), (1, 1));
}

#[test]
fn manifest_errors_are_specific() {
    let dir = tempfile::tempdir().unwrap();
    touch_files(dir.path());
    let path = dir.path().join("m.json");

    std::fs::write(&path, "[\n  {\"pair_id\": \"p1\",\n  oops\n]").unwrap();
    let err = load_manifest(&path).unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");

    let mut missing = entry("p1", "s1", "A", "B");
    missing.pose_path = "nope.csv".into();
    write_manifest(&path, &[missing]).unwrap();
    let err = load_manifest(&path).unwrap_err().to_string();
    assert!(err.contains("nope.csv"), "{err}");

    write_manifest(&path, &[entry("p1", "s1", "A", "B"), entry("p1", "s2", "C", "D")]).unwrap();
    assert!(matches!(load_manifest(&path), Err(Error::Data(m)) if m.contains("duplicate")));
}

#[test]
fn synthetic_corpus_is_reproducible_and_well_formed() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = small_synth(a.path(), 10, Coupling::EnergyNonlinear, 1.0);
    small_synth(b.path(), 10, Coupling::EnergyNonlinear, 1.0);
    for e in &ma.entries {
        let rel = e.wav_path.as_ref().unwrap().strip_prefix(a.path()).unwrap();
        assert_eq!(
            std::fs::read(a.path().join(rel)).unwrap(),
            std::fs::read(b.path().join(rel)).unwrap()
        );
        let rel = e.pose_path.strip_prefix(a.path()).unwrap();
        assert_eq!(
            std::fs::read(a.path().join(rel)).unwrap(),
            std::fs::read(b.path().join(rel)).unwrap()
        );
    }
    assert_eq!(load_manifest(a.path().join("manifest.json")).unwrap(), ma);

    let extractor = MfccExtractor::new(MfccConfig::default()).unwrap();
    for e in &ma.entries {
        assert_ne!(e.listener_subject_id, e.speaker_subject_id);
        let frames = extractor
            .extract(&read_wav(e.wav_path.as_ref().unwrap()).unwrap())
            .unwrap()
            .num_frames();
        let pose = PoseSequence::read_csv(&e.pose_path).unwrap();
        assert!(pose.angles().as_slice().iter().all(|v| v.abs() <= 45.0));
        let resampled = headmotion::signal::resample_pose(&pose, 30.0).unwrap();
        assert!(frames.abs_diff(resampled.len()) <= 1, "{frames} vs {}", resampled.len());
    }

    let mut owner = std::collections::HashMap::new();
    for e in &ma.entries {
        for s in [&e.listener_subject_id, &e.speaker_subject_id] {
            assert_eq!(owner.entry(s.clone()).or_insert(e.session_id.clone()), &e.session_id);
        }
    }
}

#[test]
fn folds_partition_sessions_without_shared_subjects() {
    let dir = tempfile::tempdir().unwrap();
    let m = small_synth(dir.path(), 20, Coupling::EnergyAffine, 0.5);
    let folds = make_folds(&m, FoldMode::SubjectIndependent, 0).unwrap();
    assert_eq!(folds.len(), 5);
    let mut seen: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
    seen.sort();
    assert_eq!(seen, (0..20).collect::<Vec<_>>());
    for f in &folds {
        let train: BTreeSet<_> = f.train_subject_ids.iter().collect();
        assert!(f.test_subject_ids.iter().all(|s| !train.contains(s)));
        assert_eq!(f.test_session_ids.len(), 1);
    }

    let dep = make_folds(&m, FoldMode::SubjectDependent, 0).unwrap();
    assert!(dep.len() >= 2);
    for f in &dep {
        let train: BTreeSet<_> = f.train.iter().map(|&i| &m.entries[i].listener_subject_id).collect();
        assert!(f
            .test
            .iter()
            .all(|&i| train.contains(&m.entries[i].listener_subject_id)));
    }
}

#[test]
fn fold_errors() {
    let one = Manifest::from_entries(vec![entry("a", "s1", "A", "B"), entry("b", "s1", "B", "A")]).unwrap();
    assert!(matches!(
        make_folds(&one, FoldMode::SubjectIndependent, 0),
        Err(Error::Config(_))
    ));

    let spanning = Manifest::from_entries(vec![
        entry("a", "s1", "A", "B"),
        entry("b", "s2", "A", "C"),
        entry("c", "s3", "D", "E"),
    ])
    .unwrap();
    match make_folds(&spanning, FoldMode::SubjectIndependent, 0) {
        Err(Error::Data(msg)) => assert!(msg.contains('A'), "{msg}"),
        other => panic!("expected data error, got {other:?}"),
    }
}

#[test]
fn aggregate_uses_population_std() {
    let folds: Vec<Mae> = [1.0, 2.0, 3.0, 4.0, 5.0]
        .iter()
        .map(|&v| Mae::from_angles([v, 2.0 * v, 0.0]))
        .collect();
    let (mean, std) = aggregate(&folds);
    assert_eq!((mean.roll, mean.pitch), (3.0, 6.0));
    assert!((std.roll - 2f64.sqrt()).abs() < 1e-12);
    assert!((std.pitch - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
}

#[test]
fn affine_noise_free_corpus_is_linearly_solvable() {
    let dir = tempfile::tempdir().unwrap();
    let config = SynthConfig {
        num_pairs: 20,
        num_sessions: 2,
        subjects_per_session: 2,
        min_duration_s: 2.0,
        max_duration_s: 3.0,
        noise_deg: 0.0,
        subject_offset_deg: 0.0,
        coupling: Coupling::EnergyAffine,
        seed: 1,
        ..SynthConfig::default()
    };
    let m = generate_synthetic(&config, dir.path()).unwrap();
    let features = FeatureConfig::Mfcc(MfccConfig::default());
    let samples = load_dataset(&m, &features, 0).unwrap();
    let cv = CvConfig {
        mode: FoldMode::SubjectDependent,
        train: TrainConfig {
            learning_rate: 1e-2,
            batch_size: 4,
            max_epochs: 300,
            ..TrainConfig::default()
        },
        jobs: 1,
    };
    let arch = Architecture::default_for(ModelKind::LinearBaseline, 28, 0);
    let report = run_cross_validation(&m, &samples, &CvModel::Network(arch), &features, &cv)
        .unwrap()
        .report;
    let mean = run_cross_validation(&m, &samples, &CvModel::TrainingMean, &features, &cv)
        .unwrap()
        .report;
    // Angles span roughly ±10°; the affine fit should be well under a degree.
    assert!(report.mean.all < 0.6, "{}", report.to_table());
    assert!(
        report.mean.all < 0.2 * mean.mean.all,
        "{} vs {}",
        report.mean.all,
        mean.mean.all
    );
}

#[test]
fn cross_validation_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    let m = small_synth(dir.path(), 10, Coupling::EnergyNonlinear, 1.0);
    let features = FeatureConfig::Mfcc(MfccConfig::default());
    let samples = load_dataset(&m, &features, 0).unwrap();
    let cv = CvConfig {
        train: TrainConfig {
            max_epochs: 2,
            batch_size: 4,
            ..TrainConfig::default()
        },
        jobs: 2,
        ..CvConfig::default()
    };
    let arch = Architecture::default_for(ModelKind::LinearBaseline, 28, 0);
    let out = run_cross_validation(&m, &samples, &CvModel::Network(arch), &features, &cv).unwrap();
    let r = &out.report;
    assert_eq!(r.folds.len(), 5);
    let fold_mean = r.folds.iter().map(|f| f.mae.all).sum::<f64>() / 5.0;
    assert!((r.mean.all - fold_mean).abs() < 1e-12);
    let table = r.to_table();
    assert_eq!(table.lines().filter(|l| l.starts_with("mean")).count(), 1);
    assert_eq!(table.lines().count(), 2 + 5 + 1);

    let json = dir.path().join("report.json");
    r.write_json(&json).unwrap();
    assert_eq!(&headmotion::eval::FoldReport::read_json(&json).unwrap(), r);

    let speed = benchmark_speed(
        out.folds[0].checkpoint.as_ref().unwrap(),
        &read_wav(m.entries[0].wav_path.as_ref().unwrap()).unwrap(),
        3,
        1,
    )
    .unwrap();
    assert!(speed.fps > 0.0);
    assert!(benchmark_speed(
        out.folds[0].checkpoint.as_ref().unwrap(),
        &read_wav(m.entries[0].wav_path.as_ref().unwrap()).unwrap(),
        2,
        1
    )
    .is_err());
}
