mod common;

use common::{least_squares, pseudo_random};
use headmotion::eval::mae;
use headmotion::model::{model_forward, Architecture, FeatureConfig, ModelConfig, ModelKind};
use headmotion::numerics::Matrix;
use headmotion::signal::{FeatureKind, FeatureSequence, PoseSequence};
use headmotion::training::{train, TrainConfig};
use headmotion::Error;

const EXTERNAL: FeatureConfig = FeatureConfig::External {
    dim: 5,
    frame_rate: 30.0,
};

fn affine_pairs(count: usize, frames: usize, smooth: bool) -> (Vec<(FeatureSequence, PoseSequence)>, Matrix<f64>) {
    let a = pseudo_random(5, 3, 99, 4.0);
    let b = [2.0, -3.0, 1.0];
    let pairs = (0..count)
        .map(|k| {
            let mut x = pseudo_random(frames, 5, 100 + k as u64, 1.0);
            if smooth {
                x = Matrix::from_fn(frames, 5, |i, j| {
                    let t = i as f64 / 30.0;
                    ((1.0 + j as f64) * t + k as f64).sin() + 0.2 * x.get(i, j)
                });
            }
            let y = Matrix::from_fn(frames, 3, |i, c| {
                (0..5).map(|j| x.get(i, j) * a.get(j, c)).sum::<f64>() + b[c]
            });
            (
                FeatureSequence::new(x.cast(), 30.0, FeatureKind::External).unwrap(),
                PoseSequence::new(y.cast(), 30.0).unwrap(),
            )
        })
        .collect();
    (pairs, a)
}

#[test]
fn linear_baseline_recovers_exact_affine_map() {
    let (pairs, _) = affine_pairs(12, 40, false);
    let config = TrainConfig {
        learning_rate: 1e-2,
        batch_size: 3,
        max_epochs: 1500,
        lr_patience: 20,
        ..TrainConfig::default()
    };
    let out = train(
        &pairs,
        &Architecture::LinearBaseline { input_dim: 5 },
        &EXTERNAL,
        &config,
    )
    .unwrap();

    // Closed-form least squares on the same training frames is the oracle.
    let xs: Vec<Matrix<f64>> = pairs.iter().map(|(x, _)| x.frames().cast()).collect();
    let stacked = Matrix::vcat(&xs.iter().collect::<Vec<_>>()).unwrap();
    let fits: Vec<(Vec<f64>, f64)> = (0..3)
        .map(|c| {
            let y: Vec<f64> = pairs
                .iter()
                .flat_map(|(_, p)| p.angles().column(c).into_iter().map(f64::from))
                .collect();
            least_squares(&stacked, &y)
        })
        .collect();

    let (test, _) = affine_pairs(15, 40, false);
    for (x, y) in &test[12..] {
        let oracle = Matrix::from_fn(x.num_frames(), 3, |i, c| {
            let (w, b) = &fits[c];
            (w.iter()
                .zip(x.frames().row(i))
                .map(|(w, &v)| w * f64::from(v))
                .sum::<f64>()
                + b) as f32
        });
        let oracle = PoseSequence::new(oracle, 30.0).unwrap();
        assert!(mae(&oracle, y).unwrap().all < 1e-3);
        let pred = model_forward(x, &out.checkpoint).unwrap();
        let m = mae(&pred, y).unwrap();
        assert!(m.all < 0.1, "held-out MAE {m:?}");
        assert!(mae(&pred, &oracle).unwrap().all < 0.1);
    }
}

#[test]
fn seeded_runs_match_bit_for_bit() {
    let (pairs, _) = affine_pairs(4, 20, true);
    let arch = Architecture::Proposed(ModelConfig {
        encoder_graph_dims: vec![8, 8],
        encoder_dense_dims: vec![8],
        decoder_dense_dims: vec![8],
        decoder_graph_dims: vec![8, 3],
        ..ModelConfig::new(5)
    });
    let config = TrainConfig {
        max_epochs: 5,
        batch_size: 2,
        learning_rate: 1e-3,
        seed: 11,
        ..TrainConfig::default()
    };
    let a = train(&pairs, &arch, &EXTERNAL, &config).unwrap().history;
    let b = train(&pairs, &arch, &EXTERNAL, &config).unwrap().history;
    assert_eq!(a.len(), 5);
    assert!(a.iter().zip(&b).all(|(x, y)| x.loss.to_bits() == y.loss.to_bits()));
    let c = train(&pairs, &arch, &EXTERNAL, &TrainConfig { seed: 12, ..config })
        .unwrap()
        .history;
    assert_ne!(a, c);
}

#[test]
fn learnable_data_loss_falls_below_five_percent() {
    let (pairs, _) = affine_pairs(16, 30, true);
    let arch = Architecture::Proposed(ModelConfig {
        encoder_graph_dims: vec![32, 32],
        encoder_dense_dims: vec![32, 32],
        decoder_dense_dims: vec![32, 32],
        decoder_graph_dims: vec![32, 3],
        ..ModelConfig::new(5)
    });
    let config = TrainConfig {
        max_epochs: 200,
        batch_size: 4,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let h = train(&pairs, &arch, &EXTERNAL, &config).unwrap().history;
    let (first, last) = (h[0].loss, h.last().unwrap().loss);
    assert!(last < 0.05 * first, "loss {first} -> {last}");
    // Coarse monotonicity: every 10-epoch window ends below where the previous one started.
    let windows: Vec<f64> = h
        .chunks(10)
        .map(|w| w.iter().map(|r| r.loss).sum::<f64>() / w.len() as f64)
        .collect();
    assert!(windows.windows(2).filter(|w| w[1] > w[0]).count() <= 2, "{windows:?}");
}

#[test]
fn single_pair_fills_its_own_batch() {
    let (pairs, _) = affine_pairs(1, 20, true);
    let config = TrainConfig {
        max_epochs: 2,
        ..TrainConfig::default()
    };
    let arch = Architecture::default_for(ModelKind::LinearBaseline, 5, 0);
    let out = train(&pairs, &arch, &EXTERNAL, &config).unwrap();
    assert_eq!(out.history.len(), 2);
}

#[test]
fn empty_dataset_is_a_config_error() {
    let arch = Architecture::default_for(ModelKind::Proposed, 5, 0);
    assert!(matches!(
        train(&[], &arch, &EXTERNAL, &TrainConfig::default()),
        Err(Error::Config(_))
    ));
}

#[test]
fn misaligned_pair_is_rejected() {
    let (mut pairs, _) = affine_pairs(2, 20, true);
    pairs[1].1 = pairs[1].1.truncated(10).unwrap();
    let arch = Architecture::default_for(ModelKind::LinearBaseline, 5, 0);
    assert!(matches!(
        train(&pairs, &arch, &EXTERNAL, &TrainConfig::default()),
        Err(Error::Input(_))
    ));
}

#[test]
fn min_lr_stops_training() {
    let (pairs, _) = affine_pairs(2, 20, true);
    let config = TrainConfig {
        learning_rate: 4e-6,
        lr_patience: 1,
        lr_rel_threshold: 0.999,
        max_epochs: 100,
        ..TrainConfig::default()
    };
    let arch = Architecture::default_for(ModelKind::LinearBaseline, 5, 0);
    let h = train(&pairs, &arch, &EXTERNAL, &config).unwrap().history;
    // 4e-6 → 2e-6 → 1e-6 → 5e-7: stop after the third reduction.
    assert_eq!(h.len(), 4, "{h:?}");
    assert_eq!(h.last().unwrap().lr, 1e-6);
}

#[test]
fn ablations_change_parameters_and_history() {
    let (pairs, _) = affine_pairs(4, 20, true);
    let arch = Architecture::Proposed(ModelConfig {
        encoder_graph_dims: vec![8, 8],
        encoder_dense_dims: vec![8],
        decoder_dense_dims: vec![8],
        decoder_graph_dims: vec![8, 3],
        ..ModelConfig::new(5)
    });
    let base = TrainConfig {
        max_epochs: 3,
        batch_size: 2,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let full = train(&pairs, &arch, &EXTERNAL, &base).unwrap();
    let no_cos = train(
        &pairs,
        &arch,
        &EXTERNAL,
        &TrainConfig {
            cosine_enabled: false,
            ..base.clone()
        },
    )
    .unwrap();
    let no_smooth = train(
        &pairs,
        &arch,
        &EXTERNAL,
        &TrainConfig {
            smoothing_enabled: false,
            ..base
        },
    )
    .unwrap();
    assert_ne!(full.history, no_cos.history);
    assert_eq!(
        headmotion::model::param_count(&full.checkpoint) - headmotion::model::param_count(&no_smooth.checkpoint),
        3
    );
}
