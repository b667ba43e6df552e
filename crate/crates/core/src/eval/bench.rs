use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{model_forward, FeatureConfig, ModelCheckpoint};
use crate::numerics::Matrix;
use crate::signal::{AudioClip, MfccExtractor};

/// Real-time targets for listener feedback.
pub const TARGET_FPS: f64 = 30.0;
pub const MAX_LATENCY_MS: f64 = 250.0;

/// Length of the sliding window used for the latency measurement.
pub const LATENCY_WINDOW_S: f64 = 1.0;

/// Where a benchmark ran.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub cpu: String,
    pub logical_cpus: usize,
    pub threads: usize,
    pub version: String,
}

impl Environment {
    pub fn current(threads: usize) -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split(':').nth(1))
                    .map(|v| v.trim().to_string())
            })
            .unwrap_or_else(|| "unknown".into());
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            cpu,
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            threads,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub frames: usize,
    pub repetitions: usize,
    /// Median end-to-end time (features + inference) for the whole clip.
    pub median_s: f64,
    pub fps: f64,
    /// Median time to process one sliding window.
    pub window_processing_ms: f64,
    /// Future context the smoother needs before a frame is final.
    pub lookahead_ms: f64,
    /// `window_processing_ms + lookahead_ms`.
    pub latency_ms: f64,
    pub environment: Environment,
}

impl BenchResult {
    pub fn meets_fps(&self) -> bool {
        self.fps >= TARGET_FPS
    }

    pub fn meets_latency(&self) -> bool {
        self.latency_ms <= MAX_LATENCY_MS
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn generate(extractor: &MfccExtractor, clip: &AudioClip, checkpoint: &ModelCheckpoint) -> Result<usize> {
    let mut features = extractor.extract(clip)?;
    let extra = checkpoint.input_dim().saturating_sub(features.feature_dim());
    if extra > 0 {
        features = features.with_extra_channels(&Matrix::zeros(1, extra))?;
    }
    Ok(model_forward(&features, checkpoint)?.len())
}

fn lookahead_frames(checkpoint: &ModelCheckpoint) -> usize {
    use crate::model::Network;
    match &checkpoint.network {
        Network::Proposed(m) => m.smoother.as_ref().map_or(0, |s| s.half_width),
        Network::LstmBaseline(m) => m.smoother.as_ref().map_or(0, |s| s.half_width),
        Network::LinearBaseline(_) => 0,
    }
}

/// Times feature extraction plus inference on `clip` (WAV decoding excluded).
///
/// One warm-up run precedes `repetitions` timed runs; `fps` is frames over
/// the median time. Latency is the median time to process the first
/// [`LATENCY_WINDOW_S`] of audio plus the smoother's look-ahead. Work runs
/// on a pool of `threads` workers.
pub fn benchmark_speed(
    checkpoint: &ModelCheckpoint,
    clip: &AudioClip,
    repetitions: usize,
    threads: usize,
) -> Result<BenchResult> {
    if repetitions < 3 {
        return Err(Error::Config(format!("need at least 3 repetitions, got {repetitions}")));
    }
    let FeatureConfig::Mfcc(mfcc) = &checkpoint.features else {
        return Err(Error::Unsupported(
            "benchmarking from audio needs a checkpoint trained on MFCC features".into(),
        ));
    };
    let extractor = MfccExtractor::new(mfcc.clone())?;
    let min_samples = mfcc.window + mfcc.hop;
    let window_len = ((LATENCY_WINDOW_S * f64::from(clip.sample_rate)) as usize)
        .max(min_samples)
        .min(clip.samples.len());
    let window = AudioClip::new(clip.samples[..window_len].to_vec(), clip.sample_rate)?;

    let threads = threads.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} workers: {e}")))?;
    pool.install(|| {
        let frames = generate(&extractor, clip, checkpoint)?;
        generate(&extractor, &window, checkpoint)?;
        let mut full = Vec::with_capacity(repetitions);
        let mut win = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let t = Instant::now();
            generate(&extractor, clip, checkpoint)?;
            full.push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            generate(&extractor, &window, checkpoint)?;
            win.push(t.elapsed().as_secs_f64());
        }
        let median_s = median(full).max(f64::MIN_POSITIVE);
        let window_processing_ms = median(win) * 1e3;
        let lookahead_ms = lookahead_frames(checkpoint) as f64 / checkpoint.features.frame_rate() * 1e3;
        Ok(BenchResult {
            frames,
            repetitions,
            median_s,
            fps: frames as f64 / median_s,
            window_processing_ms,
            lookahead_ms,
            latency_ms: window_processing_ms + lookahead_ms,
            environment: Environment::current(threads),
        })
    })
}
