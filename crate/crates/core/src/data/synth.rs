//! Seeded synthetic corpus: a flat-spectrum multisine whose loudness follows
//! a random envelope, and listener head angles driven by that envelope.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_manifest, Manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::signal::{write_wav, AudioClip, PoseSequence};

/// How head angles depend on the smoothed speech envelope `e ∈ [0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    EnergyAffine,
    EnergyNonlinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_pairs: usize,
    pub num_sessions: usize,
    pub subjects_per_session: usize,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub seed: u64,
    /// Standard deviation of additive angle noise, degrees.
    pub noise_deg: f64,
    /// Half-range of the per-listener angle offset, degrees.
    pub subject_offset_deg: f64,
    pub coupling: Coupling,
    pub sample_rate: u32,
    pub pose_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_pairs: 200,
            num_sessions: 5,
            subjects_per_session: 2,
            min_duration_s: 2.0,
            max_duration_s: 4.0,
            seed: 0,
            noise_deg: 1.0,
            subject_offset_deg: 2.0,
            coupling: Coupling::EnergyNonlinear,
            sample_rate: 16_000,
            pose_rate: 120.0,
        }
    }
}

pub const MAX_ANGLE_DEG: f64 = 45.0;
/// The carrier repeats every `CARRIER_PERIOD` samples and holds one partial
/// on every third bin of that period's DFT. A periodic Hann window spreads a
/// bin-centred partial over exactly three bins, so frame power spectra do
/// not depend on where a frame starts and only loudness varies over time.
const CARRIER_PERIOD: usize = 1024;
const PARTIAL_STRIDE: usize = 3;
const CARRIER_RMS: f64 = 0.15;
const DYNAMIC_RANGE_DB: f64 = 40.0;
/// Pose at time `t` follows the envelope averaged over the analysis window
/// that starts at `t`.
const WINDOW_S: f64 = 1024.0 / 16_000.0;
const WINDOW_TAPS: usize = 16;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_pairs == 0 || self.num_sessions == 0 {
            return Err(Error::Config("num_pairs and num_sessions must be positive".into()));
        }
        if self.subjects_per_session < 2 {
            return Err(Error::Config("each session needs at least 2 subjects".into()));
        }
        if !(self.min_duration_s >= 0.2 && self.max_duration_s >= self.min_duration_s) {
            return Err(Error::Config(format!(
                "duration range [{}, {}] s is invalid",
                self.min_duration_s, self.max_duration_s
            )));
        }
        if !(self.noise_deg >= 0.0 && self.subject_offset_deg >= 0.0) {
            return Err(Error::Config("noise and offset must be non-negative".into()));
        }
        if self.sample_rate == 0 || !(self.pose_rate > 0.0) {
            return Err(Error::Config("sample and pose rates must be positive".into()));
        }
        Ok(())
    }
}

fn subject_id(session: usize, k: usize) -> String {
    format!("s{}_p{}", session + 1, k + 1)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Angles (degrees) for envelope value `e` before offsets and noise.
pub fn coupled_angles(coupling: Coupling, e: f64) -> [f64; 3] {
    let c = e - 0.5;
    match coupling {
        Coupling::EnergyAffine => [20.0 * c, -15.0 * c, 10.0 * c],
        Coupling::EnergyNonlinear => [
            15.0 * (2.0 * PI * e).sin(),
            20.0 * (4.0 * c * c) - 8.0,
            12.0 * (3.0 * PI * e).cos(),
        ],
    }
}

struct Envelope {
    values: Vec<f64>,
    rate: f64,
}

impl Envelope {
    fn generate(rng: &mut ChaCha8Rng, duration: f64, rate: f64) -> Self {
        let n = (duration * rate).ceil() as usize + 2;
        let comps: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.random_range(0.3..1.0),
                    rng.random_range(0.2..2.5),
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        let norm: f64 = comps.iter().map(|c| c.0).sum();
        let bias: f64 = rng.random_range(-0.5..0.5);
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                let s: f64 = comps.iter().map(|&(a, f, p)| a * (2.0 * PI * f * t + p).sin()).sum();
                sigmoid(4.0 * s / norm + bias)
            })
            .collect();
        Self { values, rate }
    }

    fn at(&self, t: f64) -> f64 {
        let v = &self.values;
        let p = (t * self.rate).max(0.0);
        let i = (p.floor() as usize).min(v.len() - 1);
        let j = (i + 1).min(v.len() - 1);
        v[i] + (v[j] - v[i]) * (p - i as f64)
    }

    /// Mean over `[t, t + WINDOW_S)`.
    fn window_mean(&self, t: f64) -> f64 {
        (0..WINDOW_TAPS)
            .map(|k| self.at(t + WINDOW_S * (k as f64 + 0.5) / WINDOW_TAPS as f64))
            .sum::<f64>()
            / WINDOW_TAPS as f64
    }
}

struct Pair {
    audio: AudioClip,
    pose: PoseSequence,
}

fn synth_pair(config: &SynthConfig, pair: usize, offset: [f64; 3]) -> Result<Pair> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(pair as u64 + 1);
    let duration = rng.random_range(config.min_duration_s..=config.max_duration_s);
    let env = Envelope::generate(&mut rng, duration + WINDOW_S, config.pose_rate);

    let sr = f64::from(config.sample_rate);
    let top_bin = ((7_000.0f64.min(0.45 * sr)) * CARRIER_PERIOD as f64 / sr) as usize;
    let phases: Vec<(usize, f64)> = (PARTIAL_STRIDE..=top_bin)
        .step_by(PARTIAL_STRIDE)
        .map(|k| (k, rng.random_range(0.0..2.0 * PI)))
        .collect();
    let mut carrier: Vec<f64> = (0..CARRIER_PERIOD)
        .map(|n| {
            phases
                .iter()
                .map(|&(k, p)| (2.0 * PI * (k * n % CARRIER_PERIOD) as f64 / CARRIER_PERIOD as f64 + p).cos())
                .sum()
        })
        .collect();
    let rms = (carrier.iter().map(|v| v * v).sum::<f64>() / CARRIER_PERIOD as f64).sqrt();
    carrier.iter_mut().for_each(|v| *v *= CARRIER_RMS / rms);

    let n_samples = (duration * sr).round() as usize;
    let samples: Vec<f32> = (0..n_samples)
        .map(|k| {
            let e = env.at(k as f64 / sr);
            let amp = 10f64.powf(DYNAMIC_RANGE_DB * (e - 1.0) / 20.0);
            let floor: f64 = StandardNormal.sample(&mut rng);
            (amp * carrier[k % CARRIER_PERIOD] + 1e-5 * floor).clamp(-1.0, 1.0) as f32
        })
        .collect();

    let noise = Normal::new(0.0, config.noise_deg.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let n_pose = (duration * config.pose_rate).floor() as usize;
    let mut angles = Matrix::zeros(n_pose, 3);
    for i in 0..n_pose {
        let e = env.window_mean(i as f64 / config.pose_rate);
        let base = coupled_angles(config.coupling, e);
        for ch in 0..3 {
            let v = base[ch] + offset[ch] + noise.sample(&mut rng);
            angles.set(i, ch, v.clamp(-MAX_ANGLE_DEG, MAX_ANGLE_DEG) as f32);
        }
    }
    Ok(Pair {
        audio: AudioClip::new(samples, config.sample_rate)?,
        pose: PoseSequence::new(angles, config.pose_rate)?,
    })
}

/// Writes `wav/`, `pose/` and `manifest.json` under `out_dir` and returns the
/// manifest with paths resolved against `out_dir`.
///
/// Pair `k` belongs to session `k mod num_sessions`; within a session the
/// listener/speaker roles rotate over that session's subjects, so subject ids
/// never span sessions.
pub fn generate_synthetic(config: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    for sub in ["wav", "pose"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }

    let spp = config.subjects_per_session;
    let mut offset_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let offsets: Vec<[f64; 3]> = (0..config.num_sessions * spp)
        .map(|_| {
            let h = config.subject_offset_deg;
            if h > 0.0 {
                [0, 1, 2].map(|_| offset_rng.random_range(-h..=h))
            } else {
                [0.0; 3]
            }
        })
        .collect();

    let entries: Vec<ManifestEntry> = (0..config.num_pairs)
        .into_par_iter()
        .map(|k| {
            let session = k % config.num_sessions;
            let turn = k / config.num_sessions;
            let listener = turn % spp;
            let speaker = (listener + 1 + (turn / spp) % (spp - 1)) % spp;
            let pair = synth_pair(config, k, offsets[session * spp + listener])?;
            let pair_id = format!("pair_{k:04}");
            let wav = Path::new("wav").join(format!("{pair_id}.wav"));
            let pose = Path::new("pose").join(format!("{pair_id}.csv"));
            write_wav(out_dir.join(&wav), &pair.audio)?;
            pair.pose.write_csv(out_dir.join(&pose))?;
            Ok(ManifestEntry {
                pair_id,
                session_id: format!("session{}", session + 1),
                listener_subject_id: subject_id(session, listener),
                speaker_subject_id: subject_id(session, speaker),
                wav_path: Some(wav),
                feature_path: None,
                pose_path: pose,
                extra_feature_path: None,
            })
        })
        .collect::<Result<_>>()?;

    write_manifest(out_dir.join("manifest.json"), &entries)?;
    let resolved = entries
        .into_iter()
        .map(|mut e| {
            e.wav_path = e.wav_path.map(|p| out_dir.join(p));
            e.pose_path = out_dir.join(&e.pose_path);
            e
        })
        .collect();
    Manifest::from_entries(resolved)
}
