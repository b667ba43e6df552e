//! MFCC front end.
//!
//! Pipeline per frame: pre-emphasis (whole signal) → periodic Hann window →
//! power spectrum → triangular HTK mel filterbank → natural log with a floor →
//! orthonormal DCT-II, keeping the leading coefficients. Frames are taken
//! without padding, so `M = 1 + ⌊(samples − window) / hop⌋`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{AudioClip, FeatureKind, FeatureSequence};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub sample_rate: u32,
    /// Analysis window in samples (64 ms at 16 kHz).
    pub window: usize,
    /// Hop in samples (≈33.3 ms at 16 kHz, i.e. a 30 Hz frame grid).
    pub hop: usize,
    pub n_fft: usize,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub pre_emphasis: f64,
    pub log_floor: f64,
    /// Nominal frame rate written on extracted sequences.
    pub frame_rate: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            window: 1024,
            hop: 533,
            n_fft: 1024,
            n_mels: 40,
            n_coeffs: 28,
            f_min: 0.0,
            f_max: 8_000.0,
            pre_emphasis: 0.97,
            log_floor: 1e-10,
            frame_rate: 30.0,
        }
    }
}

impl MfccConfig {
    /// Number of frames produced for `num_samples` input samples.
    pub fn frame_count(&self, num_samples: usize) -> usize {
        if num_samples < self.window {
            0
        } else {
            1 + (num_samples - self.window) / self.hop
        }
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.hop == 0 || self.n_fft < self.window {
            return Err(Error::Config(format!(
                "invalid framing: window {}, hop {}, n_fft {}",
                self.window, self.hop, self.n_fft
            )));
        }
        if self.n_coeffs == 0 || self.n_coeffs > self.n_mels {
            return Err(Error::Config(format!(
                "n_coeffs {} must be in 1..={}",
                self.n_coeffs, self.n_mels
            )));
        }
        if !(self.f_min >= 0.0 && self.f_max > self.f_min && self.f_max <= self.sample_rate as f64 / 2.0) {
            return Err(Error::Config(format!(
                "invalid mel band {}..{} Hz",
                self.f_min, self.f_max
            )));
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Reusable extractor with precomputed window, filterbank, DCT basis and FFT plan.
pub struct MfccExtractor {
    config: MfccConfig,
    window: Vec<f64>,
    /// `n_mels × (n_fft/2 + 1)`.
    filterbank: Matrix<f64>,
    /// `n_coeffs × n_mels`.
    dct: Matrix<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor").field("config", &self.config).finish()
    }
}

impl MfccExtractor {
    pub fn new(config: MfccConfig) -> Result<Self> {
        config.validate()?;
        let n = config.window;
        let window = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
            .collect();

        let bins = config.n_fft / 2 + 1;
        let mel_lo = hz_to_mel(config.f_min);
        let mel_hi = hz_to_mel(config.f_max);
        let edges: Vec<f64> = (0..config.n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (config.n_mels + 1) as f64))
            .collect();
        let filterbank = Matrix::from_fn(config.n_mels, bins, |m, k| {
            let f = k as f64 * config.sample_rate as f64 / config.n_fft as f64;
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let up = (f - lo) / (mid - lo);
            let down = (hi - f) / (hi - mid);
            up.min(down).max(0.0)
        });

        let n_mels = config.n_mels as f64;
        let dct = Matrix::from_fn(config.n_coeffs, config.n_mels, |k, i| {
            let scale = if k == 0 {
                (1.0 / n_mels).sqrt()
            } else {
                (2.0 / n_mels).sqrt()
            };
            scale * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n_mels)).cos()
        });

        let fft = FftPlanner::new().plan_fft_forward(config.n_fft);
        Ok(Self {
            config,
            window,
            filterbank,
            dct,
            fft,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    fn check_clip(&self, clip: &AudioClip) -> Result<()> {
        if clip.sample_rate != self.config.sample_rate {
            return Err(Error::Input(format!(
                "audio is {} Hz, extractor expects {} Hz",
                clip.sample_rate, self.config.sample_rate
            )));
        }
        let min_samples = self.config.window + self.config.hop;
        if clip.samples.len() < min_samples {
            return Err(Error::Input(format!(
                "clip of {} samples is too short: need at least {min_samples} samples ({:.1} ms) for two frames",
                clip.samples.len(),
                1e3 * min_samples as f64 / self.config.sample_rate as f64
            )));
        }
        Ok(())
    }

    fn pre_emphasized(&self, samples: &[f32]) -> Vec<f64> {
        let a = self.config.pre_emphasis;
        let mut prev = 0.0;
        samples
            .iter()
            .map(|&s| {
                let s = f64::from(s);
                let y = s - a * prev;
                prev = s;
                y
            })
            .collect()
    }

    /// Log mel energies, one row per frame.
    pub fn log_mel(&self, clip: &AudioClip) -> Result<Matrix<f64>> {
        self.check_clip(clip)?;
        let cfg = &self.config;
        let signal = self.pre_emphasized(&clip.samples);
        let frames = cfg.frame_count(signal.len());
        let bins = cfg.n_fft / 2 + 1;
        let mut out = Matrix::zeros(frames, cfg.n_mels);
        let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
        let mut power = vec![0.0; bins];
        for t in 0..frames {
            let start = t * cfg.hop;
            buf.fill(Complex::new(0.0, 0.0));
            for (i, (b, &s)) in buf.iter_mut().zip(&signal[start..start + cfg.window]).enumerate() {
                b.re = s * self.window[i];
            }
            self.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            let row = out.row_mut(t);
            for (m, e) in row.iter_mut().enumerate() {
                let energy: f64 = self.filterbank.row(m).iter().zip(&power).map(|(w, p)| w * p).sum();
                *e = energy.max(cfg.log_floor).ln();
            }
        }
        Ok(out)
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureSequence> {
        let log_mel = self.log_mel(clip)?;
        let coeffs = log_mel.matmul_nt(&self.dct)?;
        FeatureSequence::new(coeffs.cast(), self.config.frame_rate, FeatureKind::Mfcc)
    }
}

pub fn extract_mfcc(clip: &AudioClip, config: &MfccConfig) -> Result<FeatureSequence> {
    MfccExtractor::new(config.clone())?.extract(clip)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, secs: f64) -> AudioClip {
        let n = (secs * 16_000.0) as usize;
        let s = (0..n)
            .map(|i| (0.5 * (2.0 * PI * freq * i as f64 / 16_000.0).sin()) as f32)
            .collect();
        AudioClip::new(s, 16_000).unwrap()
    }

    #[test]
    fn twenty_eight_coefficients_and_frame_count() {
        let clip = sine(440.0, 1.0);
        let seq = extract_mfcc(&clip, &MfccConfig::default()).unwrap();
        assert_eq!(seq.feature_dim(), 28);
        assert_eq!(seq.num_frames(), 1 + (16_000 - 1024) / 533);
        assert_eq!(seq.frame_rate(), 30.0);
    }

    #[test]
    fn silence_gives_identical_frames() {
        let clip = AudioClip::new(vec![0.0; 8000], 16_000).unwrap();
        let seq = extract_mfcc(&clip, &MfccConfig::default()).unwrap();
        let first = seq.frames().row(0).to_vec();
        assert!((1..seq.num_frames()).all(|r| seq.frames().row(r) == first.as_slice()));
        // log floor through the DCT: only c0 is non-zero
        let expected_c0 = (40.0f64).sqrt() * 1e-10f64.ln();
        assert!((f64::from(first[0]) - expected_c0).abs() < 1e-3);
        assert!(first[1..].iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn too_short_clip_states_minimum() {
        let clip = AudioClip::new(vec![0.0; 1200], 16_000).unwrap();
        let msg = extract_mfcc(&clip, &MfccConfig::default()).unwrap_err().to_string();
        assert!(msg.contains("1557") && msg.contains("ms"), "{msg}");
    }

    #[test]
    fn wrong_sample_rate_rejected() {
        let clip = AudioClip::new(vec![0.0; 48_000], 48_000).unwrap();
        assert!(extract_mfcc(&clip, &MfccConfig::default()).is_err());
    }

    #[test]
    fn dct_basis_is_orthonormal() {
        let ex = MfccExtractor::new(MfccConfig {
            n_coeffs: 40,
            ..MfccConfig::default()
        })
        .unwrap();
        let gram = ex.dct.matmul_nt(&ex.dct).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 100.0, 1000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
    }
}
