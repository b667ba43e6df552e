use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Frame rates a speech feature grid may have: the 30 Hz MFCC/eGEMAPS grid
/// and the 50 Hz grid of wav2vec2-style encoders.
pub const SUPPORTED_FRAME_RATES: [f64; 2] = [30.0, 50.0];

pub const WAV2VEC2_DIM: usize = 512;
pub const EGEMAPS_DIM: usize = 88;

const FEATURE_MAGIC: &[u8; 4] = b"HMFE";
const FEATURE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Mfcc,
    External,
}

/// Per-frame speech embeddings; row `i` becomes the features of graph node `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    frames: Matrix<f32>,
    frame_rate: f64,
    kind: FeatureKind,
}

pub(crate) fn rate_matches(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-6 * a.abs().max(1.0)
}

impl FeatureSequence {
    pub fn new(frames: Matrix<f32>, frame_rate: f64, kind: FeatureKind) -> Result<Self> {
        if frames.rows() < 2 {
            return Err(Error::Input(format!(
                "feature sequence needs at least 2 frames, got {}",
                frames.rows()
            )));
        }
        if !SUPPORTED_FRAME_RATES.iter().any(|&r| rate_matches(r, frame_rate)) {
            return Err(Error::Config(format!(
                "frame rate {frame_rate} Hz is not one of {SUPPORTED_FRAME_RATES:?}"
            )));
        }
        if let Some(row) = (0..frames.rows()).find(|&r| frames.row(r).iter().any(|v| !v.is_finite())) {
            return Err(Error::Data(format!("non-finite feature value in row {row}")));
        }
        Ok(Self {
            frames,
            frame_rate,
            kind,
        })
    }

    pub fn frames(&self) -> &Matrix<f32> {
        &self.frames
    }

    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn truncated(&self, n: usize) -> Result<Self> {
        Self::new(self.frames.head_rows(n), self.frame_rate, self.kind)
    }

    /// Appends per-frame extra channels (e.g. speaker arousal/valence).
    /// A single-row `extra` is broadcast to every frame; otherwise it needs
    /// at least as many rows as `self` and is truncated.
    pub fn with_extra_channels(&self, extra: &Matrix<f32>) -> Result<Self> {
        let m = self.num_frames();
        let extra = if extra.rows() == 1 {
            Matrix::from_fn(m, extra.cols(), |_, j| extra.get(0, j))
        } else if extra.rows() >= m {
            extra.head_rows(m)
        } else {
            return Err(Error::Input(format!(
                "extra features have {} rows, need 1 or at least {m}",
                extra.rows()
            )));
        };
        Self::new(self.frames.hcat(&extra)?, self.frame_rate, self.kind)
    }
}

/// Writes the binary feature-matrix format: magic `HMFE`, `u32` version,
/// `u32` rows, `u32` cols, `f32` frame rate, then row-major `f32` data, all
/// little-endian.
pub fn write_feature_file(path: impl AsRef<Path>, frames: &Matrix<f32>, frame_rate: f32) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(20 + 4 * frames.as_slice().len());
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(frames.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(frames.cols() as u32).to_le_bytes());
    buf.extend_from_slice(&frame_rate.to_le_bytes());
    for v in frames.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::io(path, e))
}

/// Raw contents of a feature-matrix file, before any sequence validation.
pub fn read_feature_file(path: impl AsRef<Path>) -> Result<(Matrix<f32>, f32)> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        return Err(Error::Data(format!("{}: empty feature file", path.display())));
    }
    if bytes.len() < 20 || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::Format(format!("{}: missing HMFE header", path.display())));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != FEATURE_VERSION {
        return Err(Error::Format(format!(
            "{}: feature file version {version}, expected {FEATURE_VERSION}",
            path.display()
        )));
    }
    let rows = word(8) as usize;
    let cols = word(12) as usize;
    let rate = f32::from_le_bytes(bytes[16..20].try_into().expect("4 bytes"));
    let body = &bytes[20..];
    if body.len() != rows * cols * 4 {
        return Err(Error::Format(format!(
            "{}: header declares {rows}x{cols} but body holds {} bytes",
            path.display(),
            body.len()
        )));
    }
    let data: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if let Some(idx) = data.iter().position(|v| v.is_nan()) {
        return Err(Error::Data(format!(
            "{}: NaN in row {}",
            path.display(),
            idx / cols.max(1)
        )));
    }
    Ok((Matrix::from_vec(rows, cols, data)?, rate))
}

/// Loads precomputed per-frame features (wav2vec2-style, eGEMAPS-style, ...).
/// The file's declared frame rate is trusted.
pub fn load_external_features(path: impl AsRef<Path>, expected_dim: usize) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let (frames, rate) = read_feature_file(path)?;
    if frames.rows() == 0 {
        return Err(Error::Data(format!("{}: feature file has no rows", path.display())));
    }
    if frames.cols() != expected_dim {
        return Err(Error::Config(format!(
            "{}: feature dim {} does not match expected {expected_dim}",
            path.display(),
            frames.cols()
        )));
    }
    FeatureSequence::new(frames, f64::from(rate), FeatureKind::External)
}
