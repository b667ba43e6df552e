use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BenchResult, FoldMode, Mae};
use crate::error::{Error, Result};
use crate::model::FeatureConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub fold_id: usize,
    pub test_sessions: Vec<String>,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub test_frames: usize,
    /// Pooled over all test frames of the fold.
    pub mae: Mae,
    /// Population std of per-sequence MAE within the fold.
    pub sequence_std: Mae,
    pub epochs: usize,
    pub final_loss: Option<f64>,
}

/// Cross-validation results, one row per fold plus the aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub model: String,
    pub mode: FoldMode,
    pub features: FeatureConfig,
    pub seed: u64,
    pub smoothing_enabled: bool,
    pub cosine_enabled: bool,
    pub params: usize,
    pub folds: Vec<FoldRow>,
    /// Mean of the fold MAEs.
    pub mean: Mae,
    /// Spread of the fold MAEs, see `std_kind`.
    pub std: Mae,
    /// Population std of per-sequence MAE over every test sequence.
    pub sequence_std: Mae,
    pub std_kind: String,
    #[serde(default)]
    pub speed: Option<BenchResult>,
}

impl FoldReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Plain-text table: one line per fold, then `mean ± std`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "model {} | mode {:?} | params {} | smoothing {} | cosine {} | seed {}",
            self.model, self.mode, self.params, self.smoothing_enabled, self.cosine_enabled, self.seed
        );
        let _ = writeln!(
            out,
            "{:<8} {:>10} {:>10} {:>10} {:>10} {:>7}",
            "fold", "roll", "pitch", "yaw", "all", "frames"
        );
        for r in &self.folds {
            let m = r.mae;
            let _ = writeln!(
                out,
                "{:<8} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>7}",
                r.fold_id, m.roll, m.pitch, m.yaw, m.all, r.test_frames
            );
        }
        let cell = |m: f64, s: f64| format!("{m:.2}±{s:.2}");
        let _ = writeln!(
            out,
            "{:<8} {:>10} {:>10} {:>10} {:>10}",
            "mean",
            cell(self.mean.roll, self.std.roll),
            cell(self.mean.pitch, self.std.pitch),
            cell(self.mean.yaw, self.std.yaw),
            cell(self.mean.all, self.std.all)
        );
        if let Some(s) = &self.speed {
            let _ = writeln!(out, "speed {:.0} fps, latency {:.1} ms", s.fps, s.latency_ms);
        }
        out
    }
}
