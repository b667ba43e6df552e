use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One speech/head-motion pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub pair_id: String,
    pub session_id: String,
    pub listener_subject_id: String,
    pub speaker_subject_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wav_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_path: Option<PathBuf>,
    pub pose_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_feature_path: Option<PathBuf>,
}

/// Validated entries with every path resolved against the manifest's
/// directory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Entries dropped because the speaker was also the listener.
    pub excluded_self_pairs: usize,
}

impl Manifest {
    /// Drops self-pairs and checks pair ids are unique. Paths are left as given.
    pub fn from_entries(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.pair_id.as_str()) {
                return Err(Error::Data(format!("duplicate pair_id `{}`", e.pair_id)));
            }
        }
        let before = entries.len();
        let entries: Vec<_> = entries
            .into_iter()
            .filter(|e| e.listener_subject_id != e.speaker_subject_id)
            .collect();
        let excluded_self_pairs = before - entries.len();
        if excluded_self_pairs > 0 {
            log::warn!("excluded {excluded_self_pairs} entries whose speaker is also the listener");
        }
        Ok(Self {
            entries,
            excluded_self_pairs,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sessions(&self) -> Vec<String> {
        let mut s: Vec<String> = self.entries.iter().map(|e| e.session_id.clone()).collect();
        s.sort();
        s.dedup();
        s
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<ManifestEntry> = serde_json::from_str(&text).map_err(|e| {
        Error::Format(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    for e in &mut entries {
        if e.wav_path.is_none() && e.feature_path.is_none() {
            return Err(Error::Data(format!(
                "pair `{}` has neither wav_path nor feature_path",
                e.pair_id
            )));
        }
        for p in [
            Some(&mut e.pose_path),
            e.wav_path.as_mut(),
            e.feature_path.as_mut(),
            e.extra_feature_path.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.is_file() {
                return Err(Error::Data(format!(
                    "pair `{}` references missing file {}",
                    e.pair_id,
                    p.display()
                )));
            }
        }
    }
    Manifest::from_entries(entries)
}

/// Writes entries as a pretty JSON array. Paths are written as stored, so
/// callers wanting a relocatable manifest should store relative paths.
pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(entries).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}
