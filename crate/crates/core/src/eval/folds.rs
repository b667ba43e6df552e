use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Manifest;
use crate::error::{Error, Result};

/// Folds used in subject-dependent mode.
pub const DEPENDENT_FOLDS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldMode {
    /// Leave one session out; no subject is shared between train and test.
    SubjectIndependent,
    /// Every listener contributes pairs to both sides.
    SubjectDependent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_id: usize,
    /// Indices into the manifest entries.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub train_session_ids: Vec<String>,
    pub test_session_ids: Vec<String>,
    pub train_subject_ids: Vec<String>,
    pub test_subject_ids: Vec<String>,
}

fn describe(manifest: &Manifest, fold_id: usize, train: Vec<usize>, test: Vec<usize>) -> FoldSplit {
    let collect = |idx: &[usize], f: &dyn Fn(usize) -> Vec<String>| -> Vec<String> {
        idx.iter()
            .flat_map(|&i| f(i))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    };
    let session = |i: usize| vec![manifest.entries[i].session_id.clone()];
    let subjects = |i: usize| {
        let e = &manifest.entries[i];
        vec![e.listener_subject_id.clone(), e.speaker_subject_id.clone()]
    };
    FoldSplit {
        fold_id,
        train_session_ids: collect(&train, &session),
        test_session_ids: collect(&test, &session),
        train_subject_ids: collect(&train, &subjects),
        test_subject_ids: collect(&test, &subjects),
        train,
        test,
    }
}

/// Splits the manifest into folds.
///
/// Independent mode makes one fold per session (test on that session, train
/// on the rest) and fails if any subject, as listener or speaker, appears on
/// both sides. Dependent mode shuffles each listener's pairs with `seed` and
/// deals them round-robin into [`DEPENDENT_FOLDS`] folds.
pub fn make_folds(manifest: &Manifest, mode: FoldMode, seed: u64) -> Result<Vec<FoldSplit>> {
    if manifest.is_empty() {
        return Err(Error::Config("manifest has no entries".into()));
    }
    let folds = match mode {
        FoldMode::SubjectIndependent => {
            let sessions = manifest.sessions();
            if sessions.len() < 2 {
                return Err(Error::Config(format!(
                    "subject-independent folds need at least 2 sessions, found {}",
                    sessions.len()
                )));
            }
            sessions
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let (test, train): (Vec<usize>, Vec<usize>) =
                        (0..manifest.len()).partition(|&i| &manifest.entries[i].session_id == s);
                    describe(manifest, k, train, test)
                })
                .collect::<Vec<_>>()
        }
        FoldMode::SubjectDependent => {
            let mut by_listener: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, e) in manifest.entries.iter().enumerate() {
                by_listener.entry(&e.listener_subject_id).or_default().push(i);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut assignment = vec![0usize; manifest.len()];
            for idx in by_listener.values_mut() {
                idx.shuffle(&mut rng);
                for (j, &i) in idx.iter().enumerate() {
                    assignment[i] = j % DEPENDENT_FOLDS;
                }
            }
            (0..DEPENDENT_FOLDS)
                .map(|k| {
                    let (test, train): (Vec<usize>, Vec<usize>) =
                        (0..manifest.len()).partition(|&i| assignment[i] == k);
                    describe(manifest, k, train, test)
                })
                .filter(|f| !f.test.is_empty() && !f.train.is_empty())
                .collect()
        }
    };
    if folds.is_empty() {
        return Err(Error::Config("too few pairs to form folds".into()));
    }
    if mode == FoldMode::SubjectIndependent {
        for f in &folds {
            let train: BTreeSet<&String> = f.train_subject_ids.iter().collect();
            let shared: Vec<&str> = f
                .test_subject_ids
                .iter()
                .filter(|s| train.contains(s))
                .map(String::as_str)
                .collect();
            if !shared.is_empty() {
                return Err(Error::Data(format!(
                    "fold {} (test session {}) shares subjects with training: {}",
                    f.fold_id,
                    f.test_session_ids.join(","),
                    shared.join(", ")
                )));
            }
        }
    }
    Ok(folds)
}
