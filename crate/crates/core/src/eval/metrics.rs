use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{rate_matches, PoseSequence};

/// Mean absolute error in degrees per angle; `all` is the mean of the three.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mae {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub all: f64,
}

impl Mae {
    pub fn from_angles(per_angle: [f64; 3]) -> Self {
        Self {
            roll: per_angle[0],
            pitch: per_angle[1],
            yaw: per_angle[2],
            all: per_angle.iter().sum::<f64>() / 3.0,
        }
    }

    pub fn angles(&self) -> [f64; 3] {
        [self.roll, self.pitch, self.yaw]
    }
}

/// Sums of absolute errors, for pooling MAE over many sequences.
#[derive(Clone, Copy, Debug, Default)]
pub struct MaeAccumulator {
    sums: [f64; 3],
    frames: usize,
}

impl MaeAccumulator {
    pub fn add(&mut self, pred: &PoseSequence, truth: &PoseSequence) -> Result<()> {
        check(pred, truth)?;
        for i in 0..pred.len() {
            for (c, s) in self.sums.iter_mut().enumerate() {
                *s += f64::from((pred.angles().get(i, c) - truth.angles().get(i, c)).abs());
            }
        }
        self.frames += pred.len();
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn finish(&self) -> Mae {
        let n = self.frames.max(1) as f64;
        Mae::from_angles(self.sums.map(|s| s / n))
    }
}

fn check(pred: &PoseSequence, truth: &PoseSequence) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Input(format!(
            "prediction has {} samples, ground truth {}",
            pred.len(),
            truth.len()
        )));
    }
    if !rate_matches(pred.rate(), truth.rate()) {
        return Err(Error::Input(format!(
            "prediction at {} Hz, ground truth at {} Hz",
            pred.rate(),
            truth.rate()
        )));
    }
    Ok(())
}

pub fn mae(pred: &PoseSequence, truth: &PoseSequence) -> Result<Mae> {
    let mut acc = MaeAccumulator::default();
    acc.add(pred, truth)?;
    Ok(acc.finish())
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Field-wise [`mean_std`] over a set of MAE values.
pub fn aggregate(values: &[Mae]) -> (Mae, Mae) {
    let pick = |f: fn(&Mae) -> f64| mean_std(&values.iter().map(f).collect::<Vec<_>>());
    let (r, p, y, a) = (pick(|m| m.roll), pick(|m| m.pitch), pick(|m| m.yaw), pick(|m| m.all));
    (
        Mae {
            roll: r.0,
            pitch: p.0,
            yaw: y.0,
            all: a.0,
        },
        Mae {
            roll: r.1,
            pitch: p.1,
            yaw: y.1,
            all: a.1,
        },
    )
}
