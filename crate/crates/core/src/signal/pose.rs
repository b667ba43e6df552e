use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::features::rate_matches;
use super::FeatureSequence;

pub const ANGLE_NAMES: [&str; 3] = ["roll", "pitch", "yaw"];

/// Head Euler angles in degrees, columns ordered roll, pitch, yaw.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseSequence {
    angles: Matrix<f32>,
    rate: f64,
}

impl PoseSequence {
    pub fn new(angles: Matrix<f32>, rate: f64) -> Result<Self> {
        if angles.cols() != 3 {
            return Err(Error::dims("PoseSequence", angles.shape_str(), "Nx3"));
        }
        if angles.rows() < 2 {
            return Err(Error::Input(format!(
                "pose sequence needs at least 2 samples, got {}",
                angles.rows()
            )));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Config(format!("pose rate must be positive, got {rate}")));
        }
        if let Some(row) = (0..angles.rows()).find(|&r| angles.row(r).iter().any(|v| !v.is_finite())) {
            return Err(Error::Data(format!("non-finite angle in row {row}")));
        }
        Ok(Self { angles, rate })
    }

    pub fn angles(&self) -> &Matrix<f32> {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.rows() == 0
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn truncated(&self, n: usize) -> Result<Self> {
        Self::new(self.angles.head_rows(n), self.rate)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let expected = ["t", "roll", "pitch", "yaw"];
        if headers.iter().map(str::trim).ne(expected) {
            return Err(Error::Format(format!(
                "{}: pose CSV header must be `t,roll,pitch,yaw`, got `{}`",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut times = Vec::new();
        let mut data = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let mut vals = [0f64; 4];
            for (i, v) in vals.iter_mut().enumerate() {
                let field = rec.get(i).unwrap_or("");
                *v = field.trim().parse().map_err(|_| {
                    Error::Format(format!("{}: line {}: bad number `{field}`", path.display(), line + 2))
                })?;
            }
            times.push(vals[0]);
            data.extend(vals[1..].iter().map(|&v| v as f32));
        }
        let rows = times.len();
        if rows < 2 {
            return Err(Error::Input(format!(
                "{}: pose CSV needs at least 2 rows",
                path.display()
            )));
        }
        let span = times[rows - 1] - times[0];
        if !(span > 0.0) {
            return Err(Error::Data(format!(
                "{}: time column is not increasing",
                path.display()
            )));
        }
        let raw_rate = (rows - 1) as f64 / span;
        let rounded = raw_rate.round();
        let rate = if (raw_rate - rounded).abs() < 1e-3 * rounded.max(1.0) {
            rounded
        } else {
            raw_rate
        };
        Self::new(Matrix::from_vec(rows, 3, data)?, rate)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["t", "roll", "pitch", "yaw"])
            .map_err(|e| csv_error(path, e))?;
        for r in 0..self.len() {
            let row = self.angles.row(r);
            w.write_record([
                format!("{:.6}", r as f64 / self.rate),
                row[0].to_string(),
                row[1].to_string(),
                row[2].to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        Error::Format(format!("{}: {e}", path.display()))
    }
}

/// Downsamples by linear interpolation at `t_k = k / target_rate`.
pub fn resample_pose(pose: &PoseSequence, target_rate: f64) -> Result<PoseSequence> {
    if !(target_rate.is_finite() && target_rate > 0.0) {
        return Err(Error::Config(format!(
            "target rate must be positive, got {target_rate}"
        )));
    }
    if target_rate > pose.rate() && !rate_matches(target_rate, pose.rate()) {
        return Err(Error::Unsupported(format!(
            "upsampling pose from {} Hz to {target_rate} Hz",
            pose.rate()
        )));
    }
    let n_in = pose.len();
    let ratio = pose.rate() / target_rate;
    let n_out = ((n_in as f64) * target_rate / pose.rate() + 1e-9).floor() as usize;
    let src = pose.angles();
    let out = Matrix::from_fn(n_out, 3, |k, ch| {
        let p = k as f64 * ratio;
        let i0 = (p.floor() as usize).min(n_in - 1);
        let i1 = (i0 + 1).min(n_in - 1);
        let frac = p - i0 as f64;
        let a = f64::from(src.get(i0, ch));
        let b = f64::from(src.get(i1, ch));
        (a + (b - a) * frac) as f32
    });
    PoseSequence::new(out, target_rate)
}

/// Truncates both sequences to their common leading length so that `M = N`.
pub fn align_pair(features: &FeatureSequence, pose: &PoseSequence) -> Result<(FeatureSequence, PoseSequence)> {
    if !rate_matches(features.frame_rate(), pose.rate()) {
        return Err(Error::Config(format!(
            "feature rate {} Hz differs from pose rate {} Hz",
            features.frame_rate(),
            pose.rate()
        )));
    }
    let n = features.num_frames().min(pose.len());
    if n < 2 {
        return Err(Error::Input(format!("aligned length {n} is below 2")));
    }
    Ok((features.truncated(n)?, pose.truncated(n)?))
}
