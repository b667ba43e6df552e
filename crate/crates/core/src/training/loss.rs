//! Training objective: MSE on the smoothed pose plus one minus the mean
//! per-frame cosine similarity on the unsmoothed pose.

use crate::error::{Error, Result};
use crate::model::PredictionGrad;
use crate::numerics::{Matrix, Real};

/// Lower bound on cosine denominators.
pub const COSINE_EPS: f64 = 1e-8;

/// Loss split into its two terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts<T> {
    pub mse: T,
    /// `1 − mean cosine`, or zero when the cosine term is disabled.
    pub cosine: T,
}

impl<T: Real> LossParts<T> {
    pub fn total(&self) -> T {
        self.mse + self.cosine
    }
}

/// Clamped to `[-1, 1]` so rounding cannot push `1 − cos` below zero.
pub fn cosine_similarity<T: Real>(a: &[T], b: &[T]) -> T {
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    (dot / (na * nb).max(T::lit(COSINE_EPS))).max(-T::one()).min(T::one())
}

fn check_shapes<T: Real>(truth: &Matrix<T>, raw: &Matrix<T>, smoothed: &Matrix<T>) -> Result<()> {
    if raw.shape() != truth.shape() || smoothed.shape() != truth.shape() {
        return Err(Error::dims(
            "loss",
            truth.shape_str(),
            format!("{} / {}", raw.shape_str(), smoothed.shape_str()),
        ));
    }
    if truth.rows() == 0 {
        return Err(Error::Input("loss over an empty sequence".into()));
    }
    Ok(())
}

pub fn loss_parts<T: Real>(
    truth: &Matrix<T>,
    raw: &Matrix<T>,
    smoothed: &Matrix<T>,
    cosine_enabled: bool,
) -> Result<LossParts<T>> {
    check_shapes(truth, raw, smoothed)?;
    let n = truth.as_slice().len();
    let mse = truth
        .as_slice()
        .iter()
        .zip(smoothed.as_slice())
        .map(|(&t, &s)| (t - s) * (t - s))
        .sum::<T>()
        / T::lit(n as f64);
    let cosine = if cosine_enabled {
        let mean_sim = (0..truth.rows())
            .map(|i| cosine_similarity(truth.row(i), raw.row(i)))
            .sum::<T>()
            / T::lit(truth.rows() as f64);
        T::one() - mean_sim
    } else {
        T::zero()
    };
    let parts = LossParts { mse, cosine };
    debug_assert!(
        !parts.total().is_finite() || parts.total() >= T::lit(-1e-6),
        "negative loss {:?}",
        parts.total().to_f64_lossy()
    );
    Ok(parts)
}

pub fn loss<T: Real>(truth: &Matrix<T>, raw: &Matrix<T>, smoothed: &Matrix<T>, cosine_enabled: bool) -> Result<T> {
    loss_parts(truth, raw, smoothed, cosine_enabled).map(|p| p.total())
}

/// Loss value and its gradient with respect to both prediction outputs.
pub fn loss_and_grad<T: Real>(
    truth: &Matrix<T>,
    raw: &Matrix<T>,
    smoothed: &Matrix<T>,
    cosine_enabled: bool,
) -> Result<(T, PredictionGrad<T>)> {
    let value = loss(truth, raw, smoothed, cosine_enabled)?;
    let n = T::lit(truth.as_slice().len() as f64);
    let two = T::lit(2.0);
    let d_smoothed = Matrix::from_fn(truth.rows(), truth.cols(), |i, j| {
        two * (smoothed.get(i, j) - truth.get(i, j)) / n
    });

    let mut d_raw = Matrix::zeros(raw.rows(), raw.cols());
    if cosine_enabled {
        let inv_rows = T::one() / T::lit(truth.rows() as f64);
        for i in 0..truth.rows() {
            let (t, r) = (truth.row(i), raw.row(i));
            let dot: T = t.iter().zip(r).map(|(&a, &b)| a * b).sum();
            let nt = t.iter().map(|&a| a * a).sum::<T>().sqrt();
            let nr = r.iter().map(|&b| b * b).sum::<T>().sqrt();
            let guarded = nt * nr <= T::lit(COSINE_EPS);
            let denom = (nt * nr).max(T::lit(COSINE_EPS));
            let out = d_raw.row_mut(i);
            for j in 0..t.len() {
                let mut ds = t[j] / denom;
                if !guarded {
                    ds -= dot * r[j] / (nr * nr * denom);
                }
                out[j] = -ds * inv_rows;
            }
        }
    }
    Ok((
        value,
        PredictionGrad {
            raw: d_raw,
            smoothed: d_smoothed,
        },
    ))
}
