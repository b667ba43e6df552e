//! Learnable Gaussian smoothing of the decoded pose trajectory.
//!
//! Each angle channel gets its own zero-mean Gaussian kernel over `[-K, K]`
//! frames, `g_j ∝ exp(-j² / 2σ²)`, normalised to sum 1. The width is stored
//! as an unconstrained `rho` with `σ = softplus(rho)` so it stays positive.

use crate::error::Result;
use crate::numerics::{conv1d_time, conv1d_time_backward, join, visit_vec, Matrix, Params, Real, Visitor, VisitorMut};

#[derive(Clone, Debug)]
pub struct GaussianSmoother<T> {
    /// One entry per channel (roll, pitch, yaw).
    pub rho: Vec<T>,
    pub half_width: usize,
}

pub fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

pub fn inverse_softplus(y: f64) -> f64 {
    // ln(e^y - 1), written to stay accurate for large y
    y + (-(-y).exp_m1()).ln()
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Normalised Gaussian taps for one channel.
pub fn gaussian_kernel<T: Real>(sigma: T, half_width: usize) -> Vec<T> {
    let two_var = T::lit(2.0) * sigma * sigma;
    let raw: Vec<T> = (-(half_width as isize)..=half_width as isize)
        .map(|j| {
            let j = T::lit(j as f64);
            (-(j * j) / two_var).exp()
        })
        .collect();
    let total: T = raw.iter().copied().sum();
    raw.into_iter().map(|v| v / total).collect()
}

impl<T: Real> GaussianSmoother<T> {
    pub fn new(channels: usize, initial_sigma: f64, half_width: usize) -> Self {
        Self {
            rho: vec![T::lit(inverse_softplus(initial_sigma)); channels],
            half_width: half_width.max(1),
        }
    }

    pub fn sigmas(&self) -> Vec<T> {
        self.rho.iter().map(|&r| softplus(r)).collect()
    }

    pub fn kernels(&self) -> Vec<Vec<T>> {
        self.sigmas()
            .into_iter()
            .map(|s| gaussian_kernel(s, self.half_width))
            .collect()
    }

    pub fn forward(&self, raw: &Matrix<T>) -> Result<Matrix<T>> {
        conv1d_time(raw, &self.kernels())
    }

    /// Returns `∂L/∂raw` and accumulates `∂L/∂rho` into `grads`.
    pub fn backward(&self, raw: &Matrix<T>, upstream: &Matrix<T>, grads: &mut Self) -> Result<Matrix<T>> {
        let kernels = self.kernels();
        let (d_raw, d_kernels) = conv1d_time_backward(raw, &kernels, upstream)?;
        let k = self.half_width as isize;
        for (ch, (&rho, dk)) in self.rho.iter().zip(&d_kernels).enumerate() {
            let sigma = softplus(rho);
            let two_var = T::lit(2.0) * sigma * sigma;
            let sigma3 = sigma * sigma * sigma;
            let e: Vec<T> = (-k..=k)
                .map(|j| {
                    let j = T::lit(j as f64);
                    (-(j * j) / two_var).exp()
                })
                .collect();
            // d e_j / dσ = e_j · j² / σ³ (guarding 0 · ∞ when σ underflows)
            let de: Vec<T> = (-k..=k)
                .zip(&e)
                .map(|(j, &ej)| {
                    if ej == T::zero() {
                        T::zero()
                    } else {
                        let j = T::lit(j as f64);
                        ej * j * j / sigma3
                    }
                })
                .collect();
            let s: T = e.iter().copied().sum();
            let ds: T = de.iter().copied().sum();
            let mut d_sigma = T::zero();
            for ((&ej, &dej), &g) in e.iter().zip(&de).zip(dk) {
                d_sigma += g * (dej * s - ej * ds) / (s * s);
            }
            grads.rho[ch] += d_sigma * sigmoid(rho);
        }
        Ok(d_raw)
    }
}

impl<T: Real> Params<T> for GaussianSmoother<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        visit_vec(&self.rho, join(prefix, "rho"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        f(&join(prefix, "rho"), &mut self.rho);
    }
}
