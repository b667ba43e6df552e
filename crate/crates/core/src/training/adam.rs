//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::numerics::{Params, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments for every parameter tensor, in visit order.
#[derive(Clone, Debug, Default)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
    pub steps: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    /// One update of `params` from `grads` (same layout). A non-finite
    /// gradient aborts before anything is modified.
    pub fn step<P: Params<T>>(&mut self, params: &mut P, grads: &P, lr: f64) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        let mut flat: Vec<Vec<T>> = Vec::new();
        let mut bad: Option<String> = None;
        grads.visit("", &mut |name, _, g| {
            if bad.is_none() {
                if let Some(k) = g.iter().position(|v| !v.is_finite()) {
                    bad = Some(format!("non-finite gradient in `{name}` at element {k}"));
                }
            }
            flat.push(g.to_vec());
        });
        if let Some(msg) = bad {
            return Err(Error::Divergence(msg));
        }
        if self.first.is_empty() {
            self.first = flat.iter().map(|g| vec![T::zero(); g.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != flat.len() || self.first.iter().zip(&flat).any(|(m, g)| m.len() != g.len()) {
            return Err(Error::Config("gradient layout does not match optimizer state".into()));
        }

        self.steps += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = T::lit(1.0 - beta1.powi(self.steps as i32));
        let c2 = T::lit(1.0 - beta2.powi(self.steps as i32));
        let (b1, b2, eps, lr) = (T::lit(beta1), T::lit(beta2), T::lit(eps), T::lit(lr));
        let mut idx = 0;
        params.visit_mut("", &mut |_, theta| {
            let (m, v, g) = (&mut self.first[idx], &mut self.second[idx], &flat[idx]);
            for k in 0..theta.len() {
                m[k] = b1 * m[k] + (T::one() - b1) * g[k];
                v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                theta[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            idx += 1;
        });
        Ok(())
    }
}
