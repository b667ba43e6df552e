//! Recurrent encoder-decoder baseline.
//!
//! ```text
//! LSTM(m→256) ─ [BN ReLU dense 384] ─ [BN ReLU dense 128]      (encoder)
//!             ─ [BN ReLU dense 128] ─ [BN ReLU dense 6] ─ BN ReLU LSTM(6→3) ─ smooth
//! ```
//!
//! Batch normalisation uses statistics over every frame of every sequence in
//! a training batch, and stored running statistics at inference.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::smoother::GaussianSmoother;
use super::{Prediction, PredictionGrad, SequenceModel};
use crate::error::{Error, Result};
use crate::numerics::{
    join, relu, relu_backward, visit_vec, zeros_like, Dense, LstmCell, LstmSequenceTrace, Matrix, Params, Real,
    Visitor, VisitorMut,
};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPSILON: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmBaselineConfig {
    pub feature_dim: usize,
    #[serde(default)]
    pub extra_feature_dim: usize,
    pub encoder_lstm_dim: usize,
    /// Stacked encoder LSTM layers.
    pub encoder_lstm_layers: usize,
    pub encoder_dense_dims: Vec<usize>,
    pub decoder_dense_dims: Vec<usize>,
    pub decoder_lstm_dim: usize,
    pub smoothing_enabled: bool,
    pub cosine_enabled: bool,
    pub smoothing_half_width: usize,
    pub initial_sigma: f64,
}

impl LstmBaselineConfig {
    pub fn new(feature_dim: usize) -> Self {
        Self {
            feature_dim,
            extra_feature_dim: 0,
            encoder_lstm_dim: 256,
            encoder_lstm_layers: 1,
            encoder_dense_dims: vec![384, 128],
            decoder_dense_dims: vec![128, 6],
            decoder_lstm_dim: 3,
            smoothing_enabled: true,
            cosine_enabled: true,
            smoothing_half_width: 7,
            initial_sigma: 1.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.feature_dim + self.extra_feature_dim
    }

    fn validate(&self) -> Result<()> {
        if self.decoder_lstm_dim != 3 {
            return Err(Error::Config("LSTM baseline must emit 3 angles".into()));
        }
        if self.encoder_lstm_layers == 0 || self.encoder_lstm_dim == 0 || self.input_dim() == 0 {
            return Err(Error::Config("LSTM baseline dims must be positive".into()));
        }
        if self
            .encoder_dense_dims
            .iter()
            .chain(&self.decoder_dense_dims)
            .any(|&d| d == 0)
        {
            return Err(Error::Config("dense widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct BatchNormTrace<T> {
    normalized: Matrix<T>,
    inv_std: Vec<T>,
    batch_mean: Vec<T>,
    batch_var_unbiased: Vec<T>,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: vec![T::one(); dim],
            beta: vec![T::zero(); dim],
            running_mean: vec![T::zero(); dim],
            running_var: vec![T::one(); dim],
        }
    }

    fn affine(&self, mut xhat: Matrix<T>) -> Matrix<T> {
        for r in 0..xhat.rows() {
            let row = xhat.row_mut(r);
            for ((v, g), b) in row.iter_mut().zip(&self.gamma).zip(&self.beta) {
                *v = *v * *g + *b;
            }
        }
        xhat
    }

    pub fn forward_eval(&self, x: &Matrix<T>) -> Matrix<T> {
        let eps = T::lit(BN_EPSILON);
        let inv: Vec<T> = self.running_var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let xhat = Matrix::from_fn(x.rows(), x.cols(), |r, j| (x.get(r, j) - self.running_mean[j]) * inv[j]);
        self.affine(xhat)
    }

    pub fn forward_train(&self, x: &Matrix<T>) -> (Matrix<T>, BatchNormTrace<T>) {
        let n = x.rows();
        let d = x.cols();
        let nt = T::lit(n as f64);
        let mut mean = vec![T::zero(); d];
        x.accumulate_col_sums(&mut mean);
        mean.iter_mut().for_each(|m| *m /= nt);
        let mut var = vec![T::zero(); d];
        for r in 0..n {
            for (j, v) in var.iter_mut().enumerate() {
                let c = x.get(r, j) - mean[j];
                *v += c * c;
            }
        }
        let eps = T::lit(BN_EPSILON);
        let unbiased: Vec<T> = var
            .iter()
            .map(|&v| if n > 1 { v / T::lit((n - 1) as f64) } else { v })
            .collect();
        var.iter_mut().for_each(|v| *v /= nt);
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let normalized = Matrix::from_fn(n, d, |r, j| (x.get(r, j) - mean[j]) * inv_std[j]);
        let out = self.affine(normalized.clone());
        (
            out,
            BatchNormTrace {
                normalized,
                inv_std,
                batch_mean: mean,
                batch_var_unbiased: unbiased,
            },
        )
    }

    pub fn backward(&self, trace: &BatchNormTrace<T>, upstream: &Matrix<T>, grads: &mut Self) -> Matrix<T> {
        let n = upstream.rows();
        let d = upstream.cols();
        let nt = T::lit(n as f64);
        let mut sum_dxhat = vec![T::zero(); d];
        let mut sum_dxhat_xhat = vec![T::zero(); d];
        for r in 0..n {
            for j in 0..d {
                let dy = upstream.get(r, j);
                let xh = trace.normalized.get(r, j);
                grads.gamma[j] += dy * xh;
                grads.beta[j] += dy;
                let dxh = dy * self.gamma[j];
                sum_dxhat[j] += dxh;
                sum_dxhat_xhat[j] += dxh * xh;
            }
        }
        Matrix::from_fn(n, d, |r, j| {
            let dxh = upstream.get(r, j) * self.gamma[j];
            trace.inv_std[j] / nt * (nt * dxh - sum_dxhat[j] - trace.normalized.get(r, j) * sum_dxhat_xhat[j])
        })
    }

    pub fn update_running(&mut self, trace: &BatchNormTrace<T>) {
        let m = T::lit(BN_MOMENTUM);
        let keep = T::one() - m;
        for j in 0..self.gamma.len() {
            self.running_mean[j] = keep * self.running_mean[j] + m * trace.batch_mean[j];
            self.running_var[j] = keep * self.running_var[j] + m * trace.batch_var_unbiased[j];
        }
    }
}

impl<T: Real> Params<T> for BatchNorm<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        visit_vec(&self.gamma, join(prefix, "gamma"), f);
        visit_vec(&self.beta, join(prefix, "beta"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        f(&join(prefix, "gamma"), &mut self.gamma);
        f(&join(prefix, "beta"), &mut self.beta);
    }

    fn visit_buffers(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        visit_vec(&self.running_mean, join(prefix, "running_mean"), f);
        visit_vec(&self.running_var, join(prefix, "running_var"), f);
    }

    fn visit_buffers_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        f(&join(prefix, "running_mean"), &mut self.running_mean);
        f(&join(prefix, "running_var"), &mut self.running_var);
    }
}

#[derive(Clone, Debug)]
pub struct LstmBaseline<T> {
    pub encoder_lstm: Vec<LstmCell<T>>,
    /// One norm per dense layer input, plus one before the output LSTM.
    pub norms: Vec<BatchNorm<T>>,
    pub dense: Vec<Dense<T>>,
    pub decoder_lstm: LstmCell<T>,
    pub smoother: Option<GaussianSmoother<T>>,
}

#[derive(Clone, Debug)]
pub struct LstmBaselineTrace<T> {
    lengths: Vec<usize>,
    encoder: Vec<Vec<LstmSequenceTrace<T>>>,
    norms: Vec<BatchNormTrace<T>>,
    /// BN outputs (pre-ReLU) for each normalised stage.
    normed: Vec<Matrix<T>>,
    /// Post-ReLU inputs to each dense layer.
    dense_inputs: Vec<Matrix<T>>,
    decoder: Vec<LstmSequenceTrace<T>>,
    raw: Vec<Matrix<T>>,
}

impl<T: Real> LstmBaseline<T> {
    pub fn new(config: &LstmBaselineConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = config.input_dim();
        let mut encoder_lstm = Vec::new();
        for _ in 0..config.encoder_lstm_layers {
            encoder_lstm.push(LstmCell::init(d, config.encoder_lstm_dim, &mut rng));
            d = config.encoder_lstm_dim;
        }
        let mut norms = Vec::new();
        let mut dense = Vec::new();
        for &w in config.encoder_dense_dims.iter().chain(&config.decoder_dense_dims) {
            norms.push(BatchNorm::new(d));
            dense.push(Dense::init(d, w, &mut rng));
            d = w;
        }
        norms.push(BatchNorm::new(d));
        let decoder_lstm = LstmCell::init(d, config.decoder_lstm_dim, &mut rng);
        let smoother = config
            .smoothing_enabled
            .then(|| GaussianSmoother::new(3, config.initial_sigma, config.smoothing_half_width));
        Ok(Self {
            encoder_lstm,
            norms,
            dense,
            decoder_lstm,
            smoother,
        })
    }

    fn encode(&self, x: &Matrix<T>) -> Result<(Matrix<T>, Vec<LstmSequenceTrace<T>>)> {
        let mut h = x.clone();
        let mut traces = Vec::with_capacity(self.encoder_lstm.len());
        for cell in &self.encoder_lstm {
            let (out, tr) = cell.run_sequence(&h)?;
            traces.push(tr);
            h = out;
        }
        Ok((h, traces))
    }

    fn finish(&self, raw: Matrix<T>) -> Result<Prediction<T>> {
        let smoothed = match &self.smoother {
            Some(s) => s.forward(&raw)?,
            None => raw.clone(),
        };
        Ok(Prediction { raw, smoothed })
    }
}

impl<T: Real> SequenceModel<T> for LstmBaseline<T> {
    type Trace = LstmBaselineTrace<T>;

    fn input_dim(&self) -> usize {
        self.encoder_lstm[0].input_dim()
    }

    fn predict(&self, x: &Matrix<T>) -> Result<Prediction<T>> {
        let (mut h, _) = self.encode(x)?;
        for (bn, layer) in self.norms.iter().zip(&self.dense) {
            h = layer.forward(&relu(&bn.forward_eval(&h)))?;
        }
        let last = self.norms.last().expect("at least one norm");
        let (raw, _) = self.decoder_lstm.run_sequence(&relu(&last.forward_eval(&h)))?;
        self.finish(raw)
    }

    fn forward_train(&self, batch: &[&Matrix<T>]) -> Result<(Vec<Prediction<T>>, Self::Trace)> {
        let encoded: Vec<_> = batch.par_iter().map(|x| self.encode(x)).collect::<Result<_>>()?;
        let lengths: Vec<usize> = batch.iter().map(|x| x.rows()).collect();
        let (hs, encoder): (Vec<_>, Vec<_>) = encoded.into_iter().unzip();
        let mut h = Matrix::vcat(&hs.iter().collect::<Vec<_>>())?;
        let mut norms = Vec::new();
        let mut normed = Vec::new();
        let mut dense_inputs = Vec::new();
        for (bn, layer) in self.norms.iter().zip(&self.dense) {
            let (z, tr) = bn.forward_train(&h);
            let a = relu(&z);
            h = layer.forward(&a)?;
            norms.push(tr);
            normed.push(z);
            dense_inputs.push(a);
        }
        let (z, tr) = self.norms.last().expect("at least one norm").forward_train(&h);
        let a = relu(&z);
        norms.push(tr);
        normed.push(z);

        let mut offset = 0;
        let mut decoder = Vec::with_capacity(batch.len());
        let mut raw = Vec::with_capacity(batch.len());
        let mut preds = Vec::with_capacity(batch.len());
        for &len in &lengths {
            let (r, tr) = self.decoder_lstm.run_sequence(&a.slice_rows(offset, offset + len))?;
            offset += len;
            preds.push(self.finish(r.clone())?);
            decoder.push(tr);
            raw.push(r);
        }
        Ok((
            preds,
            LstmBaselineTrace {
                lengths,
                encoder,
                norms,
                normed,
                dense_inputs,
                decoder,
                raw,
            },
        ))
    }

    fn backward_train(&self, trace: &Self::Trace, grads: &[PredictionGrad<T>]) -> Result<Self> {
        let mut out = zeros_like(self);
        let mut d_parts = Vec::with_capacity(grads.len());
        for (i, g) in grads.iter().enumerate() {
            let mut d_raw = g.raw.clone();
            match (&self.smoother, out.smoother.as_mut()) {
                (Some(s), Some(gs)) => d_raw.add_assign(&s.backward(&trace.raw[i], &g.smoothed, gs)?)?,
                _ => d_raw.add_assign(&g.smoothed)?,
            }
            d_parts.push(
                self.decoder_lstm
                    .backward_sequence(&trace.decoder[i], &d_raw, &mut out.decoder_lstm)?,
            );
        }
        let mut g = Matrix::vcat(&d_parts.iter().collect::<Vec<_>>())?;
        let stages = self.dense.len();
        g = relu_backward(&trace.normed[stages], &g);
        g = self.norms[stages].backward(&trace.norms[stages], &g, &mut out.norms[stages]);
        for i in (0..stages).rev() {
            g = self.dense[i].backward(&trace.dense_inputs[i], &g, &mut out.dense[i])?;
            g = relu_backward(&trace.normed[i], &g);
            g = self.norms[i].backward(&trace.norms[i], &g, &mut out.norms[i]);
        }
        let mut offset = 0;
        for (s, &len) in trace.lengths.iter().enumerate() {
            let mut d = g.slice_rows(offset, offset + len);
            offset += len;
            for l in (0..self.encoder_lstm.len()).rev() {
                d = self.encoder_lstm[l].backward_sequence(&trace.encoder[s][l], &d, &mut out.encoder_lstm[l])?;
            }
        }
        Ok(out)
    }

    fn commit_batch(&mut self, trace: &Self::Trace) {
        for (bn, tr) in self.norms.iter_mut().zip(&trace.norms) {
            bn.update_running(tr);
        }
    }
}

impl<T: Real> Params<T> for LstmBaseline<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        for (i, c) in self.encoder_lstm.iter().enumerate() {
            c.visit(&join(prefix, &format!("encoder.lstm{i}")), f);
        }
        for (i, (bn, d)) in self.norms.iter().zip(&self.dense).enumerate() {
            bn.visit(&join(prefix, &format!("bn{i}")), f);
            d.visit(&join(prefix, &format!("dense{i}")), f);
        }
        self.norms
            .last()
            .expect("at least one norm")
            .visit(&join(prefix, &format!("bn{}", self.dense.len())), f);
        self.decoder_lstm.visit(&join(prefix, "decoder.lstm"), f);
        if let Some(s) = &self.smoother {
            s.visit(&join(prefix, "smoother"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        for (i, c) in self.encoder_lstm.iter_mut().enumerate() {
            c.visit_mut(&join(prefix, &format!("encoder.lstm{i}")), f);
        }
        let stages = self.dense.len();
        for (i, (bn, d)) in self.norms.iter_mut().zip(self.dense.iter_mut()).enumerate() {
            bn.visit_mut(&join(prefix, &format!("bn{i}")), f);
            d.visit_mut(&join(prefix, &format!("dense{i}")), f);
        }
        self.norms
            .last_mut()
            .expect("at least one norm")
            .visit_mut(&join(prefix, &format!("bn{stages}")), f);
        self.decoder_lstm.visit_mut(&join(prefix, "decoder.lstm"), f);
        if let Some(s) = &mut self.smoother {
            s.visit_mut(&join(prefix, "smoother"), f);
        }
    }

    fn visit_buffers(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        for (i, bn) in self.norms.iter().enumerate() {
            bn.visit_buffers(&join(prefix, &format!("bn{i}")), f);
        }
    }

    fn visit_buffers_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        for (i, bn) in self.norms.iter_mut().enumerate() {
            bn.visit_buffers_mut(&join(prefix, &format!("bn{i}")), f);
        }
    }
}
