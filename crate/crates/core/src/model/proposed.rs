//! Graph encoder-decoder with learnable smoothing.
//!
//! ```text
//! speech graph ─ sage(m→128) ─ sage(128→256) ─ dense 384 ─ReLU─ 128 ─ReLU─ 128 = Z
//! Z ─ dense 128 ─ReLU─ 384 ─ReLU─ 128 ─ sage(128→256) ─ sage(256→3) ─ smooth
//! ```
//!
//! Dense layers act per node, so the parameter count does not depend on the
//! number of frames and sequences of any length ≥ 2 are accepted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpTrace};
use super::sage::{SageLayer, SageTrace};
use super::smoother::GaussianSmoother;
use super::{Prediction, PredictionGrad, SequenceModel};
use crate::error::{Error, Result};
use crate::graph::CycleGraph;
use crate::numerics::{accumulate, join, zeros_like, Matrix, Params, Real, Visitor, VisitorMut};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub feature_dim: usize,
    /// Per-node channels appended to the speech features (e.g. arousal/valence).
    #[serde(default)]
    pub extra_feature_dim: usize,
    pub encoder_graph_dims: Vec<usize>,
    pub encoder_dense_dims: Vec<usize>,
    pub decoder_dense_dims: Vec<usize>,
    pub decoder_graph_dims: Vec<usize>,
    pub smoothing_enabled: bool,
    pub cosine_enabled: bool,
    pub smoothing_half_width: usize,
    pub initial_sigma: f64,
    /// Whether the final (3-wide) graph layer aggregates its neighbour through
    /// an LSTM; when false it takes the neighbour's features directly.
    #[serde(default)]
    pub output_layer_lstm: bool,
}

impl ModelConfig {
    pub fn new(feature_dim: usize) -> Self {
        Self {
            feature_dim,
            extra_feature_dim: 0,
            encoder_graph_dims: vec![128, 256],
            encoder_dense_dims: vec![384, 128, 128],
            decoder_dense_dims: vec![128, 384, 128],
            decoder_graph_dims: vec![256, 3],
            smoothing_enabled: true,
            cosine_enabled: true,
            smoothing_half_width: 7,
            initial_sigma: 1.0,
            output_layer_lstm: false,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.feature_dim + self.extra_feature_dim
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = [
            ("encoder_graph_dims", &self.encoder_graph_dims),
            ("encoder_dense_dims", &self.encoder_dense_dims),
            ("decoder_dense_dims", &self.decoder_dense_dims),
            ("decoder_graph_dims", &self.decoder_graph_dims),
        ];
        for (name, dims) in nonempty {
            if dims.is_empty() || dims.contains(&0) {
                return Err(Error::Config(format!(
                    "{name} must be non-empty and positive, got {dims:?}"
                )));
            }
        }
        if self.decoder_graph_dims.last() != Some(&3) {
            return Err(Error::Config(format!(
                "decoder must end in 3 outputs (roll, pitch, yaw), got {:?}",
                self.decoder_graph_dims
            )));
        }
        if self.input_dim() == 0 {
            return Err(Error::Config("feature dim must be positive".into()));
        }
        if self.smoothing_half_width == 0 || !(self.initial_sigma > 0.0) {
            return Err(Error::Config("smoothing half-width and sigma must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ProposedModel<T> {
    pub encoder_graph: Vec<SageLayer<T>>,
    pub encoder_dense: Mlp<T>,
    pub decoder_dense: Mlp<T>,
    pub decoder_graph: Vec<SageLayer<T>>,
    pub smoother: Option<GaussianSmoother<T>>,
}

#[derive(Clone, Debug)]
pub struct ProposedTrace<T> {
    encoder_graph: Vec<SageTrace<T>>,
    encoder_dense: MlpTrace<T>,
    decoder_dense: MlpTrace<T>,
    decoder_graph: Vec<SageTrace<T>>,
    raw: Matrix<T>,
}

impl<T: Real> ProposedModel<T> {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self::init(config, &mut rng))
    }

    fn init(config: &ModelConfig, rng: &mut impl Rng) -> Self {
        let mut d = config.input_dim();
        let mut encoder_graph = Vec::new();
        for &w in &config.encoder_graph_dims {
            encoder_graph.push(SageLayer::init(d, w, true, rng));
            d = w;
        }
        let encoder_dense = Mlp::init(d, &config.encoder_dense_dims, rng);
        d = *config.encoder_dense_dims.last().expect("validated");
        let decoder_dense = Mlp::init(d, &config.decoder_dense_dims, rng);
        d = *config.decoder_dense_dims.last().expect("validated");
        let mut decoder_graph = Vec::new();
        let last = config.decoder_graph_dims.len() - 1;
        for (i, &w) in config.decoder_graph_dims.iter().enumerate() {
            let lstm = i < last || config.output_layer_lstm;
            decoder_graph.push(SageLayer::init(d, w, lstm, rng));
            d = w;
        }
        let smoother = config
            .smoothing_enabled
            .then(|| GaussianSmoother::new(3, config.initial_sigma, config.smoothing_half_width));
        Self {
            encoder_graph,
            encoder_dense,
            decoder_dense,
            decoder_graph,
            smoother,
        }
    }

    /// Speech graph → latent `Z` (`M × P`).
    pub fn encoder_forward(&self, graph: &CycleGraph<T>) -> Result<Matrix<T>> {
        let mut h = graph.node_features().clone();
        for layer in &self.encoder_graph {
            h = layer.forward(&h)?.0;
        }
        Ok(self.encoder_dense.forward(&h)?.0)
    }

    /// Latent `Z` → unsmoothed pose (`M × 3`).
    pub fn decoder_forward(&self, z: &Matrix<T>) -> Result<Matrix<T>> {
        if !z.is_finite() {
            return Err(Error::Input("decoder input contains non-finite values".into()));
        }
        let (mut h, _) = self.decoder_dense.forward(z)?;
        for layer in &self.decoder_graph {
            h = layer.forward(&h)?.0;
        }
        Ok(h)
    }

    pub fn forward_traced(&self, x: &Matrix<T>) -> Result<(Prediction<T>, ProposedTrace<T>)> {
        let mut h = x.clone();
        let mut encoder_graph = Vec::with_capacity(self.encoder_graph.len());
        for layer in &self.encoder_graph {
            let (out, tr) = layer.forward(&h)?;
            encoder_graph.push(tr);
            h = out;
        }
        let (z, encoder_dense) = self.encoder_dense.forward(&h)?;
        let (mut h, decoder_dense) = self.decoder_dense.forward(&z)?;
        let mut decoder_graph = Vec::with_capacity(self.decoder_graph.len());
        for layer in &self.decoder_graph {
            let (out, tr) = layer.forward(&h)?;
            decoder_graph.push(tr);
            h = out;
        }
        let raw = h;
        let smoothed = match &self.smoother {
            Some(s) => s.forward(&raw)?,
            None => raw.clone(),
        };
        let trace = ProposedTrace {
            encoder_graph,
            encoder_dense,
            decoder_dense,
            decoder_graph,
            raw: raw.clone(),
        };
        Ok((Prediction { raw, smoothed }, trace))
    }

    /// Gradients for one sequence, accumulated into `grads`.
    pub fn backward_into(
        &self,
        trace: &ProposedTrace<T>,
        grad: &PredictionGrad<T>,
        grads: &mut Self,
    ) -> Result<Matrix<T>> {
        let mut g = grad.raw.clone();
        match (&self.smoother, grads.smoother.as_mut()) {
            (Some(s), Some(gs)) => g.add_assign(&s.backward(&trace.raw, &grad.smoothed, gs)?)?,
            _ => g.add_assign(&grad.smoothed)?,
        }
        for i in (0..self.decoder_graph.len()).rev() {
            g = self.decoder_graph[i].backward(&trace.decoder_graph[i], &g, &mut grads.decoder_graph[i])?;
        }
        g = self
            .decoder_dense
            .backward(&trace.decoder_dense, &g, &mut grads.decoder_dense)?;
        g = self
            .encoder_dense
            .backward(&trace.encoder_dense, &g, &mut grads.encoder_dense)?;
        for i in (0..self.encoder_graph.len()).rev() {
            g = self.encoder_graph[i].backward(&trace.encoder_graph[i], &g, &mut grads.encoder_graph[i])?;
        }
        Ok(g)
    }
}

impl<T: Real> SequenceModel<T> for ProposedModel<T> {
    type Trace = Vec<ProposedTrace<T>>;

    fn input_dim(&self) -> usize {
        self.encoder_graph[0].input_dim()
    }

    fn predict(&self, x: &Matrix<T>) -> Result<Prediction<T>> {
        CycleGraph::new(x.clone())?;
        self.forward_traced(x).map(|(p, _)| p)
    }

    fn forward_train(&self, batch: &[&Matrix<T>]) -> Result<(Vec<Prediction<T>>, Self::Trace)> {
        let results: Vec<_> = batch
            .par_iter()
            .map(|x| self.forward_traced(x))
            .collect::<Result<_>>()?;
        Ok(results.into_iter().unzip())
    }

    fn backward_train(&self, trace: &Self::Trace, grads: &[PredictionGrad<T>]) -> Result<Self> {
        // Per-sequence gradients are computed in parallel chunks and summed in
        // sequence order so the result does not depend on scheduling.
        let mut total = zeros_like(self);
        let chunk = rayon::current_num_threads().max(1);
        let pairs: Vec<_> = trace.iter().zip(grads).collect();
        for group in pairs.chunks(chunk) {
            let parts: Vec<Self> = group
                .par_iter()
                .map(|(tr, g)| {
                    let mut buf = zeros_like(self);
                    self.backward_into(tr, g, &mut buf).map(|_| buf)
                })
                .collect::<Result<_>>()?;
            for p in &parts {
                accumulate(&mut total, p);
            }
        }
        Ok(total)
    }
}

impl<T: Real> Params<T> for ProposedModel<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        for (i, l) in self.encoder_graph.iter().enumerate() {
            l.visit(&join(prefix, &format!("encoder.sage{i}")), f);
        }
        self.encoder_dense.visit(&join(prefix, "encoder"), f);
        self.decoder_dense.visit(&join(prefix, "decoder"), f);
        for (i, l) in self.decoder_graph.iter().enumerate() {
            l.visit(&join(prefix, &format!("decoder.sage{i}")), f);
        }
        if let Some(s) = &self.smoother {
            s.visit(&join(prefix, "smoother"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        for (i, l) in self.encoder_graph.iter_mut().enumerate() {
            l.visit_mut(&join(prefix, &format!("encoder.sage{i}")), f);
        }
        self.encoder_dense.visit_mut(&join(prefix, "encoder"), f);
        self.decoder_dense.visit_mut(&join(prefix, "decoder"), f);
        for (i, l) in self.decoder_graph.iter_mut().enumerate() {
            l.visit_mut(&join(prefix, &format!("decoder.sage{i}")), f);
        }
        if let Some(s) = &mut self.smoother {
            s.visit_mut(&join(prefix, "smoother"), f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::count_params;

    fn tiny() -> ModelConfig {
        ModelConfig {
            encoder_graph_dims: vec![8, 8],
            encoder_dense_dims: vec![8, 8, 8],
            decoder_dense_dims: vec![8, 8, 8],
            decoder_graph_dims: vec![8, 3],
            ..ModelConfig::new(4)
        }
    }

    fn input(m: usize, d: usize) -> Matrix<f32> {
        Matrix::from_fn(m, d, |i, j| ((i * d + j) as f32 * 0.37).sin())
    }

    #[test]
    fn encoder_latent_is_m_by_128() {
        let model = ProposedModel::<f32>::new(&ModelConfig::new(28), 1).unwrap();
        for m in [2, 5, 31] {
            let z = model.encoder_forward(&CycleGraph::new(input(m, 28)).unwrap()).unwrap();
            assert_eq!(z.shape(), (m, 128));
        }
    }

    #[test]
    fn decoder_emits_three_angles_per_node() {
        let model = ProposedModel::<f32>::new(&ModelConfig::new(28), 2).unwrap();
        for m in [2, 9] {
            let raw = model.decoder_forward(&input(m, 128)).unwrap();
            assert_eq!(raw.shape(), (m, 3));
            assert!(raw.is_finite());
        }
    }

    #[test]
    fn deterministic_forward() {
        let model = ProposedModel::<f32>::new(&tiny(), 3).unwrap();
        let x = input(6, 4);
        assert_eq!(model.predict(&x).unwrap(), model.predict(&x).unwrap());
    }

    #[test]
    fn disabling_smoothing_drops_three_parameters() {
        let on = ProposedModel::<f32>::new(&tiny(), 4).unwrap();
        let off = ProposedModel::<f32>::new(
            &ModelConfig {
                smoothing_enabled: false,
                ..tiny()
            },
            4,
        )
        .unwrap();
        assert_eq!(count_params(&on) - count_params(&off), 3);
        let p = off.predict(&input(7, 4)).unwrap();
        assert_eq!(p.raw, p.smoothed);
    }

    #[test]
    fn rejects_non_pose_output() {
        let cfg = ModelConfig {
            decoder_graph_dims: vec![8, 4],
            ..tiny()
        };
        assert!(matches!(ProposedModel::<f32>::new(&cfg, 0), Err(Error::Config(_))));
    }
}
