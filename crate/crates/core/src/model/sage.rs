//! Graph convolution over the directed cycle with LSTM neighbour aggregation.
//!
//! Every node has exactly one in-neighbour, so the aggregator is a single LSTM
//! step from zero state over that neighbour's features:
//!
//! ```text
//! n_v   = LSTM(x_{u}),  u = in-neighbour of v
//! out_v = x_v · W_self + n_v · W_neigh + b
//! ```
//!
//! Without an aggregator the message is the neighbour's raw features.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::CycleGraph;
use crate::numerics::{
    join, visit_matrix, visit_vec, Dense, LstmCell, LstmStepTrace, Matrix, Params, Real, Visitor, VisitorMut,
};

#[derive(Clone, Debug)]
pub struct SageLayer<T> {
    pub w_self: Matrix<T>,
    pub w_neigh: Matrix<T>,
    pub bias: Vec<T>,
    /// LSTM with hidden size equal to the input dim.
    pub aggregator: Option<LstmCell<T>>,
}

#[derive(Clone, Debug)]
pub struct SageTrace<T> {
    input: Matrix<T>,
    message: Matrix<T>,
    lstm: Option<LstmStepTrace<T>>,
}

impl<T: Real> SageLayer<T> {
    pub fn init(d_in: usize, d_out: usize, lstm_aggregation: bool, rng: &mut impl Rng) -> Self {
        let w_self = Dense::<T>::init(d_in, d_out, rng).weight;
        let w_neigh = Dense::<T>::init(d_in, d_out, rng).weight;
        let aggregator = lstm_aggregation.then(|| LstmCell::init(d_in, d_in, rng));
        Self {
            w_self,
            w_neigh,
            bias: vec![T::zero(); d_out],
            aggregator,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_self.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w_self.cols()
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<(Matrix<T>, SageTrace<T>)> {
        if x.cols() != self.input_dim() {
            return Err(Error::Config(format!(
                "graph layer expects node features of dim {}, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let (hidden, lstm) = match &self.aggregator {
            Some(cell) => {
                let (h, tr) = cell.step_from_zero(x)?;
                (h, Some(tr))
            }
            None => (x.clone(), None),
        };
        let message = CycleGraph::gather_in_neighbors(&hidden);
        let mut out = x.matmul(&self.w_self)?;
        out.add_assign(&message.matmul(&self.w_neigh)?)?;
        out.add_row_vector(&self.bias)?;
        Ok((
            out,
            SageTrace {
                input: x.clone(),
                message,
                lstm,
            },
        ))
    }

    /// Forward on a graph, checking it carries the expected feature dim.
    pub fn forward_graph(&self, graph: &CycleGraph<T>) -> Result<Matrix<T>> {
        self.forward(graph.node_features()).map(|(out, _)| out)
    }

    pub fn backward(&self, trace: &SageTrace<T>, upstream: &Matrix<T>, grads: &mut Self) -> Result<Matrix<T>> {
        trace.input.accumulate_tn(upstream, &mut grads.w_self)?;
        trace.message.accumulate_tn(upstream, &mut grads.w_neigh)?;
        upstream.accumulate_col_sums(&mut grads.bias);
        let mut dx = upstream.matmul_nt(&self.w_self)?;
        let d_message = upstream.matmul_nt(&self.w_neigh)?;
        let d_hidden = CycleGraph::scatter_to_sources(&d_message);
        match (&self.aggregator, &trace.lstm, grads.aggregator.as_mut()) {
            (Some(cell), Some(tr), Some(g)) => {
                let (d_in, _, _) = cell.backward_step(tr, &d_hidden, None, g)?;
                dx.add_assign(&d_in)?;
            }
            (None, None, None) => dx.add_assign(&d_hidden)?,
            _ => return Err(Error::Config("graph layer trace does not match layer".into())),
        }
        Ok(dx)
    }
}

impl<T: Real> Params<T> for SageLayer<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        visit_matrix(&self.w_self, join(prefix, "w_self"), f);
        visit_matrix(&self.w_neigh, join(prefix, "w_neigh"), f);
        visit_vec(&self.bias, join(prefix, "bias"), f);
        if let Some(cell) = &self.aggregator {
            cell.visit(&join(prefix, "lstm"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        f(&join(prefix, "w_self"), self.w_self.as_mut_slice());
        f(&join(prefix, "w_neigh"), self.w_neigh.as_mut_slice());
        f(&join(prefix, "bias"), &mut self.bias);
        if let Some(cell) = &mut self.aggregator {
            cell.visit_mut(&join(prefix, "lstm"), f);
        }
    }
}
