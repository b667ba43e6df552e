//! LSTM cell with explicit forward and backward passes.
//!
//! Gate blocks are laid out along the columns of every parameter in the
//! order input, forget, cell, output: columns `[0, k)` hold `i`, `[k, 2k)`
//! hold `f`, `[2k, 3k)` hold `g` and `[3k, 4k)` hold `o`.

use rand::Rng;

use super::params::{join, visit_matrix, visit_vec, Params};
use super::{Matrix, Real, Visitor, VisitorMut};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LstmCell<T> {
    /// `d × 4k` input weights.
    pub w_input: Matrix<T>,
    /// `k × 4k` recurrent weights.
    pub w_recurrent: Matrix<T>,
    /// `4k` gate biases.
    pub bias: Vec<T>,
}

/// Activations cached by one cell step, consumed by [`LstmCell::backward_step`].
#[derive(Clone, Debug)]
pub struct LstmStepTrace<T> {
    x: Matrix<T>,
    h_prev: Option<Matrix<T>>,
    c_prev: Option<Matrix<T>>,
    /// Post-activation gates `[i | f | g | o]`.
    gates: Matrix<T>,
    tanh_c: Matrix<T>,
}

/// Activations cached by [`LstmCell::run_sequence`].
#[derive(Clone, Debug)]
pub struct LstmSequenceTrace<T> {
    x: Matrix<T>,
    gates: Matrix<T>,
    cells: Matrix<T>,
    hidden: Matrix<T>,
}

#[inline]
fn sigmoid<T: Real>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

impl<T: Real> LstmCell<T> {
    /// Uniform `[-1/√k, 1/√k]` weights and biases; forget-gate bias shifted by +1.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden_dim.max(1) as f64).sqrt();
        let mut draw = || T::lit(rng.random_range(-bound..=bound));
        let w_input = Matrix::from_fn(input_dim, 4 * hidden_dim, |_, _| draw());
        let w_recurrent = Matrix::from_fn(hidden_dim, 4 * hidden_dim, |_, _| draw());
        let mut bias: Vec<T> = (0..4 * hidden_dim).map(|_| draw()).collect();
        for b in &mut bias[hidden_dim..2 * hidden_dim] {
            *b += T::one();
        }
        Self {
            w_input,
            w_recurrent,
            bias,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w_input: Matrix::zeros(input_dim, 4 * hidden_dim),
            w_recurrent: Matrix::zeros(hidden_dim, 4 * hidden_dim),
            bias: vec![T::zero(); 4 * hidden_dim],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_recurrent.rows()
    }

    fn check_input(&self, x: &Matrix<T>) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::dims(
                "lstm_cell",
                format!("input {}", x.shape_str()),
                format!("input weights {}", self.w_input.shape_str()),
            ));
        }
        Ok(())
    }

    /// Applies nonlinearities in place to pre-activations `[a_i | a_f | a_g | a_o]`.
    fn activate(&self, pre: &mut Matrix<T>) {
        let k = self.hidden_dim();
        for r in 0..pre.rows() {
            let row = pre.row_mut(r);
            for (j, v) in row.iter_mut().enumerate() {
                *v = if (2 * k..3 * k).contains(&j) {
                    v.tanh()
                } else {
                    sigmoid(*v)
                };
            }
        }
    }

    /// One step over a batch of rows: `x` is `B×d`, `h_prev` and `c_prev` are `B×k`.
    pub fn step(
        &self,
        x: &Matrix<T>,
        h_prev: &Matrix<T>,
        c_prev: &Matrix<T>,
    ) -> Result<(Matrix<T>, Matrix<T>, LstmStepTrace<T>)> {
        self.check_input(x)?;
        let k = self.hidden_dim();
        if h_prev.shape() != (x.rows(), k) || c_prev.shape() != (x.rows(), k) {
            return Err(Error::dims(
                "lstm_cell",
                format!("state {} / {}", h_prev.shape_str(), c_prev.shape_str()),
                format!("expected {}x{k}", x.rows()),
            ));
        }
        let mut pre = x.matmul(&self.w_input)?;
        pre.add_assign(&h_prev.matmul(&self.w_recurrent)?)?;
        pre.add_row_vector(&self.bias)?;
        self.activate(&mut pre);
        let (h, c, tanh_c) = self.combine(&pre, Some(c_prev));
        let trace = LstmStepTrace {
            x: x.clone(),
            h_prev: Some(h_prev.clone()),
            c_prev: Some(c_prev.clone()),
            gates: pre,
            tanh_c,
        };
        Ok((h, c, trace))
    }

    /// One step from zero hidden and cell state. The recurrent weights drop out.
    pub fn step_from_zero(&self, x: &Matrix<T>) -> Result<(Matrix<T>, LstmStepTrace<T>)> {
        self.check_input(x)?;
        let mut pre = x.matmul(&self.w_input)?;
        pre.add_row_vector(&self.bias)?;
        self.activate(&mut pre);
        let (h, _c, tanh_c) = self.combine(&pre, None);
        let trace = LstmStepTrace {
            x: x.clone(),
            h_prev: None,
            c_prev: None,
            gates: pre,
            tanh_c,
        };
        Ok((h, trace))
    }

    fn combine(&self, gates: &Matrix<T>, c_prev: Option<&Matrix<T>>) -> (Matrix<T>, Matrix<T>, Matrix<T>) {
        let k = self.hidden_dim();
        let b = gates.rows();
        let mut h = Matrix::zeros(b, k);
        let mut c = Matrix::zeros(b, k);
        let mut tanh_c = Matrix::zeros(b, k);
        for r in 0..b {
            let gr = gates.row(r);
            for j in 0..k {
                let (i, f, g, o) = (gr[j], gr[k + j], gr[2 * k + j], gr[3 * k + j]);
                let cp = c_prev.map_or(T::zero(), |cp| cp.get(r, j));
                let cv = f * cp + i * g;
                let tc = cv.tanh();
                c.set(r, j, cv);
                tanh_c.set(r, j, tc);
                h.set(r, j, o * tc);
            }
        }
        (h, c, tanh_c)
    }

    /// Gate pre-activation gradients for one step, plus `∂L/∂c_prev`.
    fn gate_grads(
        &self,
        gates: &Matrix<T>,
        tanh_c: &Matrix<T>,
        c_prev: Option<&Matrix<T>>,
        dh: &Matrix<T>,
        dc: Option<&Matrix<T>>,
    ) -> (Matrix<T>, Matrix<T>) {
        let k = self.hidden_dim();
        let b = gates.rows();
        let one = T::one();
        let mut da = Matrix::zeros(b, 4 * k);
        let mut dc_prev = Matrix::zeros(b, k);
        for r in 0..b {
            let gr = gates.row(r);
            for j in 0..k {
                let (i, f, g, o) = (gr[j], gr[k + j], gr[2 * k + j], gr[3 * k + j]);
                let tc = tanh_c.get(r, j);
                let dhv = dh.get(r, j);
                let dct = dc.map_or(T::zero(), |d| d.get(r, j)) + dhv * o * (one - tc * tc);
                let cp = c_prev.map_or(T::zero(), |cp| cp.get(r, j));
                let row = da.row_mut(r);
                row[j] = dct * g * i * (one - i);
                row[k + j] = dct * cp * f * (one - f);
                row[2 * k + j] = dct * i * (one - g * g);
                row[3 * k + j] = dhv * tc * o * (one - o);
                dc_prev.set(r, j, dct * f);
            }
        }
        (da, dc_prev)
    }

    /// Backward through one step. Returns `(∂L/∂x, ∂L/∂h_prev, ∂L/∂c_prev)`;
    /// the state gradients are zero for a step taken from zero state.
    pub fn backward_step(
        &self,
        trace: &LstmStepTrace<T>,
        dh: &Matrix<T>,
        dc: Option<&Matrix<T>>,
        grads: &mut Self,
    ) -> Result<(Matrix<T>, Matrix<T>, Matrix<T>)> {
        let (da, dc_prev) = self.gate_grads(&trace.gates, &trace.tanh_c, trace.c_prev.as_ref(), dh, dc);
        trace.x.accumulate_tn(&da, &mut grads.w_input)?;
        da.accumulate_col_sums(&mut grads.bias);
        let dx = da.matmul_nt(&self.w_input)?;
        let dh_prev = match &trace.h_prev {
            Some(h_prev) => {
                h_prev.accumulate_tn(&da, &mut grads.w_recurrent)?;
                da.matmul_nt(&self.w_recurrent)?
            }
            None => Matrix::zeros(dh.rows(), self.hidden_dim()),
        };
        Ok((dx, dh_prev, dc_prev))
    }

    /// Runs the cell over the rows of `xs` (one row per time step) from zero
    /// state. Returns the `T×k` hidden states.
    pub fn run_sequence(&self, xs: &Matrix<T>) -> Result<(Matrix<T>, LstmSequenceTrace<T>)> {
        self.check_input(xs)?;
        let k = self.hidden_dim();
        let steps = xs.rows();
        let mut gates = xs.matmul(&self.w_input)?;
        gates.add_row_vector(&self.bias)?;
        let mut hidden = Matrix::zeros(steps, k);
        let mut cells = Matrix::zeros(steps, k);
        let mut h = vec![T::zero(); k];
        let mut c = vec![T::zero(); k];
        for t in 0..steps {
            let row = gates.row_mut(t);
            T::gemm(
                1,
                k,
                4 * k,
                T::one(),
                &h,
                false,
                self.w_recurrent.as_slice(),
                false,
                T::one(),
                row,
            );
            for (j, v) in row.iter_mut().enumerate() {
                *v = if (2 * k..3 * k).contains(&j) {
                    v.tanh()
                } else {
                    sigmoid(*v)
                };
            }
            for j in 0..k {
                let (i, f, g, o) = (row[j], row[k + j], row[2 * k + j], row[3 * k + j]);
                c[j] = f * c[j] + i * g;
                h[j] = o * c[j].tanh();
            }
            hidden.row_mut(t).copy_from_slice(&h);
            cells.row_mut(t).copy_from_slice(&c);
        }
        let trace = LstmSequenceTrace {
            x: xs.clone(),
            gates,
            cells,
            hidden: hidden.clone(),
        };
        Ok((hidden, trace))
    }

    /// Backpropagation through time for [`run_sequence`](Self::run_sequence).
    pub fn backward_sequence(
        &self,
        trace: &LstmSequenceTrace<T>,
        d_hidden: &Matrix<T>,
        grads: &mut Self,
    ) -> Result<Matrix<T>> {
        let k = self.hidden_dim();
        let steps = trace.x.rows();
        if d_hidden.shape() != (steps, k) {
            return Err(Error::dims(
                "lstm backward_sequence",
                d_hidden.shape_str(),
                format!("{steps}x{k}"),
            ));
        }
        let one = T::one();
        let mut da = Matrix::zeros(steps, 4 * k);
        let mut dh_next = vec![T::zero(); k];
        let mut dc_next = vec![T::zero(); k];
        for t in (0..steps).rev() {
            let gr = trace.gates.row(t);
            let drow = da.row_mut(t);
            for j in 0..k {
                let (i, f, g, o) = (gr[j], gr[k + j], gr[2 * k + j], gr[3 * k + j]);
                let cv = trace.cells.get(t, j);
                let cp = if t > 0 { trace.cells.get(t - 1, j) } else { T::zero() };
                let tc = cv.tanh();
                let dhv = d_hidden.get(t, j) + dh_next[j];
                let dct = dc_next[j] + dhv * o * (one - tc * tc);
                drow[j] = dct * g * i * (one - i);
                drow[k + j] = dct * cp * f * (one - f);
                drow[2 * k + j] = dct * i * (one - g * g);
                drow[3 * k + j] = dhv * tc * o * (one - o);
                dc_next[j] = dct * f;
            }
            dh_next.fill(T::zero());
            T::gemm(
                1,
                4 * k,
                k,
                one,
                drow,
                false,
                self.w_recurrent.as_slice(),
                true,
                T::zero(),
                &mut dh_next,
            );
        }
        trace.x.accumulate_tn(&da, &mut grads.w_input)?;
        let h_prev = trace.hidden.roll_rows(1);
        let mut h_prev = h_prev;
        if steps > 0 {
            h_prev.row_mut(0).fill(T::zero());
        }
        h_prev.accumulate_tn(&da, &mut grads.w_recurrent)?;
        da.accumulate_col_sums(&mut grads.bias);
        da.matmul_nt(&self.w_input)
    }
}

impl<T: Real> Params<T> for LstmCell<T> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>) {
        visit_matrix(&self.w_input, join(prefix, "w_input"), f);
        visit_matrix(&self.w_recurrent, join(prefix, "w_recurrent"), f);
        visit_vec(&self.bias, join(prefix, "bias"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>) {
        f(&join(prefix, "w_input"), self.w_input.as_mut_slice());
        f(&join(prefix, "w_recurrent"), self.w_recurrent.as_mut_slice());
        f(&join(prefix, "bias"), &mut self.bias);
    }
}
