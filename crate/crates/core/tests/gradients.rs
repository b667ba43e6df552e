//! Finite-difference checks of every hand-written backward pass, in f64.

mod common;

use common::{numeric_gradient, pseudo_random, scalar_names, worst};
use headmotion::model::{
    BatchNorm, GaussianSmoother, LstmBaseline, LstmBaselineConfig, Mlp, ModelConfig, PredictionGrad, ProposedModel,
    SageLayer, SequenceModel,
};
use headmotion::numerics::{
    conv1d_time, conv1d_time_backward, flatten, relu, relu_backward, zeros_like, Dense, LstmCell, Matrix, Params,
};
use headmotion::training::{loss, loss_and_grad};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const OP_TOL: f64 = 1e-4;

fn dot(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

/// Central differences of `f` with respect to each entry of `x`.
fn input_gradient(x: &Matrix<f64>, f: impl Fn(&Matrix<f64>) -> f64) -> Matrix<f64> {
    Matrix::from_fn(x.rows(), x.cols(), |i, j| {
        let mut p = x.clone();
        p.set(i, j, x.get(i, j) + H);
        let up = f(&p);
        p.set(i, j, x.get(i, j) - H);
        (up - f(&p)) / (2.0 * H)
    })
}

fn assert_close(what: &str, analytic: &Matrix<f64>, numeric: &Matrix<f64>, tol: f64) {
    let names: Vec<String> = (0..analytic.as_slice().len()).map(|k| format!("{what}[{k}]")).collect();
    let (err, at) = worst(&names, analytic.as_slice(), numeric.as_slice());
    assert!(err < tol, "{what}: relative error {err:e} at {at}");
}

fn assert_params_close<P: Params<f64>>(what: &str, p: &P, analytic: &P, numeric: &[f64], tol: f64) {
    let (err, at) = worst(&scalar_names(p), &flatten(analytic), numeric);
    assert!(err < tol, "{what}: relative error {err:e} at {at}");
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}

#[test]
fn dense_layer() {
    let layer = Dense::<f64>::init(5, 4, &mut rng());
    let x = pseudo_random(6, 5, 1, 1.0);
    let probe = pseudo_random(6, 4, 2, 1.0);
    let f = |l: &Dense<f64>, x: &Matrix<f64>| dot(&l.forward(x).unwrap(), &probe);
    let mut grads = zeros_like(&layer);
    let dx = layer.backward(&x, &probe, &mut grads).unwrap();
    assert_params_close(
        "dense",
        &layer,
        &grads,
        &numeric_gradient(&layer, H, |l| f(l, &x)),
        OP_TOL,
    );
    assert_close("dense dx", &dx, &input_gradient(&x, |x| f(&layer, x)), OP_TOL);
}

#[test]
fn relu_away_from_kink() {
    let x = pseudo_random(4, 6, 3, 1.0).map(|v| if v.abs() < 0.05 { 0.3 } else { v });
    let probe = pseudo_random(4, 6, 4, 1.0);
    let dx = relu_backward(&x, &probe);
    assert_close("relu", &dx, &input_gradient(&x, |x| dot(&relu(x), &probe)), OP_TOL);
}

#[test]
fn lstm_single_step_with_state() {
    let cell = LstmCell::<f64>::init(3, 4, &mut rng());
    let x = pseudo_random(5, 3, 5, 1.0);
    let h0 = pseudo_random(5, 4, 6, 0.5);
    let c0 = pseudo_random(5, 4, 7, 0.5);
    let (ph, pc) = (pseudo_random(5, 4, 8, 1.0), pseudo_random(5, 4, 9, 1.0));
    let f = |cell: &LstmCell<f64>, x: &Matrix<f64>, h: &Matrix<f64>, c: &Matrix<f64>| {
        let (h1, c1, _) = cell.step(x, h, c).unwrap();
        dot(&h1, &ph) + dot(&c1, &pc)
    };
    let (_, _, trace) = cell.step(&x, &h0, &c0).unwrap();
    let mut grads = zeros_like(&cell);
    let (dx, dh, dc) = cell.backward_step(&trace, &ph, Some(&pc), &mut grads).unwrap();
    let num = numeric_gradient(&cell, H, |cl| f(cl, &x, &h0, &c0));
    assert_params_close("lstm step", &cell, &grads, &num, OP_TOL);
    assert_close("lstm dx", &dx, &input_gradient(&x, |x| f(&cell, x, &h0, &c0)), OP_TOL);
    assert_close("lstm dh", &dh, &input_gradient(&h0, |h| f(&cell, &x, h, &c0)), OP_TOL);
    assert_close("lstm dc", &dc, &input_gradient(&c0, |c| f(&cell, &x, &h0, c)), OP_TOL);
}

#[test]
fn lstm_sequence_bptt() {
    let cell = LstmCell::<f64>::init(3, 4, &mut rng());
    let xs = pseudo_random(7, 3, 10, 1.0);
    let probe = pseudo_random(7, 4, 11, 1.0);
    let f = |cell: &LstmCell<f64>, xs: &Matrix<f64>| dot(&cell.run_sequence(xs).unwrap().0, &probe);
    let (_, trace) = cell.run_sequence(&xs).unwrap();
    let mut grads = zeros_like(&cell);
    let dx = cell.backward_sequence(&trace, &probe, &mut grads).unwrap();
    assert_params_close(
        "bptt",
        &cell,
        &grads,
        &numeric_gradient(&cell, H, |c| f(c, &xs)),
        OP_TOL,
    );
    assert_close("bptt dx", &dx, &input_gradient(&xs, |x| f(&cell, x)), OP_TOL);
}

#[test]
fn temporal_convolution() {
    let series = pseudo_random(9, 3, 12, 1.0);
    let kernels: Vec<Vec<f64>> = (0..3).map(|c| pseudo_random(1, 5, 13 + c, 1.0).into_vec()).collect();
    let probe = pseudo_random(9, 3, 20, 1.0);
    let (ds, dk) = conv1d_time_backward(&series, &kernels, &probe).unwrap();
    assert_close(
        "conv d_series",
        &ds,
        &input_gradient(&series, |s| dot(&conv1d_time(s, &kernels).unwrap(), &probe)),
        OP_TOL,
    );
    let km = Matrix::from_rows(&kernels).unwrap();
    let num = input_gradient(&km, |k| {
        let ks: Vec<Vec<f64>> = (0..3).map(|c| k.row(c).to_vec()).collect();
        dot(&conv1d_time(&series, &ks).unwrap(), &probe)
    });
    assert_close("conv d_kernel", &Matrix::from_rows(&dk).unwrap(), &num, OP_TOL);
}

#[test]
fn sage_layer_with_and_without_aggregator() {
    for lstm in [true, false] {
        let layer = SageLayer::<f64>::init(4, 5, lstm, &mut rng());
        let x = pseudo_random(6, 4, 21, 1.0);
        let probe = pseudo_random(6, 5, 22, 1.0);
        let f = |l: &SageLayer<f64>, x: &Matrix<f64>| dot(&l.forward(x).unwrap().0, &probe);
        let (_, trace) = layer.forward(&x).unwrap();
        let mut grads = zeros_like(&layer);
        let dx = layer.backward(&trace, &probe, &mut grads).unwrap();
        assert_params_close(
            "sage",
            &layer,
            &grads,
            &numeric_gradient(&layer, H, |l| f(l, &x)),
            OP_TOL,
        );
        assert_close("sage dx", &dx, &input_gradient(&x, |x| f(&layer, x)), OP_TOL);
    }
}

#[test]
fn mlp_stack() {
    let mlp = Mlp::<f64>::init(4, &[6, 5, 3], &mut rng());
    let x = pseudo_random(5, 4, 23, 1.0);
    let probe = pseudo_random(5, 3, 24, 1.0);
    let f = |m: &Mlp<f64>, x: &Matrix<f64>| dot(&m.forward(x).unwrap().0, &probe);
    let (_, trace) = mlp.forward(&x).unwrap();
    let mut grads = zeros_like(&mlp);
    let dx = mlp.backward(&trace, &probe, &mut grads).unwrap();
    assert_params_close("mlp", &mlp, &grads, &numeric_gradient(&mlp, H, |m| f(m, &x)), OP_TOL);
    assert_close("mlp dx", &dx, &input_gradient(&x, |x| f(&mlp, x)), OP_TOL);
}

#[test]
fn smoother_width_and_input() {
    let mut s = GaussianSmoother::<f64>::new(3, 1.0, 4);
    s.rho = vec![0.3, 1.1, -0.4];
    let raw = pseudo_random(12, 3, 25, 2.0);
    let probe = pseudo_random(12, 3, 26, 1.0);
    let f = |s: &GaussianSmoother<f64>, r: &Matrix<f64>| dot(&s.forward(r).unwrap(), &probe);
    let mut grads = zeros_like(&s);
    let d_raw = s.backward(&raw, &probe, &mut grads).unwrap();
    assert_params_close("smoother", &s, &grads, &numeric_gradient(&s, H, |s| f(s, &raw)), OP_TOL);
    assert_close("smoother d_raw", &d_raw, &input_gradient(&raw, |r| f(&s, r)), OP_TOL);
}

#[test]
fn batch_norm_training_mode() {
    let mut bn = BatchNorm::<f64>::new(4);
    bn.gamma = vec![1.2, 0.7, -0.5, 1.0];
    bn.beta = vec![0.1, -0.2, 0.3, 0.0];
    let x = pseudo_random(8, 4, 27, 1.5);
    let probe = pseudo_random(8, 4, 28, 1.0);
    let f = |b: &BatchNorm<f64>, x: &Matrix<f64>| dot(&b.forward_train(x).0, &probe);
    let (_, trace) = bn.forward_train(&x);
    let mut grads = zeros_like(&bn);
    let dx = bn.backward(&trace, &probe, &mut grads);
    assert_params_close(
        "batchnorm",
        &bn,
        &grads,
        &numeric_gradient(&bn, H, |b| f(b, &x)),
        OP_TOL,
    );
    assert_close("batchnorm dx", &dx, &input_gradient(&x, |x| f(&bn, x)), OP_TOL);
}

#[test]
fn loss_both_terms() {
    let truth = pseudo_random(6, 3, 29, 2.0);
    let raw = pseudo_random(6, 3, 30, 2.0);
    let smoothed = pseudo_random(6, 3, 31, 2.0);
    for cosine in [true, false] {
        let (_, g) = loss_and_grad(&truth, &raw, &smoothed, cosine).unwrap();
        assert_close(
            "loss d_raw",
            &g.raw,
            &input_gradient(&raw, |r| loss(&truth, r, &smoothed, cosine).unwrap()),
            OP_TOL,
        );
        assert_close(
            "loss d_smoothed",
            &g.smoothed,
            &input_gradient(&smoothed, |s| loss(&truth, &raw, s, cosine).unwrap()),
            OP_TOL,
        );
    }
}

/// Total loss of a batch through the training-mode forward pass.
fn batch_loss<M: SequenceModel<f64>>(model: &M, xs: &[Matrix<f64>], ys: &[Matrix<f64>]) -> f64 {
    let refs: Vec<&Matrix<f64>> = xs.iter().collect();
    let (preds, _) = model.forward_train(&refs).unwrap();
    preds
        .iter()
        .zip(ys)
        .map(|(p, y)| loss(y, &p.raw, &p.smoothed, true).unwrap())
        .sum()
}

fn batch_grad<M: SequenceModel<f64>>(model: &M, xs: &[Matrix<f64>], ys: &[Matrix<f64>]) -> M {
    let refs: Vec<&Matrix<f64>> = xs.iter().collect();
    let (preds, trace) = model.forward_train(&refs).unwrap();
    let grads: Vec<PredictionGrad<f64>> = preds
        .iter()
        .zip(ys)
        .map(|(p, y)| loss_and_grad(y, &p.raw, &p.smoothed, true).unwrap().1)
        .collect();
    model.backward_train(&trace, &grads).unwrap()
}

pub fn tiny_config(output_layer_lstm: bool) -> ModelConfig {
    ModelConfig {
        encoder_graph_dims: vec![8, 8],
        encoder_dense_dims: vec![8],
        decoder_dense_dims: vec![8],
        decoder_graph_dims: vec![8, 3],
        output_layer_lstm,
        ..ModelConfig::new(4)
    }
}

#[test]
fn full_model_every_parameter() {
    for lstm_out in [false, true] {
        let model = ProposedModel::<f64>::new(&tiny_config(lstm_out), 3).unwrap();
        let xs = vec![pseudo_random(5, 4, 32, 1.0), pseudo_random(5, 4, 33, 1.0)];
        let ys = vec![pseudo_random(5, 3, 34, 1.0), pseudo_random(5, 3, 35, 1.0)];
        let analytic = batch_grad(&model, &xs, &ys);
        let numeric = numeric_gradient(&model, H, |m| batch_loss(m, &xs, &ys));
        assert_params_close("proposed", &model, &analytic, &numeric, 1e-3);
    }
}

#[test]
fn lstm_baseline_every_parameter() {
    let config = LstmBaselineConfig {
        encoder_lstm_dim: 6,
        encoder_lstm_layers: 2,
        encoder_dense_dims: vec![7, 5],
        decoder_dense_dims: vec![5, 6],
        ..LstmBaselineConfig::new(4)
    };
    let model = LstmBaseline::<f64>::new(&config, 4).unwrap();
    let xs = vec![pseudo_random(5, 4, 36, 1.0), pseudo_random(6, 4, 37, 1.0)];
    let ys = vec![pseudo_random(5, 3, 38, 1.0), pseudo_random(6, 3, 39, 1.0)];
    let analytic = batch_grad(&model, &xs, &ys);
    let numeric = numeric_gradient(&model, H, |m| batch_loss(m, &xs, &ys));
    assert_params_close("lstm baseline", &model, &analytic, &numeric, 1e-3);
}
