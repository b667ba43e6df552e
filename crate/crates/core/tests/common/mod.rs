//! Reference implementations written independently of the library code,
//! used as oracles by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use headmotion::numerics::{Matrix, Params};

pub fn naive_matmul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

/// Deterministic pseudo-random matrix in `[-scale, scale]`.
pub fn pseudo_random(rows: usize, cols: usize, seed: u64, scale: f64) -> Matrix<f64> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    Matrix::from_fn(rows, cols, |_, _| {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let u = (state >> 11) as f64 / (1u64 << 53) as f64;
        scale * (2.0 * u - 1.0)
    })
}

/// Symmetric relative error with a floor on the denominator.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-7)
}

/// Central differences of `f` with respect to every parameter of `p`, in
/// visit order.
pub fn numeric_gradient<P: Params<f64> + Clone>(p: &P, h: f64, f: impl Fn(&P) -> f64) -> Vec<f64> {
    let mut sizes = Vec::new();
    p.visit("", &mut |_, _, d| sizes.push(d.len()));
    let mut out = Vec::new();
    for (t, &len) in sizes.iter().enumerate() {
        for k in 0..len {
            let shifted = |delta: f64| {
                let mut q = p.clone();
                let mut idx = 0;
                q.visit_mut("", &mut |_, d| {
                    if idx == t {
                        d[k] += delta;
                    }
                    idx += 1;
                });
                f(&q)
            };
            out.push((shifted(h) - shifted(-h)) / (2.0 * h));
        }
    }
    out
}

/// Parameter names in visit order, one per scalar.
pub fn scalar_names<P: Params<f64>>(p: &P) -> Vec<String> {
    let mut out = Vec::new();
    p.visit("", &mut |name, _, d| {
        out.extend((0..d.len()).map(|k| format!("{name}[{k}]")))
    });
    out
}

/// Worst relative error between analytic and numeric gradients, with the
/// offending parameter.
pub fn worst(names: &[String], analytic: &[f64], numeric: &[f64]) -> (f64, String) {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .zip(names)
        .map(|((&a, &n), name)| (rel_err(a, n), format!("{name}: analytic {a:e} numeric {n:e}")))
        .fold((0.0, String::new()), |acc, x| if x.0 > acc.0 { x } else { acc })
}

/// HTK mel scale.
fn mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn inv_mel(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Log mel energies of the first analysis frame by brute force: explicit
/// pre-emphasis, periodic Hann window, O(N²) DFT, triangular filters built
/// from the band edges, natural log with a 1e-10 floor.
pub fn direct_log_mel_frame0(samples: &[f32], sr: f64, n: usize, n_mels: usize, f_max: f64) -> Vec<f64> {
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let cur = f64::from(samples[i]);
            let prev = if i == 0 { 0.0 } else { f64::from(samples[i - 1]) };
            (cur - 0.97 * prev) * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        })
        .collect();
    let power: Vec<f64> = (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * i % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            re * re + im * im
        })
        .collect();
    let top = mel(f_max);
    let edge = |i: usize| inv_mel(top * i as f64 / (n_mels + 1) as f64);
    (0..n_mels)
        .map(|m| {
            let (lo, c, hi) = (edge(m), edge(m + 1), edge(m + 2));
            let e: f64 = power
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let f = k as f64 * sr / n as f64;
                    let w = if f > lo && f <= c {
                        (f - lo) / (c - lo)
                    } else if f > c && f < hi {
                        (hi - f) / (hi - c)
                    } else {
                        0.0
                    };
                    w * p
                })
                .sum();
            e.max(1e-10).ln()
        })
        .collect()
}

/// Least squares `min ‖X·w − y‖²` with an intercept, by the normal
/// equations and Gauss-Jordan elimination. Returns `(weights, bias)`.
pub fn least_squares(x: &Matrix<f64>, y: &[f64]) -> (Vec<f64>, f64) {
    let d = x.cols() + 1;
    let mut a = vec![vec![0.0; d + 1]; d];
    for (r, &target) in y.iter().enumerate().take(x.rows()) {
        let row: Vec<f64> = x.row(r).iter().copied().chain(std::iter::once(1.0)).collect();
        for i in 0..d {
            for j in 0..d {
                a[i][j] += row[i] * row[j];
            }
            a[i][d] += row[i] * target;
        }
    }
    for c in 0..d {
        let pivot = (c..d).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, pivot);
        let p = a[c][c];
        for v in a[c].iter_mut() {
            *v /= p;
        }
        for r in 0..d {
            if r != c {
                let f = a[r][c];
                let src = a[c].clone();
                for (v, s) in a[r].iter_mut().zip(src) {
                    *v -= f * s;
                }
            }
        }
    }
    let sol: Vec<f64> = a.iter().map(|row| row[d]).collect();
    (sol[..d - 1].to_vec(), sol[d - 1])
}

/// Total variation of each column, summed.
pub fn total_variation(m: &Matrix<f64>) -> f64 {
    (1..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .zip(m.row(i - 1))
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        })
        .sum()
}
