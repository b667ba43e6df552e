use super::{Matrix, Real};
use crate::error::{Error, Result};

fn check_kernels<T: Real>(series: &Matrix<T>, kernels: &[Vec<T>]) -> Result<usize> {
    if kernels.len() != series.cols() {
        return Err(Error::dims(
            "conv1d_time",
            format!("series {}", series.shape_str()),
            format!("{} kernels", kernels.len()),
        ));
    }
    let len = kernels.first().map_or(1, Vec::len);
    if len.is_multiple_of(2) || kernels.iter().any(|k| k.len() != len) {
        return Err(Error::Config(format!(
            "conv1d_time kernels must share one odd length, got {:?}",
            kernels.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    Ok(len / 2)
}

#[inline]
fn clamp_index(t: usize, j: isize, n: usize) -> usize {
    (t as isize + j).clamp(0, n as isize - 1) as usize
}

/// Per-channel convolution along the time (row) axis with replicate padding:
/// `out[t, ch] = Σ_j kernel_ch[j + K] · series[clamp(t + j), ch]` for `j ∈ [-K, K]`.
pub fn conv1d_time<T: Real>(series: &Matrix<T>, kernels: &[Vec<T>]) -> Result<Matrix<T>> {
    let half = check_kernels(series, kernels)? as isize;
    let n = series.rows();
    let mut out = Matrix::zeros(n, series.cols());
    for (ch, kernel) in kernels.iter().enumerate() {
        for t in 0..n {
            let mut acc = T::zero();
            for (idx, &w) in kernel.iter().enumerate() {
                acc += w * series.get(clamp_index(t, idx as isize - half, n), ch);
            }
            out.set(t, ch, acc);
        }
    }
    Ok(out)
}

/// Returns `(∂L/∂series, ∂L/∂kernels)`. Padding contributions accumulate
/// onto the clamped boundary rows.
pub fn conv1d_time_backward<T: Real>(
    series: &Matrix<T>,
    kernels: &[Vec<T>],
    upstream: &Matrix<T>,
) -> Result<(Matrix<T>, Vec<Vec<T>>)> {
    let half = check_kernels(series, kernels)? as isize;
    if upstream.shape() != series.shape() {
        return Err(Error::dims(
            "conv1d_time_backward",
            series.shape_str(),
            upstream.shape_str(),
        ));
    }
    let n = series.rows();
    let mut d_series = Matrix::zeros(n, series.cols());
    let mut d_kernels: Vec<Vec<T>> = kernels.iter().map(|k| vec![T::zero(); k.len()]).collect();
    for (ch, kernel) in kernels.iter().enumerate() {
        for t in 0..n {
            let up = upstream.get(t, ch);
            for (idx, &w) in kernel.iter().enumerate() {
                let src = clamp_index(t, idx as isize - half, n);
                d_kernels[ch][idx] += up * series.get(src, ch);
                let cur = d_series.get(src, ch);
                d_series.set(src, ch, cur + up * w);
            }
        }
    }
    Ok((d_series, d_kernels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn constant_series_is_preserved() {
        let out = conv1d_time(&column(&[5.0; 4]), &[vec![0.2, 0.5, 0.3]]).unwrap();
        assert!(out.as_slice().iter().all(|&v| (v - 5.0).abs() < 1e-12));
    }

    #[test]
    fn identity_kernel() {
        let s = column(&[1.0, -2.0, 3.0, 0.5]);
        assert_eq!(conv1d_time(&s, &[vec![0.0, 1.0, 0.0]]).unwrap(), s);
    }

    #[test]
    fn hand_convolution() {
        let out = conv1d_time(&column(&[0.0, 0.0, 1.0, 0.0, 0.0]), &[vec![0.25, 0.5, 0.25]]).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 0.25, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn replicate_padding_at_edges() {
        // out[0] = 0.25*s[0] + 0.5*s[0] + 0.25*s[1]
        let out = conv1d_time(&column(&[4.0, 0.0, 0.0]), &[vec![0.25, 0.5, 0.25]]).unwrap();
        assert_eq!(out.get(0, 0), 3.0);
    }

    #[test]
    fn even_kernel_is_a_config_error() {
        let err = conv1d_time(&column(&[1.0, 2.0]), &[vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn per_channel_kernels() {
        let s = Matrix::from_rows(&[[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]]).unwrap();
        let out = conv1d_time(&s, &[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(out.column(0), vec![1.0, 2.0, 3.0]);
        assert_eq!(out.column(1), vec![10.0, 10.0, 20.0]);
    }
}
