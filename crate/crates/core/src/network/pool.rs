use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Number of valid (unpadded) windows along an axis of length `len`.
pub fn pooled_len(len: usize, pool: usize, stride: usize) -> Result<usize> {
    if pool == 0 || stride == 0 {
        return Err(Error::InvalidConfig("pool size and stride must be positive".into()));
    }
    if len < pool {
        return Err(Error::InvalidConfig(alloc::format!("sequence length {len} shorter than pool size {pool}")));
    }
    Ok((len - pool) / stride + 1)
}

/// Averages windows of `pool` consecutive rows, stepping by `stride`, for
/// every column independently.
pub fn avg_pool(input: &Matrix, pool: usize, stride: usize) -> Result<Matrix> {
    let out_len = pooled_len(input.rows(), pool, stride)?;
    let scale = 1.0 / pool as f64;
    let mut out = Matrix::zeros(out_len, input.cols());
    for i in 0..out_len {
        let row = out.row_mut(i);
        for r in i * stride..i * stride + pool {
            for (o, &x) in row.iter_mut().zip(input.row(r)) {
                *o += x;
            }
        }
        row.iter_mut().for_each(|o| *o *= scale);
    }
    Ok(out)
}

/// Gradient of [`avg_pool`]: each output gradient spreads uniformly over its window.
pub fn avg_pool_backward(d_out: &Matrix, input_len: usize, pool: usize, stride: usize) -> Result<Matrix> {
    let out_len = pooled_len(input_len, pool, stride)?;
    crate::error::check_len("pooled rows", out_len, d_out.rows())?;
    let scale = 1.0 / pool as f64;
    let mut d_in = Matrix::zeros(input_len, d_out.cols());
    for i in 0..out_len {
        for r in i * stride..i * stride + pool {
            for (d, &g) in d_in.row_mut(r).iter_mut().zip(d_out.row(i)) {
                *d += g * scale;
            }
        }
    }
    Ok(d_in)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_configuration_gives_eleven_windows() {
        assert_eq!(pooled_len(100, 80, 2).unwrap(), 11);
        assert!(pooled_len(79, 80, 2).is_err());
        assert!(pooled_len(10, 0, 2).is_err());
    }

    #[test]
    fn ramp_and_constant() {
        let ramp = Matrix::from_fn(100, 1, |r, _| (r + 1) as f64);
        let out = avg_pool(&ramp, 80, 2).unwrap();
        assert_eq!(out.rows(), 11);
        assert_eq!(out.get(0, 0), 40.5);
        assert_eq!(out.get(10, 0), 60.5);
        let flat = Matrix::from_fn(7, 3, |_, _| 0.25);
        let out = avg_pool(&flat, 3, 2).unwrap();
        assert_eq!(out.rows(), 3);
        assert!(out.as_slice().iter().all(|&x| x == 0.25));
    }

    #[test]
    fn backward_is_adjoint() {
        // <pool(x), g> == <x, pool_backward(g)>
        let x = Matrix::from_fn(9, 2, |r, c| (r * 3 + c) as f64 * 0.1 - 0.4);
        let y = avg_pool(&x, 4, 2).unwrap();
        let g = Matrix::from_fn(y.rows(), 2, |r, c| (r as f64 - c as f64) * 0.3);
        let lhs: f64 = y.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum();
        let dx = avg_pool_backward(&g, 9, 4, 2).unwrap();
        let rhs: f64 = x.as_slice().iter().zip(dx.as_slice()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
