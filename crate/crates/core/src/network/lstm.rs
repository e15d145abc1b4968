use alloc::vec;

use crate::error::{check_len, Result};
use crate::matrix::Matrix;

use super::LstmParams;

/// Which way a recurrence walks the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    #[inline]
    fn time(self, step: usize, len: usize) -> usize {
        match self {
            Direction::Forward => step,
            Direction::Backward => len - 1 - step,
        }
    }
}

/// Activations of one recurrence, indexed by processing step.
///
/// Gate columns are laid out `[input | forget | candidate | output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    pub(crate) direction: Direction,
    pub(crate) gates: Matrix,
    pub(crate) cells: Matrix,
    pub(crate) tanh_cells: Matrix,
    pub(crate) hidden: Matrix,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    crate::loss::sigmoid(x)
}

/// Runs the recurrence over every row of `x` (including padding rows) from a
/// zero state. Returns hidden states in original time order.
pub fn lstm_forward(params: &LstmParams, x: &Matrix, direction: Direction) -> Result<(Matrix, LstmCache)> {
    let units = params.units();
    check_len("lstm input width", params.w_in.rows(), x.cols())?;
    let len = x.rows();
    let mut gates = Matrix::zeros(len, 4 * units);
    let mut cells = Matrix::zeros(len, units);
    let mut tanh_cells = Matrix::zeros(len, units);
    let mut hidden = Matrix::zeros(len, units);
    let mut out = Matrix::zeros(len, units);
    let mut z = vec![0.0; 4 * units];
    for step in 0..len {
        let t = direction.time(step, len);
        z.copy_from_slice(&params.bias);
        params.w_in.accumulate_vec_mul(x.row(t), &mut z);
        if step > 0 {
            params.w_rec.accumulate_vec_mul(hidden.row(step - 1), &mut z);
        }
        let g = gates.row_mut(step);
        for k in 0..units {
            g[k] = sigmoid(z[k]);
            g[units + k] = sigmoid(z[units + k]);
            g[2 * units + k] = libm::tanh(z[2 * units + k]);
            g[3 * units + k] = sigmoid(z[3 * units + k]);
        }
        for k in 0..units {
            let c_prev = if step > 0 { cells.get(step - 1, k) } else { 0.0 };
            let c = gates.get(step, units + k) * c_prev + gates.get(step, k) * gates.get(step, 2 * units + k);
            let tc = libm::tanh(c);
            let h = gates.get(step, 3 * units + k) * tc;
            cells.set(step, k, c);
            tanh_cells.set(step, k, tc);
            hidden.set(step, k, h);
            out.set(t, k, h);
        }
    }
    Ok((out, LstmCache { direction, gates, cells, tanh_cells, hidden }))
}

/// Backpropagates `d_hidden` (time order) through a recorded recurrence,
/// accumulating parameter gradients into `grads`.
pub fn lstm_backward(
    params: &LstmParams,
    cache: &LstmCache,
    x: &Matrix,
    d_hidden: &Matrix,
    grads: &mut LstmParams,
) -> Result<()> {
    let units = params.units();
    let len = x.rows();
    check_len("lstm cache length", len, cache.hidden.rows())?;
    check_len("lstm gradient length", len, d_hidden.rows())?;
    check_len("lstm gradient width", units, d_hidden.cols())?;
    let mut dh_next = vec![0.0; units];
    let mut dc_next = vec![0.0; units];
    let mut dz = vec![0.0; 4 * units];
    let zeros = vec![0.0; units];
    for step in (0..len).rev() {
        let t = cache.direction.time(step, len);
        let g = cache.gates.row(step);
        let (c_prev, h_prev) = if step > 0 {
            (cache.cells.row(step - 1), cache.hidden.row(step - 1))
        } else {
            (&zeros[..], &zeros[..])
        };
        for k in 0..units {
            let (i, f, cand, o) = (g[k], g[units + k], g[2 * units + k], g[3 * units + k]);
            let tc = cache.tanh_cells.get(step, k);
            let dh = d_hidden.get(t, k) + dh_next[k];
            let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            dz[k] = dc * cand * i * (1.0 - i);
            dz[units + k] = dc * c_prev[k] * f * (1.0 - f);
            dz[2 * units + k] = dc * i * (1.0 - cand * cand);
            dz[3 * units + k] = dh * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        for (b, d) in grads.bias.iter_mut().zip(&dz) {
            *b += d;
        }
        grads.w_in.add_outer(x.row(t), &dz);
        dh_next.iter_mut().for_each(|d| *d = 0.0);
        if step > 0 {
            grads.w_rec.add_outer(h_prev, &dz);
            params.w_rec.accumulate_mul_vec(&dz, &mut dh_next);
        }
    }
    Ok(())
}
