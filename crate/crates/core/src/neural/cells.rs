//! Recurrent cells as plain functions and as tape subgraphs.
//!
//! Gate blocks in the fused LSTM matrices are ordered input, forget, cell,
//! output.

use ndcore::functional::sigmoid_scalar;
use ndcore::{Tape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elman cell with a logistic hidden nonlinearity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnnCellParams {
    /// `input x hidden`
    pub w_xh: Tensor,
    /// `hidden x hidden`
    pub w_hh: Tensor,
    /// `hidden x output`
    pub w_hy: Tensor,
    pub b_h: Tensor,
    pub b_y: Tensor,
}

impl RnnCellParams {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            w_xh: Tensor::zeros(&[input, hidden]),
            w_hh: Tensor::zeros(&[hidden, hidden]),
            w_hy: Tensor::zeros(&[hidden, output]),
            b_h: Tensor::zeros(&[hidden]),
            b_y: Tensor::zeros(&[output]),
        }
    }

    pub fn random<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, scale: f64, rng: &mut R) -> Self {
        Self {
            w_xh: Tensor::uniform(&[input, hidden], -scale, scale, rng),
            w_hh: Tensor::uniform(&[hidden, hidden], -scale, scale, rng),
            w_hy: Tensor::uniform(&[hidden, output], -scale, scale, rng),
            b_h: Tensor::uniform(&[hidden], -scale, scale, rng),
            b_y: Tensor::uniform(&[output], -scale, scale, rng),
        }
    }

    pub fn tensors(&self) -> Vec<Tensor> {
        vec![self.w_xh.clone(), self.w_hh.clone(), self.w_hy.clone(), self.b_h.clone(), self.b_y.clone()]
    }
}

fn shape_error(expected: usize, got: usize) -> Error {
    Error::DimensionMismatch { expected, got }
}

/// `x (1 x n) . w (n x m) + b`.
fn affine(x: &[f64], w: &Tensor, b: Option<&[f64]>) -> Vec<f64> {
    let (n, m) = (w.rows(), w.cols());
    let mut out = b.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; m]);
    for i in 0..n {
        let xi = x[i];
        for (o, wij) in out.iter_mut().zip(w.row(i)) {
            *o += xi * wij;
        }
    }
    out
}

/// One step: `h = sigmoid(x W_xh + h_prev W_hh + b_h)`, `y = h W_hy + b_y`.
pub fn rnn_step(p: &RnnCellParams, x: &[f64], h_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != p.w_xh.rows() {
        return Err(shape_error(p.w_xh.rows(), x.len()));
    }
    if h_prev.len() != p.w_hh.rows() {
        return Err(shape_error(p.w_hh.rows(), h_prev.len()));
    }
    let a = affine(x, &p.w_xh, Some(p.b_h.data()));
    let r = affine(h_prev, &p.w_hh, None);
    let h: Vec<f64> = a.iter().zip(&r).map(|(u, v)| sigmoid_scalar(u + v)).collect();
    let y = affine(&h, &p.w_hy, Some(p.b_y.data()));
    Ok((h, y))
}

/// LSTM with diagonal peepholes, in fused form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    /// `input x 4H`
    pub w_x: Tensor,
    /// `H x 4H`
    pub w_h: Tensor,
    /// `4H`
    pub b: Tensor,
    pub w_ci: Tensor,
    pub w_cf: Tensor,
    pub w_co: Tensor,
}

impl LstmCellParams {
    pub fn zeros(input: usize, units: usize) -> Self {
        Self {
            w_x: Tensor::zeros(&[input, 4 * units]),
            w_h: Tensor::zeros(&[units, 4 * units]),
            b: Tensor::zeros(&[4 * units]),
            w_ci: Tensor::zeros(&[units]),
            w_cf: Tensor::zeros(&[units]),
            w_co: Tensor::zeros(&[units]),
        }
    }

    pub fn random<R: Rng + ?Sized>(input: usize, units: usize, scale: f64, rng: &mut R) -> Self {
        Self {
            w_x: Tensor::uniform(&[input, 4 * units], -scale, scale, rng),
            w_h: Tensor::uniform(&[units, 4 * units], -scale, scale, rng),
            b: Tensor::uniform(&[4 * units], -scale, scale, rng),
            w_ci: Tensor::uniform(&[units], -scale, scale, rng),
            w_cf: Tensor::uniform(&[units], -scale, scale, rng),
            w_co: Tensor::uniform(&[units], -scale, scale, rng),
        }
    }

    pub fn units(&self) -> usize {
        self.w_h.rows()
    }

    pub fn tensors(&self) -> Vec<Tensor> {
        vec![
            self.w_x.clone(),
            self.w_h.clone(),
            self.b.clone(),
            self.w_ci.clone(),
            self.w_cf.clone(),
            self.w_co.clone(),
        ]
    }
}

/// One step of the peephole LSTM. Input and forget gates read `c_prev`, the
/// output gate reads the new cell.
pub fn lstm_step(p: &LstmCellParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let hn = p.units();
    if x.len() != p.w_x.rows() {
        return Err(shape_error(p.w_x.rows(), x.len()));
    }
    if h_prev.len() != hn || c_prev.len() != hn {
        return Err(shape_error(hn, h_prev.len().min(c_prev.len())));
    }
    let a = affine(x, &p.w_x, Some(p.b.data()));
    let r = affine(h_prev, &p.w_h, None);
    let z: Vec<f64> = a.iter().zip(&r).map(|(u, v)| u + v).collect();
    let mut h = vec![0.0; hn];
    let mut c = vec![0.0; hn];
    for j in 0..hn {
        let i = sigmoid_scalar(z[j] + p.w_ci.data()[j] * c_prev[j]);
        let f = sigmoid_scalar(z[hn + j] + p.w_cf.data()[j] * c_prev[j]);
        let g = z[2 * hn + j].tanh();
        c[j] = f * c_prev[j] + i * g;
        let o = sigmoid_scalar(z[3 * hn + j] + p.w_co.data()[j] * c[j]);
        h[j] = o * c[j].tanh();
    }
    Ok((h, c))
}

/// Vars of one LSTM cell on a tape. `peepholes` is `[w_ci, w_cf, w_co]`.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub w_h: Var,
    pub peepholes: Option<[Var; 3]>,
    pub units: usize,
}

/// Tape step given the already projected input `xw = x W_x + b` (`B x 4H`).
/// `rec_mask` is a fixed dropout mask applied to `h_prev` before `W_h`.
pub fn lstm_step_tape(
    tape: &mut Tape<'_>,
    cell: &LstmVars,
    xw: Var,
    h_prev: Var,
    c_prev: Var,
    rec_mask: Option<&Tensor>,
) -> Result<(Var, Var)> {
    let hn = cell.units;
    let h_in = match rec_mask {
        Some(m) => tape.mul_const(h_prev, m.clone())?,
        None => h_prev,
    };
    let rec = tape.matmul(h_in, cell.w_h)?;
    let z = tape.add(xw, rec)?;
    let zi = tape.slice_cols(z, 0, hn)?;
    let zf = tape.slice_cols(z, hn, hn)?;
    let zc = tape.slice_cols(z, 2 * hn, hn)?;
    let zo = tape.slice_cols(z, 3 * hn, hn)?;
    let (zi, zf) = match cell.peepholes {
        Some([ci, cf, _]) => {
            let pi = tape.mul_row(c_prev, ci)?;
            let pf = tape.mul_row(c_prev, cf)?;
            (tape.add(zi, pi)?, tape.add(zf, pf)?)
        }
        None => (zi, zf),
    };
    let i = tape.sigmoid(zi);
    let f = tape.sigmoid(zf);
    let g = tape.tanh(zc);
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let zo = match cell.peepholes {
        Some([_, _, co]) => {
            let po = tape.mul_row(c, co)?;
            tape.add(zo, po)?
        }
        None => zo,
    };
    let o = tape.sigmoid(zo);
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// Full LSTM step on a tape with every parameter as a Var.
#[allow(clippy::too_many_arguments)]
pub fn lstm_step_tape_full(
    tape: &mut Tape<'_>,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    w_x: Var,
    w_h: Var,
    b: Var,
    peepholes: [Var; 3],
) -> Result<(Var, Var)> {
    let units = tape.value(w_h).rows();
    let xw = tape.matmul(x, w_x)?;
    let xw = tape.add_row(xw, b)?;
    let cell = LstmVars {
        w_h,
        peepholes: Some(peepholes),
        units,
    };
    lstm_step_tape(tape, &cell, xw, h_prev, c_prev, None)
}

/// Elman step on a tape; returns `(h, y)`.
#[allow(clippy::too_many_arguments)]
pub fn rnn_step_tape(
    tape: &mut Tape<'_>,
    x: Var,
    h_prev: Var,
    w_xh: Var,
    w_hh: Var,
    w_hy: Var,
    b_h: Var,
    b_y: Var,
) -> Result<(Var, Var)> {
    let a = tape.matmul(x, w_xh)?;
    let r = tape.matmul(h_prev, w_hh)?;
    let s = tape.add(a, r)?;
    let s = tape.add_row(s, b_h)?;
    let h = tape.sigmoid(s);
    let y = tape.matmul(h, w_hy)?;
    let y = tape.add_row(y, b_y)?;
    Ok((h, y))
}
