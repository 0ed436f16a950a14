//! Tape-free versions of the activations and losses. The tape ops call into
//! these for their forward values.

use rand::Rng;

use crate::error::{NdError, Result};
use crate::tensor::Tensor;

/// Probabilities are floored at this value before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(f64::tanh)
}

/// Max-subtracted softmax of a single slice, written into `out`.
pub fn softmax_slice(x: &[f64], out: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Softmax along `axis` of a rank-1 or rank-2 tensor. For rank 1 only axis 0
/// is valid; for rank 2, axis 1 normalises each row and axis 0 each column.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    let rank = x.rank();
    let (rows, cols) = x.dims2()?;
    let row_wise = match (rank, axis) {
        (0, 0) | (1, 0) | (2, 1) => true,
        (2, 0) => false,
        _ => return Err(NdError::InvalidAxis { axis, rank }),
    };
    let mut out = Tensor::zeros(x.shape());
    if row_wise {
        for r in 0..rows {
            softmax_slice(x.row(r), out.row_mut(r));
        }
    } else {
        let t = x.transpose()?;
        let mut tmp = Tensor::zeros(t.shape());
        for c in 0..cols {
            softmax_slice(t.row(c), tmp.row_mut(c));
        }
        out = tmp.transpose()?.reshape(x.shape().to_vec())?;
    }
    Ok(out)
}

/// Categorical cross-entropy `-sum_o sum_c y ln p`, averaged over the rows
/// (observations).
pub fn cross_entropy(pred: &Tensor, target: &Tensor) -> Result<f64> {
    pred.check_same_shape(target, "cross_entropy")?;
    let (rows, _) = pred.dims2()?;
    let total: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .filter(|(_, &y)| y != 0.0)
        .map(|(&p, &y)| -y * if p < PROB_FLOOR { PROB_FLOOR.ln() } else { p.ln() })
        .sum();
    Ok(total / rows.max(1) as f64)
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(shape: &[usize], rate: f64, rng: &mut R) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NdError::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    let keep = 1.0 / (1.0 - rate);
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    Tensor::new(shape.to_vec(), data)
}

/// Dropout in training mode zeroes entries with probability `rate` and scales
/// survivors by `1 / (1 - rate)`; in inference mode it is the identity.
pub fn dropout<R: Rng + ?Sized>(x: &Tensor, rate: f64, training: bool, rng: &mut R) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NdError::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.shape(), rate, rng)?;
    x.zip_map(&mask, "dropout", |a, m| a * m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relu_examples() {
        let y = relu(&Tensor::vector(vec![-3.0, 0.0, 5.0]));
        assert_eq!(y.data(), &[0.0, 0.0, 5.0]);
        let y = relu(&Tensor::vector(vec![-1.0, -0.5, -1e-9]));
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-40.0..40.0);
            assert!((sigmoid_scalar(x) + sigmoid_scalar(-x) - 1.0).abs() < 1e-12);
        }
        assert!(sigmoid_scalar(800.0) <= 1.0 && sigmoid_scalar(-800.0) >= 0.0);
    }

    #[test]
    fn softmax_examples() {
        let s = softmax(&Tensor::vector(vec![0.0; 4]), 0).unwrap();
        assert_eq!(s.data(), &[0.25; 4]);
        let s = softmax(&Tensor::vector(vec![2f64.ln(), 0.0]), 0).unwrap();
        assert!((s.data()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.data()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_large_inputs_normalise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Tensor::uniform(&[20, 7], -1e4, 1e4, &mut rng);
        for axis in [0, 1] {
            let s = softmax(&x, axis).unwrap();
            assert!(s.all_finite());
            let (r, c) = s.dims2().unwrap();
            if axis == 1 {
                for i in 0..r {
                    assert!((s.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            } else {
                for j in 0..c {
                    let col: f64 = (0..r).map(|i| s.get2(i, j)).sum();
                    assert!((col - 1.0).abs() < 1e-12);
                }
            }
        }
        assert!(softmax(&x, 2).is_err());
    }

    #[test]
    fn softmax_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::uniform(&[4, 6], -5.0, 5.0, &mut rng);
        let shifted = x.map(|v| v + 123.25);
        let a = softmax(&x, 1).unwrap();
        let b = softmax(&shifted, 1).unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_examples() {
        let target = Tensor::matrix(1, 3, vec![0.0, 1.0, 0.0]).unwrap();
        let perfect = Tensor::matrix(1, 3, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(cross_entropy(&perfect, &target).unwrap(), 0.0);
        let half = Tensor::matrix(1, 3, vec![0.25, 0.5, 0.25]).unwrap();
        assert!((cross_entropy(&half, &target).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(cross_entropy(&half, &Tensor::zeros(&[1, 2])).is_err());
        // floor keeps a zero probability finite
        let wrong = Tensor::matrix(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert!((cross_entropy(&wrong, &target).unwrap() + PROB_FLOOR.ln()).abs() < 1e-9);
        let nan = Tensor::matrix(1, 3, vec![0.0, f64::NAN, 0.0]).unwrap();
        assert!(cross_entropy(&nan, &target).unwrap().is_nan());
    }

    #[test]
    fn dropout_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::uniform(&[50], -1.0, 1.0, &mut rng);
        assert_eq!(dropout(&x, 0.0, true, &mut rng).unwrap(), x);
        assert_eq!(dropout(&x, 0.0, false, &mut rng).unwrap(), x);
        assert_eq!(dropout(&x, 0.5, false, &mut rng).unwrap(), x);
        assert!(dropout(&x, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn dropout_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 1_000_000;
        let x = Tensor::full(&[n], 2.0);
        let y = dropout(&x, 0.5, true, &mut rng).unwrap();
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count() as f64 / n as f64;
        assert!((zeros - 0.5).abs() < 0.01, "zero fraction {zeros}");
        let mean = y.sum() / n as f64;
        assert!((mean - 2.0).abs() / 2.0 < 0.01, "mean {mean}");
    }
}
