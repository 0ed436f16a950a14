use ndcore::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Filters of one width: `weights` is `(width * dim) x filters`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub width: usize,
    pub weights: Tensor,
    pub bias: Tensor,
}

impl FilterBank {
    pub fn filters(&self) -> usize {
        self.weights.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvOutput {
    /// Pooled value per filter, banks in order.
    pub pooled: Vec<f64>,
    /// Start position of the winning window per filter.
    pub argmax: Vec<usize>,
    /// Rectified feature map per bank, `windows x filters`.
    pub feature_maps: Vec<Tensor>,
}

/// ReLU feature maps over every window and their max over time.
pub fn conv_maxpool(sentence: &Tensor, banks: &[FilterBank]) -> Result<ConvOutput> {
    let (len, dim) = sentence.dims2()?;
    let mut out = ConvOutput {
        pooled: Vec::new(),
        argmax: Vec::new(),
        feature_maps: Vec::new(),
    };
    for bank in banks {
        if bank.width == 0 || bank.width > len {
            return Err(Error::Data(format!("sentence of {len} rows is shorter than filter width {}", bank.width)));
        }
        if bank.weights.rows() != bank.width * dim {
            return Err(Error::DimensionMismatch {
                expected: bank.width * dim,
                got: bank.weights.rows(),
            });
        }
        let windows = len - bank.width + 1;
        let f = bank.filters();
        let mut map = Tensor::zeros(&[windows, f]);
        for t in 0..windows {
            let x = &sentence.data()[t * dim..(t + bank.width) * dim];
            let row = map.row_mut(t);
            row.copy_from_slice(bank.bias.data());
            for (i, xi) in x.iter().enumerate() {
                for (r, w) in row.iter_mut().zip(bank.weights.row(i)) {
                    *r += xi * w;
                }
            }
            row.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        for j in 0..f {
            let mut best = 0;
            for t in 1..windows {
                if map.get2(t, j) > map.get2(best, j) {
                    best = t;
                }
            }
            out.pooled.push(map.get2(best, j));
            out.argmax.push(best);
        }
        out.feature_maps.push(map);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn width_one_identity_filter() {
        let s = Tensor::matrix(3, 1, vec![0.2, 0.9, 0.1]).unwrap();
        let bank = FilterBank {
            width: 1,
            weights: Tensor::matrix(1, 1, vec![1.0]).unwrap(),
            bias: Tensor::zeros(&[1]),
        };
        let o = conv_maxpool(&s, &[bank.clone()]).unwrap();
        assert_eq!(o.feature_maps[0].data(), &[0.2, 0.9, 0.1]);
        assert_eq!((o.pooled[0], o.argmax[0]), (0.9, 1));

        let neg = FilterBank { weights: Tensor::matrix(1, 1, vec![-1.0]).unwrap(), ..bank };
        assert_eq!(conv_maxpool(&s, &[neg]).unwrap().pooled[0], 0.0);
    }

    #[test]
    fn brute_force_windows_and_filter_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (len, dim) = (20, 4);
        let s = Tensor::uniform(&[len, dim], -1.0, 1.0, &mut rng);
        let banks: Vec<FilterBank> = [3usize, 4, 5]
            .iter()
            .map(|&w| FilterBank {
                width: w,
                weights: Tensor::uniform(&[w * dim, 6], -1.0, 1.0, &mut rng),
                bias: Tensor::uniform(&[6], -0.2, 0.2, &mut rng),
            })
            .collect();
        let o = conv_maxpool(&s, &banks).unwrap();
        let mut k = 0;
        for b in &banks {
            for j in 0..6 {
                let mut best = f64::NEG_INFINITY;
                for t in 0..=len - b.width {
                    let mut v = b.bias.data()[j];
                    for r in 0..b.width {
                        for c in 0..dim {
                            v += s.get2(t + r, c) * b.weights.get2(r * dim + c, j);
                        }
                    }
                    best = best.max(v.max(0.0));
                }
                assert!((o.pooled[k] - best).abs() < 1e-12);
                k += 1;
            }
        }

        // permuting the filters of a bank permutes its pooled outputs
        let mut perm: Vec<usize> = (0..6).collect();
        perm.shuffle(&mut rng);
        let b = &banks[1];
        let mut w = Tensor::zeros(b.weights.shape());
        let mut bias = Tensor::zeros(&[6]);
        for (new, &old) in perm.iter().enumerate() {
            for r in 0..b.weights.rows() {
                w.row_mut(r)[new] = b.weights.get2(r, old);
            }
            bias.data_mut()[new] = b.bias.data()[old];
        }
        let permuted = conv_maxpool(&s, &[FilterBank { width: b.width, weights: w, bias }]).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(permuted.pooled[new], o.pooled[6 + old]);
        }
    }

    #[test]
    fn short_sentence_is_rejected() {
        let s = Tensor::zeros(&[2, 3]);
        let bank = FilterBank { width: 3, weights: Tensor::zeros(&[9, 1]), bias: Tensor::zeros(&[1]) };
        assert!(conv_maxpool(&s, &[bank]).is_err());
    }
}
