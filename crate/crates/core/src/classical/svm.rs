use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{affine_scores, check_training};
use crate::corpus::{DataPractice, NUM_PRACTICES};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    /// Passes over the training set.
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iter: 50,
            seed: 0,
        }
    }
}

/// One linear scorer per practice; prediction is the highest score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub config: SvmConfig,
    pub width: usize,
    /// `NUM_PRACTICES x width`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl SvmModel {
    pub fn decision_scores(&self, x: &FeatureVector) -> Result<[f64; NUM_PRACTICES]> {
        super::check_rows(std::slice::from_ref(x), self.width)?;
        Ok(affine_scores(&self.weights, &self.bias, self.width, x))
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<DataPractice> {
        let s = self.decision_scores(x)?;
        Ok(DataPractice::from_index(super::argmax(&s)).expect("argmax below NUM_PRACTICES"))
    }
}

/// Pegasos on `lambda/2 |w|^2 + mean hinge`, with the bias carried as a
/// constant unit feature. The weights are held as `scale * v`.
fn train_binary(rows: &[FeatureVector], y: &[f64], width: usize, lambda: f64, epochs: usize, seed: u64) -> (Vec<f64>, f64) {
    let mut v = vec![0.0; width];
    let mut vb = 0.0;
    let mut scale = 1.0;
    let mut vnorm2 = 0.0;
    let radius = 1.0 / lambda.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut t = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = &rows[i];
            let raw: f64 = x.entries.iter().map(|&(c, val)| v[c] * val).sum::<f64>() + vb;
            let margin = y[i] * scale * raw;
            let decay = 1.0 - eta * lambda;
            if decay <= 0.0 {
                v.fill(0.0);
                vb = 0.0;
                vnorm2 = 0.0;
                scale = 1.0;
            } else {
                scale *= decay;
            }
            if margin < 1.0 {
                let a = eta * y[i] / scale;
                let mut dot = vb;
                let mut xx = 1.0;
                for &(c, val) in &x.entries {
                    dot += v[c] * val;
                    xx += val * val;
                    v[c] += a * val;
                }
                vb += a;
                vnorm2 += 2.0 * a * dot + a * a * xx;
            }
            let norm = scale * vnorm2.max(0.0).sqrt();
            if norm > radius {
                scale *= radius / norm;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|x| *x *= scale);
                vb *= scale;
                vnorm2 *= scale * scale;
                scale = 1.0;
            }
        }
    }
    (v.into_iter().map(|x| x * scale).collect(), vb * scale)
}

pub fn train_svm(rows: &[FeatureVector], labels: &[DataPractice], width: usize, config: &SvmConfig) -> Result<SvmModel> {
    if !(config.c > 0.0) || config.max_iter == 0 {
        return Err(Error::Config(format!("SVM needs C > 0 and max_iter >= 1 (got C={}, max_iter={})", config.c, config.max_iter)));
    }
    check_training(rows, labels, width)?;
    let present: std::collections::BTreeSet<DataPractice> = labels.iter().copied().collect();
    if present.len() < 2 {
        return Err(Error::Data("one-vs-rest SVM needs at least two classes in the training set".into()));
    }
    let lambda = 1.0 / (config.c * rows.len() as f64);
    let per_class: Vec<(Vec<f64>, f64)> = (0..NUM_PRACTICES)
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = labels.iter().map(|l| if l.index() == k { 1.0 } else { -1.0 }).collect();
            train_binary(rows, &y, width, lambda, config.max_iter, config.seed.wrapping_add(k as u64))
        })
        .collect();
    let mut weights = Vec::with_capacity(NUM_PRACTICES * width);
    let mut bias = Vec::with_capacity(NUM_PRACTICES);
    for (w, b) in per_class {
        weights.extend(w);
        bias.push(b);
    }
    if weights.iter().chain(&bias).any(|x| !x.is_finite()) {
        return Err(Error::Diverged { epoch: config.max_iter, loss: f64::NAN });
    }
    Ok(SvmModel {
        config: config.clone(),
        width,
        weights,
        bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use DataPractice::{DataSecurity as B, FirstPartyCollectionUse as A};

    fn dense(x: &[f64]) -> FeatureVector {
        FeatureVector { entries: x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect() }
    }

    #[test]
    fn separable_points_clear_the_margin() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let t = i as f64 * 0.1;
            rows.push(dense(&[2.0 + t, 0.5]));
            labels.push(A);
            rows.push(dense(&[0.5, 2.0 + t]));
            labels.push(B);
        }
        let m = train_svm(&rows, &labels, 2, &SvmConfig { c: 100.0, max_iter: 200, seed: 1 }).unwrap();
        for (x, y) in rows.iter().zip(&labels) {
            assert_eq!(m.predict(x).unwrap(), *y);
            let s = m.decision_scores(x).unwrap();
            let own = s[y.index()];
            if own >= 1.0 {
                assert_eq!((1.0 - own).max(0.0), 0.0);
            }
        }
    }

    #[test]
    fn negated_features_flip_bias_free_scores() {
        let m = SvmModel {
            config: SvmConfig::default(),
            width: 3,
            weights: (0..NUM_PRACTICES * 3).map(|i| (i as f64 * 0.37).sin()).collect(),
            bias: vec![0.0; NUM_PRACTICES],
        };
        let x = dense(&[0.3, -1.2, 0.8]);
        let nx = dense(&[-0.3, 1.2, -0.8]);
        let (a, b) = (m.decision_scores(&x).unwrap(), m.decision_scores(&nx).unwrap());
        for k in 0..NUM_PRACTICES {
            assert_eq!(a[k], -b[k]);
        }
    }

    #[test]
    fn close_to_brute_force_weight_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..20 {
            let (x0, x1): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let noisy = x0 + 0.6 * x1 + rng.gen_range(-0.3..0.3) > 0.1;
            rows.push(dense(&[x0, x1]));
            labels.push(if noisy { A } else { B });
        }
        let acc = |f: &dyn Fn(&FeatureVector) -> DataPractice| {
            rows.iter().zip(&labels).filter(|(x, y)| f(x) == **y).count() as f64 / rows.len() as f64
        };
        let m = train_svm(&rows, &labels, 2, &SvmConfig { seed: 3, ..Default::default() }).unwrap();
        let trained = acc(&|x| m.predict(x).unwrap());
        let mut best: f64 = 0.0;
        let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.25).collect();
        for &w0 in &grid {
            for &w1 in &grid {
                for &b in &grid {
                    let score = |x: &FeatureVector| w0 * x.get(0) + w1 * x.get(1) + b;
                    best = best.max(acc(&|x| if score(x) > 0.0 { A } else { B }));
                }
            }
        }
        assert!(trained >= best - 0.02, "svm {trained} vs grid {best}");
    }

    #[test]
    fn errors() {
        let rows = vec![dense(&[1.0])];
        assert!(train_svm(&rows, &[A], 1, &SvmConfig::default()).is_err());
        assert!(train_svm(&rows, &[A], 1, &SvmConfig { c: 0.0, ..Default::default() }).is_err());
        assert!(train_svm(&[], &[], 1, &SvmConfig::default()).is_err());
    }
}
