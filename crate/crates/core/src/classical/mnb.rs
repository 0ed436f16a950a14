use ndcore::functional::softmax_slice;
use serde::{Deserialize, Serialize};

use super::check_training;
use crate::corpus::{DataPractice, NUM_PRACTICES};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Laplace-smoothed multinomial naive Bayes. Only classes seen in training
/// get a row; the others have posterior 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnbModel {
    pub alpha: f64,
    pub width: usize,
    pub classes: Vec<DataPractice>,
    pub log_priors: Vec<f64>,
    /// `classes.len() x width`, row-major.
    pub log_likelihoods: Vec<f64>,
}

pub fn train_mnb(rows: &[FeatureVector], labels: &[DataPractice], width: usize, alpha: f64) -> Result<MnbModel> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("smoothing alpha must be positive, got {alpha}")));
    }
    check_training(rows, labels, width)?;
    let mut doc_counts = [0usize; NUM_PRACTICES];
    let mut term_counts = vec![vec![0.0f64; width]; NUM_PRACTICES];
    for (x, y) in rows.iter().zip(labels) {
        doc_counts[y.index()] += 1;
        let row = &mut term_counts[y.index()];
        for &(c, v) in &x.entries {
            row[c] += v;
        }
    }
    let n = rows.len() as f64;
    let mut model = MnbModel {
        alpha,
        width,
        classes: Vec::new(),
        log_priors: Vec::new(),
        log_likelihoods: Vec::new(),
    };
    for (k, counts) in term_counts.iter().enumerate() {
        if doc_counts[k] == 0 {
            continue;
        }
        model.classes.push(DataPractice::from_index(k).expect("index below NUM_PRACTICES"));
        model.log_priors.push((doc_counts[k] as f64 / n).ln());
        let denom = (counts.iter().sum::<f64>() + alpha * width as f64).ln();
        model.log_likelihoods.extend(counts.iter().map(|c| (c + alpha).ln() - denom));
    }
    Ok(model)
}

impl MnbModel {
    pub fn joint_log_likelihood(&self, x: &FeatureVector) -> Vec<f64> {
        self.log_priors
            .iter()
            .enumerate()
            .map(|(k, prior)| {
                let row = &self.log_likelihoods[k * self.width..(k + 1) * self.width];
                prior + x.entries.iter().map(|&(c, v)| v * row[c]).sum::<f64>()
            })
            .collect()
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<[f64; NUM_PRACTICES]> {
        super::check_rows(std::slice::from_ref(x), self.width)?;
        let jll = self.joint_log_likelihood(x);
        let mut post = vec![0.0; jll.len()];
        softmax_slice(&jll, &mut post);
        let mut out = [0.0; NUM_PRACTICES];
        for (c, p) in self.classes.iter().zip(post) {
            out[c.index()] = p;
        }
        Ok(out)
    }

    pub fn likelihood(&self, class: DataPractice, column: usize) -> Option<f64> {
        let k = self.classes.iter().position(|&c| c == class)?;
        Some(self.log_likelihoods[k * self.width + column].exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::argmax;
    use DataPractice::{DataSecurity as Y, FirstPartyCollectionUse as X};

    fn fv(e: &[(usize, f64)]) -> FeatureVector {
        FeatureVector { entries: e.to_vec() }
    }

    #[test]
    fn laplace_toy_model() {
        // vocab {a:0, b:1}; X = "a a", Y = "b"
        let m = train_mnb(&[fv(&[(0, 2.0)]), fv(&[(1, 1.0)])], &[X, Y], 2, 1.0).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
        assert!(close(m.likelihood(X, 0).unwrap(), 0.75));
        assert!(close(m.likelihood(X, 1).unwrap(), 0.25));
        assert!(close(m.likelihood(Y, 0).unwrap(), 1.0 / 3.0));
        assert!(close(m.likelihood(Y, 1).unwrap(), 2.0 / 3.0));
        let p = m.predict_proba(&fv(&[(0, 1.0)])).unwrap();
        assert_eq!(argmax(&p), X.index());
        let expect = 0.375 / (0.375 + 0.5 / 3.0);
        assert!((p[X.index()] - expect).abs() < 1e-12);
    }

    #[test]
    fn single_class_prior_and_errors() {
        let m = train_mnb(&[fv(&[(0, 1.0)])], &[Y], 3, 1.0).unwrap();
        assert_eq!(m.log_priors, vec![0.0]);
        assert_eq!(m.predict_proba(&fv(&[])).unwrap()[Y.index()], 1.0);
        assert!(train_mnb(&[], &[], 3, 1.0).is_err());
        assert!(train_mnb(&[fv(&[(0, 1.0)])], &[Y], 3, 0.0).is_err());
        assert!(m.predict_proba(&fv(&[(5, 1.0)])).is_err());
    }

    #[test]
    fn rows_normalize_and_duplication_keeps_argmax() {
        let rows = vec![fv(&[(0, 3.0), (2, 1.0)]), fv(&[(1, 2.0), (3, 1.0)]), fv(&[(0, 1.0), (3, 4.0)])];
        let labels = [X, Y, DataPractice::Other];
        let m = train_mnb(&rows, &labels, 4, 0.5).unwrap();
        for k in 0..m.classes.len() {
            let s: f64 = m.log_likelihoods[k * 4..(k + 1) * 4].iter().map(|l| l.exp()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let total: f64 = m.log_priors.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let doc = fv(&[(0, 1.0), (1, 1.0), (3, 2.0)]);
        let base = argmax(&m.predict_proba(&doc).unwrap());
        for k in 2..5 {
            let dup = fv(&doc.entries.iter().map(|&(c, v)| (c, v * k as f64)).collect::<Vec<_>>());
            assert_eq!(argmax(&m.predict_proba(&dup).unwrap()), base);
        }
    }
}
