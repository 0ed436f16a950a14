//! Multinomial naive Bayes, multinomial logistic regression and one-vs-rest
//! linear SVM over sparse TF-IDF (or count) rows.

mod artifact;
mod lr;
mod mnb;
mod svm;

use serde::{Deserialize, Serialize};

use crate::corpus::{DataPractice, NUM_PRACTICES};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub use artifact::{ClassicalArtifact, ClassicalModel, CLASSICAL_FORMAT_VERSION};
pub use lr::{train_lr, train_lr_traced, LrConfig, LrModel, Penalty};
pub use mnb::{train_mnb, MnbModel};
pub use svm::{train_svm, SvmConfig, SvmModel};

/// Which per-document representation a classical model consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Counts,
    Tfidf,
}

pub(crate) fn check_rows(rows: &[FeatureVector], width: usize) -> Result<()> {
    for r in rows {
        if let Some(&(c, _)) = r.entries.last() {
            if c >= width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: c + 1,
                });
            }
        }
    }
    Ok(())
}

pub(crate) fn check_training(rows: &[FeatureVector], labels: &[DataPractice], width: usize) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    check_rows(rows, width)
}

/// Index of the largest score, first on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn affine_scores(weights: &[f64], bias: &[f64], width: usize, x: &FeatureVector) -> [f64; NUM_PRACTICES] {
    let mut s = [0.0; NUM_PRACTICES];
    s.copy_from_slice(bias);
    for &(col, v) in &x.entries {
        for (k, sk) in s.iter_mut().enumerate() {
            *sk += weights[k * width + col] * v;
        }
    }
    s
}
