use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{argmax, FeatureMode, LrModel, MnbModel, SvmModel};
use crate::corpus::{DataPractice, NUM_PRACTICES};
use crate::error::{Error, Result};
use crate::features::{transform_tfidf, FeatureVector, TfidfModel};

pub const CLASSICAL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassicalModel {
    Mnb(MnbModel),
    Lr(LrModel),
    Svm(SvmModel),
}

impl ClassicalModel {
    pub fn kind(&self) -> &'static str {
        match self {
            ClassicalModel::Mnb(_) => "mnb",
            ClassicalModel::Lr(_) => "lr",
            ClassicalModel::Svm(_) => "svm",
        }
    }

    /// Class distribution, or `None` for the SVM, whose scores are not
    /// probabilities.
    pub fn predict_proba(&self, x: &FeatureVector) -> Result<Option<[f64; NUM_PRACTICES]>> {
        match self {
            ClassicalModel::Mnb(m) => m.predict_proba(x).map(Some),
            ClassicalModel::Lr(m) => m.predict_proba(x).map(Some),
            ClassicalModel::Svm(_) => Ok(None),
        }
    }

    pub fn scores(&self, x: &FeatureVector) -> Result<[f64; NUM_PRACTICES]> {
        match self {
            ClassicalModel::Svm(m) => m.decision_scores(x),
            other => Ok(other.predict_proba(x)?.expect("probabilistic model")),
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<DataPractice> {
        let s = self.scores(x)?;
        Ok(DataPractice::from_index(argmax(&s)).expect("argmax below NUM_PRACTICES"))
    }
}

/// Everything needed to classify raw token streams with a classical model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalArtifact {
    pub format_version: u32,
    pub feature_mode: FeatureMode,
    pub tfidf: TfidfModel,
    pub model: ClassicalModel,
}

impl ClassicalArtifact {
    pub fn new(feature_mode: FeatureMode, tfidf: TfidfModel, model: ClassicalModel) -> Self {
        Self {
            format_version: CLASSICAL_FORMAT_VERSION,
            feature_mode,
            tfidf,
            model,
        }
    }

    pub fn featurize<S: AsRef<str>>(&self, tokens: &[S]) -> FeatureVector {
        match self.feature_mode {
            FeatureMode::Counts => self.tfidf.counts(tokens),
            FeatureMode::Tfidf => transform_tfidf(&self.tfidf, tokens),
        }
    }

    /// Predicted practice and, for probabilistic models, its probability.
    pub fn classify<S: AsRef<str>>(&self, tokens: &[S]) -> Result<(DataPractice, Option<f64>)> {
        let x = self.featurize(tokens);
        let label = self.model.predict(&x)?;
        let confidence = self.model.predict_proba(&x)?.map(|p| p[label.index()]);
        Ok((label, confidence))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: Self = serde_json::from_str(text)?;
        if a.format_version != CLASSICAL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported classical artifact version {} (expected {CLASSICAL_FORMAT_VERSION})",
                a.format_version
            )));
        }
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{train_lr, train_mnb, train_svm, LrConfig, SvmConfig};
    use crate::corpus::synthetic::{synthetic_corpus, SyntheticSpec};
    use crate::features::{fit_tfidf, tokenize};

    #[test]
    fn round_trip_reproduces_predictions_bitwise() {
        let ds = synthetic_corpus(&SyntheticSpec::default(), 2);
        let docs: Vec<Vec<String>> = ds.segments.iter().map(|s| tokenize(&s.text)).collect();
        let labels = ds.labels();
        let tfidf = fit_tfidf(&docs).unwrap();
        let w = tfidf.width();
        let tf: Vec<FeatureVector> = docs.iter().map(|d| transform_tfidf(&tfidf, d)).collect();
        let counts: Vec<FeatureVector> = docs.iter().map(|d| tfidf.counts(d)).collect();
        let artifacts = [
            ClassicalArtifact::new(FeatureMode::Counts, tfidf.clone(), ClassicalModel::Mnb(train_mnb(&counts, &labels, w, 1.0).unwrap())),
            ClassicalArtifact::new(FeatureMode::Tfidf, tfidf.clone(), ClassicalModel::Lr(train_lr(&tf, &labels, w, &LrConfig::default()).unwrap())),
            ClassicalArtifact::new(FeatureMode::Tfidf, tfidf.clone(), ClassicalModel::Svm(train_svm(&tf, &labels, w, &SvmConfig::default()).unwrap())),
        ];
        let dir = tempfile::tempdir().unwrap();
        for a in &artifacts {
            let p = dir.path().join(format!("{}.json", a.model.kind()));
            a.save(&p).unwrap();
            let back = ClassicalArtifact::load(&p).unwrap();
            assert_eq!(&back, a);
            for d in &docs {
                let x = a.featurize(d);
                let (s1, s2) = (a.model.scores(&x).unwrap(), back.model.scores(&back.featurize(d)).unwrap());
                assert_eq!(s1.map(f64::to_bits), s2.map(f64::to_bits));
            }
        }
    }

    #[test]
    fn version_is_checked() {
        let tfidf = fit_tfidf(&[vec!["a".to_string()]]).unwrap();
        let lr = crate::classical::LrModel::zeros(LrConfig::default(), 1);
        let mut a = ClassicalArtifact::new(FeatureMode::Tfidf, tfidf, ClassicalModel::Lr(lr));
        a.format_version = 99;
        assert!(matches!(ClassicalArtifact::from_json(&a.to_json().unwrap()), Err(Error::Model(_))));
    }
}
