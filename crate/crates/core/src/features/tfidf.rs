use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse row, sorted by column.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn get(&self, column: usize) -> f64 {
        self.entries
            .binary_search_by_key(&column, |&(c, _)| c)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self, width: usize) -> Vec<f64> {
        let mut out = vec![0.0; width];
        for &(c, w) in &self.entries {
            out[c] = w;
        }
        out
    }
}

/// Fitted document frequencies and smoothed idf weights.
///
/// Columns are the fitted terms in lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "TfidfRepr", into = "TfidfRepr")]
pub struct TfidfModel {
    pub n_docs: usize,
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    idf: Vec<f64>,
    term_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TfidfRepr {
    n_docs: usize,
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    idf: Vec<f64>,
}

impl From<TfidfRepr> for TfidfModel {
    fn from(r: TfidfRepr) -> Self {
        let term_index = r.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            n_docs: r.n_docs,
            terms: r.terms,
            doc_freq: r.doc_freq,
            idf: r.idf,
            term_index,
        }
    }
}

impl From<TfidfModel> for TfidfRepr {
    fn from(m: TfidfModel) -> Self {
        Self {
            n_docs: m.n_docs,
            terms: m.terms,
            doc_freq: m.doc_freq,
            idf: m.idf,
        }
    }
}

pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl TfidfModel {
    pub fn width(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.term_index.get(term).copied()
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.column(term).map(|c| self.doc_freq[c])
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.column(term).map(|c| self.idf[c])
    }

    pub fn idf_column(&self, column: usize) -> f64 {
        self.idf[column]
    }

    /// Raw in-vocabulary term counts, unweighted and unnormalized.
    pub fn counts<S: AsRef<str>>(&self, document: &[S]) -> FeatureVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in document {
            if let Some(c) = self.column(t.as_ref()) {
                *counts.entry(c).or_default() += 1.0;
            }
        }
        FeatureVector {
            entries: counts.into_iter().collect(),
        }
    }
}

pub fn fit_tfidf<S: AsRef<str>, D: AsRef<[S]>>(documents: &[D]) -> Result<TfidfModel> {
    if documents.is_empty() {
        return Err(Error::Data("cannot fit TF-IDF on an empty document list".into()));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in documents {
        let unique: BTreeSet<&str> = doc.as_ref().iter().map(AsRef::as_ref).collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    let n_docs = documents.len();
    let terms: Vec<String> = df.keys().map(|t| t.to_string()).collect();
    let doc_freq: Vec<usize> = df.values().copied().collect();
    let idf = doc_freq.iter().map(|&d| smoothed_idf(n_docs, d)).collect();
    Ok(TfidfRepr {
        n_docs,
        terms,
        doc_freq,
        idf,
    }
    .into())
}

/// `tf * idf` per known term, scaled to unit L2 norm.
pub fn transform_tfidf<S: AsRef<str>>(model: &TfidfModel, document: &[S]) -> FeatureVector {
    let mut v = model.counts(document);
    for (c, w) in v.entries.iter_mut() {
        *w *= model.idf[*c];
    }
    let norm = v.norm();
    if norm > 0.0 {
        for (_, w) in v.entries.iter_mut() {
            *w /= norm;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn docs(v: &[&[&str]]) -> Vec<Vec<String>> {
        v.iter().map(|d| d.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn idf_examples() {
        let m = fit_tfidf(&docs(&[&["a", "b"], &["a"]])).unwrap();
        assert_eq!(m.idf("a"), Some(1.0));
        assert_eq!(m.idf("b"), Some(1.5f64.ln() + 1.0));
        assert_eq!(m.doc_freq("b"), Some(1));
        assert!(fit_tfidf::<String, Vec<String>>(&[]).is_err());
    }

    #[test]
    fn transform_examples() {
        let corpus = docs(&[&["a", "b"], &["a"]]);
        let m = fit_tfidf(&corpus).unwrap();
        let v = transform_tfidf(&m, &corpus[0]);
        let (wa, wb) = (1.0, 1.5f64.ln() + 1.0);
        let n = (wa * wa + wb * wb).sqrt();
        assert!((v.get(m.column("a").unwrap()) - wa / n).abs() < 1e-15);
        assert!((v.get(m.column("b").unwrap()) - wb / n).abs() < 1e-15);

        assert_eq!(transform_tfidf(&m, &["zzz"]).norm(), 0.0);
        let single = transform_tfidf(&m, &["a", "a"]);
        assert_eq!(single.entries, vec![(m.column("a").unwrap(), 1.0)]);
    }

    #[test]
    fn serde_round_trip() {
        let m = fit_tfidf(&docs(&[&["x", "y"], &["y", "z", "z"]])).unwrap();
        let back: TfidfModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(m, back);
        assert_eq!(back.column("z"), Some(2));
    }

    proptest! {
        #[test]
        fn rows_are_unit_norm_and_idf_at_least_one(
            corpus in proptest::collection::vec(proptest::collection::vec("[a-f]", 0..8), 1..12)
        ) {
            let m = fit_tfidf(&corpus).unwrap();
            for t in m.terms() {
                let df = m.doc_freq(t).unwrap();
                prop_assert!(df >= 1 && df <= m.n_docs);
                let idf = m.idf(t).unwrap();
                prop_assert!(idf >= 1.0);
                prop_assert_eq!(idf == 1.0, df == m.n_docs);
            }
            for d in &corpus {
                let v = transform_tfidf(&m, d);
                if !d.is_empty() {
                    prop_assert!((v.norm() - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
