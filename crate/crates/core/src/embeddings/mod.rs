//! word2vec training, pretrained-vector loading and the embedding lookup that
//! turns an encoded segment into a sentence matrix.

mod format;
mod train;

use ndcore::functional::softmax_slice;
use ndcore::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{EncodedSequence, Vocabulary, PAD_INDEX};

pub use format::{load_pretrained, load_pretrained_binary, save_word2vec_text};
pub use train::{cbow_loss_and_grad, train_embeddings, Algorithm, EmbeddingConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingSource {
    TrainedCbow,
    TrainedSkipgram,
    Pretrained,
    Random,
}

/// `|V| x dimension` matrix aligned with a vocabulary. Row 0 (PAD) is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dimension: usize,
    pub vectors: Tensor,
    pub source: EmbeddingSource,
}

impl EmbeddingTable {
    pub fn rows(&self) -> usize {
        self.vectors.rows()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        self.vectors.row(index)
    }

    /// Uniform `[-0.25, 0.25]` rows with a zero PAD row.
    pub fn random(vocab_size: usize, dimension: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Tensor::uniform(&[vocab_size, dimension], -0.25, 0.25, &mut rng);
        vectors.row_mut(PAD_INDEX).fill(0.0);
        Self {
            dimension,
            vectors,
            source: EmbeddingSource::Random,
        }
    }

    pub fn check_vocabulary(&self, vocab: &Vocabulary) -> Result<()> {
        if self.rows() != vocab.len() {
            return Err(Error::DimensionMismatch {
                expected: vocab.len(),
                got: self.rows(),
            });
        }
        Ok(())
    }
}

/// Sentence matrix of shape `[max_len, dimension]`.
pub fn lookup(table: &EmbeddingTable, encoded: &EncodedSequence) -> Result<Tensor> {
    let d = table.dimension;
    let mut data = vec![0.0; encoded.indices.len() * d];
    for (pos, &idx) in encoded.indices.iter().enumerate() {
        if idx >= table.rows() {
            return Err(Error::Model(format!(
                "index {idx} at position {pos} is outside the {}-row embedding table",
                table.rows()
            )));
        }
        if idx != PAD_INDEX {
            data[pos * d..(pos + 1) * d].copy_from_slice(table.row(idx));
        }
    }
    Ok(Tensor::matrix(encoded.indices.len(), d, data)?)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Input vectors `e` and output vectors `theta` of a skip-gram model.
#[derive(Clone, Debug, PartialEq)]
pub struct SkipGramState {
    pub input_vectors: Tensor,
    pub output_vectors: Tensor,
}

impl SkipGramState {
    pub fn zeros(vocab_size: usize, dimension: usize) -> Self {
        Self {
            input_vectors: Tensor::zeros(&[vocab_size, dimension]),
            output_vectors: Tensor::zeros(&[vocab_size, dimension]),
        }
    }

    pub fn random<R: Rng>(vocab_size: usize, dimension: usize, scale: f64, rng: &mut R) -> Self {
        Self {
            input_vectors: Tensor::uniform(&[vocab_size, dimension], -scale, scale, rng),
            output_vectors: Tensor::uniform(&[vocab_size, dimension], -scale, scale, rng),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.input_vectors.rows()
    }

    /// `P(t | c)` over every target, given the input vector of `context`.
    pub fn distribution(&self, context: usize) -> Vec<f64> {
        let e = self.input_vectors.row(context);
        let scores: Vec<f64> = (0..self.vocab_size())
            .map(|j| self.output_vectors.row(j).iter().zip(e).map(|(a, b)| a * b).sum())
            .collect();
        let mut out = vec![0.0; scores.len()];
        softmax_slice(&scores, &mut out);
        out
    }
}

/// `exp(theta_t . e_c) / sum_j exp(theta_j . e_c)`.
pub fn skipgram_probability(state: &SkipGramState, target: usize, context: usize) -> f64 {
    state.distribution(context)[target]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::encode_sequence;

    #[test]
    fn uniform_when_zero() {
        assert_eq!(skipgram_probability(&SkipGramState::zeros(2, 4), 1, 0), 0.5);
        assert!((skipgram_probability(&SkipGramState::zeros(5, 4), 3, 2) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn distribution_sums_to_one_against_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let st = SkipGramState::random(50, 8, 2.0, &mut rng);
        for c in 0..50 {
            // direct exp/sum without max subtraction
            let e = st.input_vectors.row(c);
            let raw: Vec<f64> = (0..50)
                .map(|j| st.output_vectors.row(j).iter().zip(e).map(|(a, b)| a * b).sum::<f64>().exp())
                .collect();
            let z: f64 = raw.iter().sum();
            let total: f64 = (0..50).map(|t| skipgram_probability(&st, t, c)).sum();
            assert!((total - 1.0).abs() < 1e-9);
            for t in [0, 17, 49] {
                assert!((skipgram_probability(&st, t, c) - raw[t] / z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extreme_scores_stay_finite() {
        let mut st = SkipGramState::zeros(3, 1);
        st.input_vectors.data_mut()[0] = 1e3;
        st.output_vectors.data_mut().copy_from_slice(&[1e3, -1e3, 0.0]);
        let p = st.distribution(0);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lookup_examples() {
        let vocab = Vocabulary::from_tokens((0..30).map(|i| format!("w{i}")), 1);
        let mut table = EmbeddingTable::random(vocab.len(), 2, 1);
        table.vectors.row_mut(4).copy_from_slice(&[0.25, 0.1]);
        table.vectors.row_mut(20).copy_from_slice(&[0.6, -0.2]);
        let enc = EncodedSequence { indices: vec![4, 20], true_length: 2 };
        let m = lookup(&table, &enc).unwrap();
        assert_eq!(m.shape(), &[2, 2]);
        assert_eq!(m.data(), &[0.25, 0.1, 0.6, -0.2]);

        let pad = encode_sequence::<&str>(&[], &vocab, 3);
        assert!(lookup(&table, &pad).unwrap().data().iter().all(|&x| x == 0.0));

        let same = lookup(&table, &EncodedSequence { indices: vec![2, 2], true_length: 2 }).unwrap();
        assert_eq!(same.row(0), same.row(1));

        assert!(lookup(&table, &EncodedSequence { indices: vec![999], true_length: 1 }).is_err());
    }
}
