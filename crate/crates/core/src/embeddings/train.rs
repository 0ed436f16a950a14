use ndcore::functional::{sigmoid_scalar, softmax_slice};
use ndcore::Tensor;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbeddingSource, EmbeddingTable, SkipGramState};
use crate::error::{Error, Result};
use crate::features::{Vocabulary, PAD_INDEX};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Cbow,
    Skipgram,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cbow" => Ok(Self::Cbow),
            "skipgram" | "skip-gram" => Ok(Self::Skipgram),
            other => Err(Error::Config(format!("unknown embedding algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub dimension: usize,
    pub window: usize,
    pub epochs: usize,
    pub algorithm: Algorithm,
    /// Initial rate, decayed linearly towards zero over all updates.
    pub learning_rate: f64,
    pub negative_samples: usize,
    /// Vocabularies up to this size use the exact softmax.
    pub full_softmax_max_vocab: usize,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dimension: 300,
            window: 5,
            epochs: 30,
            algorithm: Algorithm::Cbow,
            learning_rate: 0.025,
            negative_samples: 5,
            full_softmax_max_vocab: 20_000,
            seed: 0,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 || self.window == 0 || self.epochs == 0 {
            return Err(Error::Config("dimension, window and epochs must all be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Full-softmax CBOW loss `-ln P(target | mean(context))` and its gradient
/// with respect to each context input vector.
pub fn cbow_loss_and_grad(state: &SkipGramState, context: &[usize], target: usize) -> (f64, Vec<Vec<f64>>) {
    let d = state.input_vectors.cols();
    let h = mean_context(&state.input_vectors, context, d);
    let mut p = vec![0.0; state.vocab_size()];
    let scores: Vec<f64> = (0..p.len()).map(|j| dot(state.output_vectors.row(j), &h)).collect();
    softmax_slice(&scores, &mut p);
    let loss = -p[target].max(ndcore::functional::PROB_FLOOR).ln();
    let mut grad_h = vec![0.0; d];
    for (j, &pj) in p.iter().enumerate() {
        let g = pj - if j == target { 1.0 } else { 0.0 };
        axpy(g, state.output_vectors.row(j), &mut grad_h);
    }
    let share = 1.0 / context.len() as f64;
    let per_context: Vec<f64> = grad_h.iter().map(|g| g * share).collect();
    (loss, vec![per_context; context.len()])
}

fn mean_context(input: &Tensor, context: &[usize], d: usize) -> Vec<f64> {
    let mut h = vec![0.0; d];
    for &c in context {
        axpy(1.0, input.row(c), &mut h);
    }
    let k = context.len() as f64;
    h.iter_mut().for_each(|x| *x /= k);
    h
}

enum Objective {
    Softmax,
    Negative { table: WeightedIndex<f64>, k: usize },
}

struct Trainer {
    state: SkipGramState,
    objective: Objective,
    rng: ChaCha8Rng,
    scores: Vec<f64>,
    probs: Vec<f64>,
    grad_h: Vec<f64>,
    sampled: Vec<usize>,
}

impl Trainer {
    /// One SGD update of `-ln P(target | h)`; returns the gradient w.r.t. `h`.
    fn update_output(&mut self, h: &[f64], target: usize, lr: f64) -> f64 {
        self.grad_h.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        match &self.objective {
            Objective::Softmax => {
                let v = self.state.vocab_size();
                for j in 0..v {
                    self.scores[j] = dot(self.state.output_vectors.row(j), h);
                }
                softmax_slice(&self.scores, &mut self.probs);
                loss = -self.probs[target].max(ndcore::functional::PROB_FLOOR).ln();
                for j in 0..v {
                    let g = self.probs[j] - if j == target { 1.0 } else { 0.0 };
                    axpy(g, self.state.output_vectors.row(j), &mut self.grad_h);
                    axpy(-lr * g, h, self.state.output_vectors.row_mut(j));
                }
            }
            Objective::Negative { table, k } => {
                self.sampled.clear();
                self.sampled.push(target);
                for _ in 0..*k {
                    let mut n = table.sample(&mut self.rng) + 2;
                    if n == target {
                        n = table.sample(&mut self.rng) + 2;
                    }
                    self.sampled.push(n);
                }
                for (i, &j) in self.sampled.iter().enumerate() {
                    let label = if i == 0 { 1.0 } else { 0.0 };
                    let s = sigmoid_scalar(dot(self.state.output_vectors.row(j), h));
                    loss -= if i == 0 { s } else { 1.0 - s }.max(ndcore::functional::PROB_FLOOR).ln();
                    let g = s - label;
                    axpy(g, self.state.output_vectors.row(j), &mut self.grad_h);
                    axpy(-lr * g, h, self.state.output_vectors.row_mut(j));
                }
            }
        }
        loss
    }
}

/// word2vec training over `token_streams`. Tokens outside `vocab` are skipped.
pub fn train_embeddings<S: AsRef<[String]>>(
    token_streams: &[S],
    vocab: &Vocabulary,
    config: &EmbeddingConfig,
) -> Result<EmbeddingTable> {
    config.validate()?;
    if token_streams.is_empty() {
        return Err(Error::Data("no token streams to train embeddings on".into()));
    }
    let v = vocab.len();
    let d = config.dimension;
    let streams: Vec<Vec<usize>> = token_streams
        .iter()
        .map(|s| s.as_ref().iter().filter_map(|t| vocab.index_of(t)).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input = Tensor::uniform(&[v, d], -0.5 / d as f64, 0.5 / d as f64, &mut rng);
    input.row_mut(PAD_INDEX).fill(0.0);
    let source = match config.algorithm {
        Algorithm::Cbow => EmbeddingSource::TrainedCbow,
        Algorithm::Skipgram => EmbeddingSource::TrainedSkipgram,
    };

    let total_positions: usize = streams.iter().filter(|s| s.len() >= 2).map(Vec::len).sum();
    if v <= 3 || total_positions == 0 {
        log::warn!("vocabulary of {v} entries leaves no context pairs; embeddings stay at their initial values");
        return Ok(EmbeddingTable {
            dimension: d,
            vectors: input,
            source,
        });
    }

    let objective = if v <= config.full_softmax_max_vocab || config.negative_samples == 0 {
        Objective::Softmax
    } else {
        let mut counts = vec![0.0f64; v];
        for s in &streams {
            for &i in s {
                counts[i] += 1.0;
            }
        }
        let weights: Vec<f64> = counts[2..].iter().map(|c| c.powf(0.75)).collect();
        let table = WeightedIndex::new(&weights).map_err(|e| Error::Data(format!("negative-sampling table: {e}")))?;
        Objective::Negative {
            table,
            k: config.negative_samples,
        }
    };

    let mut tr = Trainer {
        state: SkipGramState {
            input_vectors: input,
            output_vectors: Tensor::zeros(&[v, d]),
        },
        objective,
        rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15),
        scores: vec![0.0; v],
        probs: vec![0.0; v],
        grad_h: vec![0.0; d],
        sampled: Vec::new(),
    };

    let total_updates = (config.epochs * total_positions) as f64;
    let mut done = 0usize;
    let mut context = Vec::with_capacity(2 * config.window);
    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        let mut epoch_terms = 0usize;
        for s in streams.iter().filter(|s| s.len() >= 2) {
            for i in 0..s.len() {
                let lr = config.learning_rate * (1.0 - done as f64 / total_updates).max(1e-4);
                done += 1;
                context.clear();
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window).min(s.len() - 1);
                context.extend((lo..=hi).filter(|&j| j != i).map(|j| s[j]));
                match config.algorithm {
                    Algorithm::Cbow => {
                        let h = mean_context(&tr.state.input_vectors, &context, d);
                        epoch_loss += tr.update_output(&h, s[i], lr);
                        epoch_terms += 1;
                        let share = -lr / context.len() as f64;
                        let grad = tr.grad_h.clone();
                        for &c in &context {
                            if c != PAD_INDEX {
                                axpy(share, &grad, tr.state.input_vectors.row_mut(c));
                            }
                        }
                    }
                    Algorithm::Skipgram => {
                        let center = s[i];
                        for &target in &context {
                            let h = tr.state.input_vectors.row(center).to_vec();
                            epoch_loss += tr.update_output(&h, target, lr);
                            epoch_terms += 1;
                            let grad = tr.grad_h.clone();
                            axpy(-lr, &grad, tr.state.input_vectors.row_mut(center));
                        }
                    }
                }
            }
        }
        log::debug!("embedding epoch {} mean loss {:.5}", epoch + 1, epoch_loss / epoch_terms.max(1) as f64);
    }

    let vectors = tr.state.input_vectors;
    if !vectors.all_finite() {
        return Err(Error::Diverged {
            epoch: config.epochs,
            loss: f64::NAN,
        });
    }
    Ok(EmbeddingTable {
        dimension: d,
        vectors,
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::cosine;
    use crate::features::build_vocabulary;

    fn streams(v: &[&str]) -> Vec<Vec<String>> {
        v.iter().map(|s| s.split_whitespace().map(String::from).collect()).collect()
    }

    fn tiny_config(algorithm: Algorithm) -> EmbeddingConfig {
        EmbeddingConfig {
            dimension: 2,
            window: 1,
            epochs: 5,
            algorithm,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let s = streams(&["a b c d a b", "c d e a"]);
        let vocab = build_vocabulary(&s, 1).unwrap();
        for algo in [Algorithm::Cbow, Algorithm::Skipgram] {
            let a = train_embeddings(&s, &vocab, &tiny_config(algo)).unwrap();
            let b = train_embeddings(&s, &vocab, &tiny_config(algo)).unwrap();
            assert_eq!(a.vectors.data(), b.vectors.data());
            assert!(a.vectors.row(0).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn errors_and_degenerate_inputs() {
        let vocab = build_vocabulary(&streams(&["a b"]), 1).unwrap();
        assert!(train_embeddings::<Vec<String>>(&[], &vocab, &tiny_config(Algorithm::Cbow)).is_err());
        let bad = EmbeddingConfig { window: 0, ..tiny_config(Algorithm::Cbow) };
        assert!(train_embeddings(&streams(&["a b"]), &vocab, &bad).is_err());
        let t = train_embeddings(&streams(&["a", "b"]), &vocab, &tiny_config(Algorithm::Cbow)).unwrap();
        assert_eq!(t.rows(), vocab.len());
    }

    fn shared_context_corpus() -> Vec<Vec<String>> {
        let mut lines = Vec::new();
        for i in 0..60 {
            let l = ["p", "q", "r"][i % 3];
            let r = ["s", "t", "u"][(i / 3) % 3];
            lines.push(format!("{l} x {r}"));
            lines.push(format!("{l} y {r}"));
            lines.push(format!("k z m"));
        }
        lines.iter().map(|s| s.split(' ').map(String::from).collect()).collect()
    }

    #[test]
    fn shared_contexts_give_closer_vectors() {
        let s = shared_context_corpus();
        let vocab = build_vocabulary(&s, 1).unwrap();
        for algo in [Algorithm::Cbow, Algorithm::Skipgram] {
            let cfg = EmbeddingConfig {
                dimension: 10,
                window: 1,
                epochs: 30,
                algorithm: algo,
                seed: 3,
                ..Default::default()
            };
            let t = train_embeddings(&s, &vocab, &cfg).unwrap();
            let row = |w: &str| t.row(vocab.index_of(w).unwrap());
            assert!(cosine(row("x"), row("y")) > cosine(row("x"), row("z")), "{algo:?}");
        }
    }

    #[test]
    fn negative_sampling_branch_runs() {
        let s = shared_context_corpus();
        let vocab = build_vocabulary(&s, 1).unwrap();
        let cfg = EmbeddingConfig {
            dimension: 10,
            window: 1,
            epochs: 30,
            full_softmax_max_vocab: 0,
            seed: 5,
            ..Default::default()
        };
        let t = train_embeddings(&s, &vocab, &cfg).unwrap();
        let row = |w: &str| t.row(vocab.index_of(w).unwrap());
        assert!(t.vectors.all_finite());
        assert!(cosine(row("x"), row("y")) > cosine(row("x"), row("z")));
    }

    #[test]
    fn cbow_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let state = SkipGramState::random(7, 4, 0.8, &mut rng);
        let context = [2usize, 3, 5, 6];
        let target = 4;
        let (_, grads) = cbow_loss_and_grad(&state, &context, target);
        let h = 1e-6;
        for (ci, &c) in context.iter().enumerate() {
            for k in 0..4 {
                let mut plus = state.clone();
                plus.input_vectors.row_mut(c)[k] += h;
                let mut minus = state.clone();
                minus.input_vectors.row_mut(c)[k] -= h;
                let num = (cbow_loss_and_grad(&plus, &context, target).0
                    - cbow_loss_and_grad(&minus, &context, target).0)
                    / (2.0 * h);
                let ana = grads[ci][k];
                let rel = (ana - num).abs() / ana.abs().max(num.abs()).max(1e-7);
                assert!(rel < 1e-4, "context {c} coord {k}: {ana} vs {num}");
            }
        }
    }
}
