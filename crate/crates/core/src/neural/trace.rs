use std::collections::HashMap;

use ndcore::Tape;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Architecture, NeuralModel};
use crate::classical::argmax;
use crate::corpus::DataPractice;
use crate::error::{Error, Result};
use crate::features::{EncodedSequence, UNK_INDEX};

/// The `top_n` unigrams by importance for `class`, accumulated over the segments the model
/// assigns to it. Only CNN models expose the pooled windows this needs.
///
/// For each filter whose pooled activation pushes the class logit up, the
/// contribution `pooled * head_weight` is shared equally among the real
/// positions of its winning window. UNK positions take their share but are
/// not reported.
pub fn trace_unigram_importance(model: &NeuralModel, segments: &[EncodedSequence], class: DataPractice, top_n: usize) -> Result<Vec<(String, f64)>> {
    if model.config.architecture != Architecture::Cnn {
        return Err(Error::Model(format!(
            "unigram tracing needs a cnn model, got {}",
            model.config.architecture.as_str()
        )));
    }
    let (head_w, _) = model.head();
    let c = class.index();
    let mut scores: HashMap<usize, f64> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for chunk in segments.chunks(64) {
        let refs: Vec<&EncodedSequence> = chunk.iter().collect();
        let mut tape = Tape::with_params(&model.params);
        let fwd = model.forward(&mut tape, &refs, false, &mut rng)?;
        let logits = tape.value(fwd.logits);
        let mut offset = 0;
        for bank in &fwd.conv {
            let pooled = tape.value(bank.pooled);
            let filters = pooled.cols();
            for (b, seq) in chunk.iter().enumerate() {
                if argmax(logits.row(b)) != c {
                    continue;
                }
                for j in 0..filters {
                    let contrib = pooled.get2(b, j) * head_w.get2(offset + j, c);
                    if contrib <= 0.0 {
                        continue;
                    }
                    let start = bank.argmax[b * filters + j];
                    let end = (start + bank.width).min(seq.true_length);
                    if end <= start {
                        continue;
                    }
                    let share = contrib / (end - start) as f64;
                    for &tok in &seq.indices[start..end] {
                        if tok != UNK_INDEX {
                            *scores.entry(tok).or_default() += share;
                        }
                    }
                }
            }
            offset += filters;
        }
    }
    let mut ranked: Vec<(String, f64)> = scores
        .into_iter()
        .map(|(i, s)| (model.vocab.token(i).unwrap_or_default().to_string(), s))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top_n);
    Ok(ranked)
}
