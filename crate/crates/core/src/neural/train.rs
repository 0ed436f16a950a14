use log::debug;
use ndcore::{clip_gradients, OptimizerState, Tape, Tensor, CLIP_NORM};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::NeuralModel;
use crate::corpus::{DataPractice, NUM_PRACTICES};
use crate::error::{Error, Result};
use crate::features::EncodedSequence;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per completed epoch.
    pub loss_history: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

pub(crate) fn one_hot(labels: &[DataPractice]) -> Tensor {
    let mut y = Tensor::zeros(&[labels.len(), NUM_PRACTICES]);
    for (r, l) in labels.iter().enumerate() {
        y.row_mut(r)[l.index()] = 1.0;
    }
    y
}

/// Mini-batch training with early stopping on the epoch's mean loss.
pub fn train_model(model: &mut NeuralModel, inputs: &[EncodedSequence], labels: &[DataPractice]) -> Result<TrainReport> {
    if inputs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            got: labels.len(),
        });
    }
    if inputs.is_empty() {
        return Err(Error::Data("no training examples".into()));
    }
    let cfg = model.config.clone();
    let lr = cfg.learning_rate.unwrap_or_else(|| cfg.optimizer.default_learning_rate());
    let mut opt = OptimizerState::with_learning_rate(cfg.optimizer, lr, model.params.values());
    let trainable = model.trainable_mask();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));

    let mut report = TrainReport {
        loss_history: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let seqs: Vec<&EncodedSequence> = batch.iter().map(|&i| &inputs[i]).collect();
            let ys: Vec<DataPractice> = batch.iter().map(|&i| labels[i]).collect();
            let mut grads = {
                let mut tape = Tape::with_params(&model.params);
                let fwd = model.forward(&mut tape, &seqs, true, &mut dropout_rng)?;
                let loss = tape.softmax_cross_entropy(fwd.logits, one_hot(&ys))?;
                let value = tape.value(loss).item();
                if !value.is_finite() {
                    return Err(Error::Diverged { epoch, loss: value });
                }
                total += value * batch.len() as f64;
                tape.backward(loss)?.into_params()
            };
            for (g, &t) in grads.iter_mut().zip(&trainable) {
                if !t {
                    g.data_mut().fill(0.0);
                }
            }
            clip_gradients(&mut grads, CLIP_NORM);
            opt.step(model.params.values_mut(), &grads, Some(&trainable))?;
        }
        let mean = total / inputs.len() as f64;
        debug!("epoch {epoch}: loss {mean:.6}");
        report.loss_history.push(mean);
        if mean < best {
            best = mean;
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    Ok(report)
}
