//! Trains a small CNN on synthetic segments and prints the unigrams that
//! drive each class decision. Vectors come from skip-gram on the same text.

use ndcore::OptimizerKind;
use polcov::corpus::synthetic::{synthetic_corpus, SyntheticSpec};
use polcov::corpus::DataPractice;
use polcov::embeddings::{Algorithm, EmbeddingConfig};
use polcov::neural::trace_unigram_importance;
use polcov::pipeline::{build_resources, fit, tokenize_dataset, EmbeddingChoice, ModelArtifact, ModelType, PipelineConfig};

fn main() -> polcov::Result<()> {
    let ds = synthetic_corpus(&SyntheticSpec { policies: 60, ..SyntheticSpec::default() }, 9);
    let mut cfg = PipelineConfig::new(ModelType::Cnn);
    cfg.embeddings = EmbeddingChoice::Trained {
        config: EmbeddingConfig {
            dimension: 32,
            algorithm: Algorithm::Skipgram,
            full_softmax_max_vocab: 0,
            ..EmbeddingConfig::default()
        },
    };
    cfg.neural.optimizer = OptimizerKind::AdamLr001;
    cfg.neural.epochs = 30;
    cfg.neural.cnn.filters_per_width = 20;

    let tokens = tokenize_dataset(&ds);
    let resources = build_resources(&cfg, &tokens, 0)?;
    let ModelArtifact::Neural(artifact) = fit(&cfg, &ds, Some(&resources), 0)? else {
        unreachable!("cnn is a neural model")
    };
    let model = &artifact.model;
    let predicted = ModelArtifact::Neural(artifact.clone()).predict_dataset(&ds)?;
    let correct = predicted.iter().zip(ds.labels()).filter(|(p, y)| **p == *y).count();
    println!(
        "cnn with {} weights, sequence length {}, training accuracy {:.3}",
        model.parameter_count(),
        model.max_len,
        correct as f64 / ds.len() as f64
    );

    for class in [DataPractice::DoNotTrack, DataPractice::DataSecurity, DataPractice::PolicyChange] {
        let segments: Vec<_> = ds
            .segments
            .iter()
            .zip(&tokens)
            .filter(|(s, _)| s.label == class)
            .map(|(_, t)| model.encode(t))
            .collect();
        let top = trace_unigram_importance(model, &segments, class, 5)?;
        let words: Vec<String> = top.iter().map(|(w, s)| format!("{w} ({s:.1})")).collect();
        println!("{:<20} {}", class.as_str(), words.join(", "));
    }
    Ok(())
}
