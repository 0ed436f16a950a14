//! Trains CBOW and skip-gram vectors on synthetic policy text and lists the
//! nearest neighbours of a few keywords.

use polcov::corpus::synthetic::{synthetic_corpus, SyntheticSpec};
use polcov::embeddings::{cosine, train_embeddings, Algorithm, EmbeddingConfig, EmbeddingTable};
use polcov::features::{build_vocabulary, Vocabulary};
use polcov::pipeline::tokenize_dataset;

fn neighbours<'v>(table: &EmbeddingTable, vocab: &'v Vocabulary, word: &str, n: usize) -> Vec<(&'v str, f64)> {
    let Some(q) = vocab.index_of(word) else { return Vec::new() };
    let mut scored: Vec<(&str, f64)> = (2..vocab.len())
        .filter(|&i| i != q)
        .map(|i| (vocab.token(i).unwrap(), cosine(table.row(q), table.row(i))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(n);
    scored
}

fn main() -> polcov::Result<()> {
    let spec = SyntheticSpec {
        policies: 40,
        ..SyntheticSpec::default()
    };
    let tokens = tokenize_dataset(&synthetic_corpus(&spec, 3));
    let vocab = build_vocabulary(&tokens, 2)?;
    println!("{} token streams, vocabulary {}", tokens.len(), vocab.len());

    for algorithm in [Algorithm::Cbow, Algorithm::Skipgram] {
        let config = EmbeddingConfig {
            dimension: 32,
            algorithm,
            ..EmbeddingConfig::default()
        };
        let table = train_embeddings(&tokens, &vocab, &config)?;
        println!("\n{algorithm:?}");
        for word in ["track", "encryption", "retain"] {
            let near: Vec<String> = neighbours(&table, &vocab, word, 4).iter().map(|(w, s)| format!("{w} {s:.2}")).collect();
            println!("  {word:<11} {}", near.join(", "));
        }
    }
    Ok(())
}
