//! Builds a synthetic corpus, prints its class balance and shows how the
//! stratified splitter spreads each class over ten folds.
//!
//! `cargo run --example corpus_folds -- [corpus-dir]` loads a canonical-json
//! corpus instead.

use polcov::corpus::synthetic::{synthetic_corpus, SyntheticSpec};
use polcov::corpus::{class_distribution, load_corpus, stratified_folds, DataPractice, Schema};

fn main() -> polcov::Result<()> {
    let ds = match std::env::args().nth(1) {
        Some(dir) => load_corpus(dir.as_ref(), Schema::CanonicalJson)?,
        None => synthetic_corpus(&SyntheticSpec::default(), 42),
    };
    println!("{} segments from {} policies", ds.len(), ds.policies.len());

    let folds = stratified_folds(&ds, 10, 7)?;
    let counts = folds.class_fold_counts(&ds);
    let dist = class_distribution(&ds);
    println!("{:<38} {:>5}  per-fold counts", "practice", "total");
    for p in DataPractice::ALL {
        let row = &counts[p.index()];
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        println!("{:<38} {:>5}  {}", p.as_str(), dist.get(&p).copied().unwrap_or(0), cells.join(" "));
    }
    Ok(())
}
