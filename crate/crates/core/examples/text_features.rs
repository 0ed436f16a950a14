//! Tokenization, TF-IDF weighting and fixed-length index encoding of a few
//! policy sentences.

use polcov::features::{build_vocabulary, encode_sequence, fit_tfidf, tokenize, transform_tfidf};

fn main() -> polcov::Result<()> {
    let texts = [
        "We collect your e-mail address when you register.",
        "We don't share your e-mail address with third parties.",
        "You may opt out of marketing e-mail at any time.",
    ];
    let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t)).collect();
    for d in &docs {
        println!("{d:?}");
    }

    let tfidf = fit_tfidf(&docs)?;
    println!("\nvocabulary of {} terms", tfidf.width());
    let v = transform_tfidf(&tfidf, &docs[1]);
    let mut weighted: Vec<(&str, f64)> = v.entries.iter().map(|&(c, w)| (tfidf.terms()[c].as_str(), w)).collect();
    weighted.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("second sentence, heaviest terms first (norm {:.3}):", v.norm());
    for (t, w) in weighted.iter().take(5) {
        println!("  {t:<10} {w:.4}");
    }

    let vocab = build_vocabulary(&docs, 1)?;
    let enc = encode_sequence(&tokenize("We never sell your e-mail address."), &vocab, 8);
    println!("\nencoded: {:?}", enc.indices);
    println!("decoded: {:?}", enc.decode(&vocab));
    Ok(())
}
