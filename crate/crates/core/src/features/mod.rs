//! Tokenization, vocabularies, fixed-length index sequences and TF-IDF.

mod tfidf;
mod vocab;

pub use tfidf::{fit_tfidf, transform_tfidf, FeatureVector, TfidfModel};
pub use vocab::{build_vocabulary, encode_sequence, EncodedSequence, Vocabulary, PAD_INDEX, PAD_TOKEN, UNK_INDEX, UNK_TOKEN};

/// Lowercases, splits on whitespace and punctuation, and keeps hyphens and
/// apostrophes only between two word characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if matches!(c, '\u{2019}' | '\u{2018}') { '\'' } else { c })
        .collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
            continue;
        }
        let joiner = matches!(c, '-' | '\'');
        let next_is_word = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if joiner && !current.is_empty() && next_is_word {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Nearest-rank percentile of token counts, at least 1.
pub fn length_percentile(lengths: &[usize], q: f64) -> usize {
    if lengths.is_empty() {
        return 1;
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1].max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize("Do Not Track"), ["do", "not", "track"]);
        assert_eq!(tokenize("third-party cookies."), ["third-party", "cookies"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenizer_edges() {
        assert_eq!(tokenize("We don't sell (DNT) data -- ever!"), ["we", "don't", "sell", "dnt", "data", "ever"]);
        assert_eq!(tokenize("users' rights - 'quoted'"), ["users", "rights", "quoted"]);
        assert_eq!(tokenize("e-mail/address,phone"), ["e-mail", "address", "phone"]);
        assert_eq!(tokenize("We\u{2019}ll  notify\tyou"), ["we'll", "notify", "you"]);
        assert!(tokenize(" ... --- ").is_empty());
    }

    #[test]
    fn percentile() {
        let lens: Vec<usize> = (1..=100).collect();
        assert_eq!(length_percentile(&lens, 0.95), 95);
        assert_eq!(length_percentile(&[7], 0.95), 7);
        assert_eq!(length_percentile(&[], 0.95), 1);
        assert_eq!(length_percentile(&[0, 0], 0.95), 1);
    }
}
