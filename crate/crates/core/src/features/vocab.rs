use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;
pub const PAD_TOKEN: &str = "<PAD>";
pub const UNK_TOKEN: &str = "<UNK>";

/// Token <-> index map with PAD at 0 and UNK at 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    index_to_token: Vec<String>,
    token_to_index: HashMap<String, usize>,
    pub min_count: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    tokens: Vec<String>,
    min_count: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_tokens(r.tokens.into_iter().skip(2), r.min_count)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            tokens: v.index_to_token,
            min_count: v.min_count,
        }
    }
}

impl Vocabulary {
    /// Vocabulary over `tokens` in the given order, after PAD and UNK.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>, min_count: usize) -> Self {
        let mut index_to_token = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut token_to_index = HashMap::new();
        for t in tokens {
            if t == PAD_TOKEN || t == UNK_TOKEN || token_to_index.contains_key(&t) {
                continue;
            }
            token_to_index.insert(t.clone(), index_to_token.len());
            index_to_token.push(t);
        }
        Self {
            index_to_token,
            token_to_index,
            min_count,
        }
    }

    /// Total size including the two reserved entries.
    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_to_token.len() <= 2
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    /// Index of `token`, or UNK.
    pub fn lookup(&self, token: &str) -> usize {
        self.index_of(token).unwrap_or(UNK_INDEX)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.index_to_token.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.index_to_token
    }

    /// One token per line in index order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = self.index_to_token.join("\n");
        body.push('\n');
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < 2 || lines[0] != PAD_TOKEN || lines[1] != UNK_TOKEN {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: 1,
                message: format!("vocabulary must start with {PAD_TOKEN} and {UNK_TOKEN}"),
            });
        }
        Ok(Self::from_tokens(lines[2..].iter().map(|s| s.to_string()), 1))
    }
}

/// Keeps tokens seen at least `min_count` times, most frequent first and
/// lexicographic among equals.
pub fn build_vocabulary<S: AsRef<[String]>>(streams: &[S], min_count: usize) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for stream in streams {
        for t in stream.as_ref() {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Ok(Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t.to_string()), min_count))
}

/// Fixed-length index sequence, padded or truncated at the tail.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSequence {
    pub indices: Vec<usize>,
    /// Number of leading positions that hold real tokens.
    pub true_length: usize,
}

impl EncodedSequence {
    pub fn decode<'v>(&self, vocab: &'v Vocabulary) -> Vec<&'v str> {
        self.indices[..self.true_length]
            .iter()
            .map(|&i| vocab.token(i).unwrap_or(UNK_TOKEN))
            .collect()
    }
}

pub fn encode_sequence<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, max_len: usize) -> EncodedSequence {
    let true_length = tokens.len().min(max_len);
    let mut indices: Vec<usize> = tokens[..true_length].iter().map(|t| vocab.lookup(t.as_ref())).collect();
    indices.resize(max_len, PAD_INDEX);
    EncodedSequence { indices, true_length }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn build_examples() {
        let v = build_vocabulary(&[s(&["a", "b", "a"])], 1).unwrap();
        assert_eq!(v.tokens(), &["<PAD>", "<UNK>", "a", "b"]);
        let v = build_vocabulary(&[s(&["a", "b", "a"])], 2).unwrap();
        assert_eq!(v.index_of("a"), Some(2));
        assert_eq!(v.index_of("b"), None);
        assert!(build_vocabulary(&[s(&["a"])], 0).is_err());
        // ties are lexicographic
        let v = build_vocabulary(&[s(&["z", "y", "x", "y", "z"])], 1).unwrap();
        assert_eq!(&v.tokens()[2..], &["y", "z", "x"]);
    }

    #[test]
    fn reserved_tokens_never_collide() {
        let v = build_vocabulary(&[s(&["<PAD>", "<UNK>", "pad"])], 1).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.index_of("pad"), Some(2));
    }

    #[test]
    fn encode_examples() {
        let v = Vocabulary::from_tokens(s(&["a"]), 1);
        assert_eq!(encode_sequence(&["a"], &v, 3), EncodedSequence { indices: vec![2, 0, 0], true_length: 1 });
        assert_eq!(encode_sequence(&["zzz"], &v, 2), EncodedSequence { indices: vec![1, 0], true_length: 1 });
        let ten = s(&["a"; 10]);
        let e = encode_sequence(&ten, &v, 4);
        assert_eq!(e.indices, vec![2; 4]);
        assert_eq!(e.true_length, 4);
    }

    #[test]
    fn file_round_trip() {
        let v = build_vocabulary(&[s(&["privacy", "policy", "policy", "dnt"])], 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("<PAD>\n<UNK>\npolicy\n"));
        let back = Vocabulary::load(&p).unwrap();
        assert_eq!(back.tokens(), v.tokens());
        fs::write(&p, "a\nb\n").unwrap();
        assert!(Vocabulary::load(&p).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_reproduces_known_tokens(
            words in proptest::collection::vec("[a-e]{1,3}", 0..30),
            max_len in 1usize..20,
        ) {
            let vocab = build_vocabulary(&[words.clone()], 1).unwrap();
            for i in 2..vocab.len() {
                prop_assert_eq!(vocab.index_of(vocab.token(i).unwrap()), Some(i));
            }
            let enc = encode_sequence(&words, &vocab, max_len);
            prop_assert_eq!(enc.indices.len(), max_len);
            prop_assert!(enc.indices[enc.true_length..].iter().all(|&i| i == PAD_INDEX));
            let dec = enc.decode(&vocab);
            prop_assert_eq!(dec, words.iter().take(max_len).map(String::as_str).collect::<Vec<_>>());
        }
    }
}
