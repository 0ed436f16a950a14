use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndcore::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingSource, EmbeddingTable};
use crate::error::{Error, Result};
use crate::features::{Vocabulary, PAD_INDEX};

pub const OOV_RANGE: f64 = 0.25;

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_header(path: &Path, header: &str) -> Result<(usize, usize)> {
    let mut parts = header.split_whitespace().map(str::parse::<usize>);
    match (parts.next(), parts.next(), parts.next()) {
        (Some(Ok(count)), Some(Ok(dim)), None) if dim > 0 => Ok((count, dim)),
        _ => Err(malformed(path, 1, format!("expected header \"count dimension\", found {header:?}"))),
    }
}

fn check_dim(expected: Option<usize>, dim: usize) -> Result<()> {
    match expected {
        Some(e) if e != dim => Err(Error::DimensionMismatch { expected: e, got: dim }),
        _ => Ok(()),
    }
}

/// Aligns file vectors with `vocab`; missing tokens get seeded uniform rows.
fn assemble(found: HashMap<String, Vec<f64>>, dim: usize, vocab: &Vocabulary, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(vocab.len() * dim);
    let mut hits = 0usize;
    for (i, token) in vocab.tokens().iter().enumerate() {
        if i == PAD_INDEX {
            data.extend(std::iter::repeat(0.0).take(dim));
        } else if let Some(v) = found.get(token) {
            hits += 1;
            data.extend_from_slice(v);
        } else {
            data.extend((0..dim).map(|_| rng.gen_range(-OOV_RANGE..=OOV_RANGE)));
        }
    }
    log::info!("pretrained vectors cover {hits} of {} vocabulary entries", vocab.len() - 1);
    EmbeddingTable {
        dimension: dim,
        vectors: Tensor::matrix(vocab.len(), dim, data).expect("row-major buffer of |V| x dim"),
        source: EmbeddingSource::Pretrained,
    }
}

/// Reads a word2vec text file and aligns it with `vocab`.
pub fn load_pretrained(path: &Path, vocab: &Vocabulary, expected_dim: Option<usize>, seed: u64) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (count, dim) = match lines.next() {
        Some((_, h)) => parse_header(path, h)?,
        None => return Err(malformed(path, 1, "empty file")),
    };
    check_dim(expected_dim, dim)?;
    let mut found = HashMap::new();
    let mut rows = 0usize;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-blank line has a first field");
        let values: Vec<f64> = parts
            .map(|x| x.parse::<f64>().map_err(|e| malformed(path, i + 1, format!("{x:?}: {e}"))))
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: values.len(),
            });
        }
        found.entry(token.to_string()).or_insert(values);
    }
    if rows != count {
        return Err(malformed(path, 1, format!("header declares {count} vectors, file holds {rows}")));
    }
    Ok(assemble(found, dim, vocab, seed))
}

/// Reads the binary word2vec layout: text header, then `token<space>` followed
/// by `dim` little-endian `f32` values per entry.
pub fn load_pretrained_binary(path: &Path, vocab: &Vocabulary, expected_dim: Option<usize>, seed: u64) -> Result<EmbeddingTable> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| malformed(path, 1, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|e| malformed(path, 1, e.to_string()))?;
    let (count, dim) = parse_header(path, header)?;
    check_dim(expected_dim, dim)?;
    let mut pos = nl + 1;
    let mut found = HashMap::new();
    for entry in 0..count {
        while bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
            pos += 1;
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|&b| b != b' ') {
            pos += 1;
        }
        let token = std::str::from_utf8(&bytes[start..pos]).map_err(|e| malformed(path, entry + 2, e.to_string()))?;
        pos += 1;
        let end = pos + 4 * dim;
        let raw = bytes
            .get(pos..end)
            .ok_or_else(|| malformed(path, entry + 2, format!("truncated vector for {token:?}")))?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        found.entry(token.to_string()).or_insert(values);
        pos = end;
    }
    Ok(assemble(found, dim, vocab, seed))
}

/// Writes `table` in word2vec text format with shortest round-trip floats.
pub fn save_word2vec_text(table: &EmbeddingTable, vocab: &Vocabulary, path: &Path) -> Result<()> {
    table.check_vocabulary(vocab)?;
    let mut out = Vec::new();
    writeln!(out, "{} {}", table.rows(), table.dimension).expect("write to Vec");
    for (i, token) in vocab.tokens().iter().enumerate() {
        write!(out, "{token}").expect("write to Vec");
        for x in table.row(i) {
            write!(out, " {x}").expect("write to Vec");
        }
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
