//! Vocabulary, trainable word-embedding table and the fixed-shape embedded
//! text matrix.

use std::collections::HashMap;
use std::io::BufRead;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenSeq;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

pub const DEFAULT_DIM: usize = 50;
pub const DEFAULT_SEQ_LEN: usize = 500;
pub const DEFAULT_MIN_FREQ: usize = 2;
pub const INIT_RANGE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.words
    }
}

impl Vocab {
    /// Number of rows including padding and unknown.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 2
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    /// Ids of the first `m` tokens.
    pub fn encode(&self, seq: &TokenSeq, m: usize) -> Vec<usize> {
        seq.tokens.iter().take(m).map(|t| self.id(t)).collect()
    }
}

/// Indexes every token seen at least `min_freq` times, most frequent first,
/// ties broken lexicographically.
pub fn build_vocab<'a>(corpus: impl IntoIterator<Item = &'a TokenSeq>, min_freq: usize) -> Result<Vocab> {
    if min_freq == 0 {
        return Err(Error::Config("min_freq must be at least 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut docs = 0;
    for seq in corpus {
        docs += 1;
        for t in &seq.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    if docs == 0 {
        return Err(Error::Data("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut kept: Vec<(&str, usize)> =
        counts.into_iter().filter(|&(w, c)| c >= min_freq && w != PAD_TOKEN && w != UNK_TOKEN).collect();
    kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let words = [PAD_TOKEN, UNK_TOKEN].into_iter().chain(kept.into_iter().map(|(w, _)| w)).map(str::to_string);
    Ok(Vocab::from(words.collect::<Vec<_>>()))
}

/// |vocab| × n table; row [`PAD`] is all zeros and never trained.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable<T> {
    pub matrix: Array2<T>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Overwrites rows of known words from a `word v1 … vn` text file.
    /// Returns the number of rows replaced.
    pub fn load_pretrained<R: BufRead>(&mut self, vocab: &Vocab, reader: R) -> Result<usize> {
        let n = self.dim();
        let mut loaded = 0;
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values: Vec<f64> = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
            if values.len() != n {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {n} values for {word:?}, found {}", values.len()),
                });
            }
            let id = vocab.id(word);
            if id == UNK && word != UNK_TOKEN || id == PAD {
                continue;
            }
            for (dst, v) in self.matrix.row_mut(id).iter_mut().zip(values) {
                *dst = T::lit(v);
            }
            loaded += 1;
        }
        Ok(loaded)
    }
}

/// Uniform in ±[`INIT_RANGE`] from a seeded generator, padding row zero.
pub fn init_embeddings<T: Scalar>(vocab: &Vocab, n: usize, seed: u64) -> Result<EmbeddingTable<T>> {
    if n == 0 {
        return Err(Error::Config("embedding dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix =
        Array2::from_shape_simple_fn((vocab.len(), n), || T::lit(rng.random_range(-INIT_RANGE..=INIT_RANGE)));
    matrix.row_mut(PAD).fill(T::zero());
    Ok(EmbeddingTable { matrix })
}

/// m × n matrix for one document; rows past the document are padding.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedText<T> {
    pub matrix: Array2<T>,
    /// Ids of the rows actually filled (at most m).
    pub ids: Vec<usize>,
}

pub fn embed_ids<T: Scalar>(ids: &[usize], table: &Array2<T>, m: usize) -> EmbeddedText<T> {
    let n = table.ncols();
    let used = &ids[..ids.len().min(m)];
    let mut matrix = Array2::zeros((m, n));
    for (r, &id) in used.iter().enumerate() {
        matrix.row_mut(r).assign(&table.row(id));
    }
    EmbeddedText { matrix, ids: used.to_vec() }
}

pub fn embed<T: Scalar>(seq: &TokenSeq, table: &EmbeddingTable<T>, vocab: &Vocab, m: usize) -> EmbeddedText<T> {
    embed_ids(&vocab.encode(seq, m), &table.matrix, m)
}
