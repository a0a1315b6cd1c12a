//! Document → features → model, with the preprocessing fingerprint that
//! ties a trained model to the exact settings its features were built with.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::centrality::{apply_ablation, document_rows, AblationMask, EikMatrix, EikRow, Scaling};
use crate::corpus::{stratified_partition, Document, KeywordSpec, TokenSeq, TokenizerOptions};
use crate::embedding::{
    build_vocab, init_embeddings, EmbeddingTable, Vocab, DEFAULT_DIM, DEFAULT_MIN_FREQ, DEFAULT_SEQ_LEN,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricsReport};
use crate::graph::DEFAULT_WINDOW;
use crate::nn::{predict_examples, train, Architecture, Example, ModelParams, TrainConfig, TrainHistory, Variant};
use crate::scalar::Scalar;

/// Every setting that changes what the network sees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub spec: KeywordSpec,
    pub window: usize,
    pub scaling: Scaling,
    /// Text rows (m).
    pub seq_len: usize,
    /// Embedding columns (n).
    pub embedding_dim: usize,
    pub min_freq: usize,
    pub tokenizer: TokenizerOptions,
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Preprocessing {
    pub fn new(spec: KeywordSpec) -> Self {
        Preprocessing {
            spec,
            window: DEFAULT_WINDOW,
            scaling: Scaling::default(),
            seq_len: DEFAULT_SEQ_LEN,
            embedding_dim: DEFAULT_DIM,
            min_freq: DEFAULT_MIN_FREQ,
            tokenizer: TokenizerOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Config(format!("window must be at least 2, got {}", self.window)));
        }
        if self.min_freq == 0 {
            return Err(Error::Config("min_freq must be at least 1".into()));
        }
        if self.embedding_dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        self.architecture().validate(Variant::Inn)
    }

    /// Full-size network for these settings.
    pub fn architecture(&self) -> Architecture {
        Architecture::standard(self.embedding_dim, self.seq_len, self.spec.len())
    }

    /// Hash of the settings alone; keys the knowledge-matrix cache.
    pub fn config_fingerprint(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("serializable"))
    }

    /// Hash of the settings and the vocabulary.
    pub fn fingerprint(&self, vocab: &Vocab) -> String {
        sha256_hex(&serde_json::to_vec(&(self, vocab)).expect("serializable"))
    }

    pub fn analyze(&self, doc: &Document) -> Result<AnalyzedDoc> {
        let (seq, rows) = document_rows::<f64>(doc, &self.spec, self.window, &self.tokenizer)?;
        Ok(AnalyzedDoc { id: doc.id.clone(), label: doc.label, seq, rows })
    }

    pub fn analyze_corpus(&self, docs: &[Document]) -> Result<Vec<AnalyzedDoc>> {
        docs.iter().map(|d| self.analyze(d)).collect()
    }
}

/// A tokenized document with its raw keyword scores.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyzedDoc {
    pub id: String,
    pub label: Option<u8>,
    pub seq: TokenSeq,
    pub rows: Vec<EikRow<f64>>,
}

pub fn fit_vocab(docs: &[AnalyzedDoc], pre: &Preprocessing) -> Result<Vocab> {
    build_vocab(docs.iter().map(|d| &d.seq), pre.min_freq)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DocFeatures<T> {
    pub id: String,
    pub label: Option<u8>,
    pub token_ids: Vec<usize>,
    pub eik: EikMatrix<T>,
}

/// Network inputs for a corpus, stamped with the fingerprint of the
/// preprocessing and vocabulary that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet<T> {
    pub fingerprint: String,
    pub docs: Vec<DocFeatures<T>>,
}

pub fn featurize<T: Scalar>(docs: &[AnalyzedDoc], pre: &Preprocessing, vocab: &Vocab) -> FeatureSet<T> {
    let docs = docs
        .iter()
        .map(|d| {
            let rows: Vec<EikRow<T>> = d
                .rows
                .iter()
                .map(|r| EikRow {
                    keyword: r.keyword.clone(),
                    kc: T::lit(r.kc),
                    bc: T::lit(r.bc),
                    dc: r.dc,
                    prev: r.prev,
                })
                .collect();
            DocFeatures {
                id: d.id.clone(),
                label: d.label,
                token_ids: vocab.encode(&d.seq, pre.seq_len),
                eik: EikMatrix::from_rows(&rows, pre.scaling),
            }
        })
        .collect();
    FeatureSet { fingerprint: pre.fingerprint(vocab), docs }
}

impl<T: Scalar> FeatureSet<T> {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Labeled training examples with `mask` applied to the knowledge matrices.
    pub fn examples(&self, mask: &AblationMask) -> Result<Vec<Example<T>>> {
        self.docs
            .iter()
            .map(|d| {
                let label = d.label.ok_or_else(|| Error::Unlabeled(d.id.clone()))?;
                Ok(Example { label, ..unlabeled_example(d, mask) })
            })
            .collect()
    }

    pub fn labels(&self) -> Result<Vec<u8>> {
        self.docs.iter().map(|d| d.label.ok_or_else(|| Error::Unlabeled(d.id.clone()))).collect()
    }
}

fn unlabeled_example<T: Scalar>(d: &DocFeatures<T>, mask: &AblationMask) -> Example<T> {
    Example { id: d.id.clone(), token_ids: d.token_ids.clone(), eik: apply_ablation(&d.eik, mask).values, label: 0 }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<T> {
    pub id: String,
    pub score: T,
    pub relevant: bool,
}

/// Trained parameters together with everything needed to featurize new
/// documents the same way.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub params: ModelParams<T>,
    pub preprocessing: Preprocessing,
    pub vocab: Vocab,
    /// Knowledge-matrix columns zeroed in training and at prediction.
    pub mask: AblationMask,
}

impl<T: Scalar> Model<T> {
    pub fn fingerprint(&self) -> String {
        self.preprocessing.fingerprint(&self.vocab)
    }

    pub fn featurize(&self, docs: &[AnalyzedDoc]) -> FeatureSet<T> {
        featurize(docs, &self.preprocessing, &self.vocab)
    }

    /// Scores in `features` order. Fails if the features were built with
    /// different preprocessing or vocabulary.
    pub fn scores(&self, features: &FeatureSet<T>) -> Result<Vec<T>> {
        let expected = self.fingerprint();
        if features.fingerprint != expected {
            return Err(Error::FingerprintMismatch { model: expected, features: features.fingerprint.clone() });
        }
        let examples: Vec<_> = features.docs.iter().map(|d| unlabeled_example(d, &self.mask)).collect();
        predict_examples(&self.params, &examples)
    }

    /// `score >= threshold` is labeled relevant.
    pub fn predict(&self, features: &FeatureSet<T>, threshold: T) -> Result<Vec<Prediction<T>>> {
        let scores = self.scores(features)?;
        Ok(features
            .docs
            .iter()
            .zip(scores)
            .map(|(d, score)| Prediction { id: d.id.clone(), score, relevant: score >= threshold })
            .collect())
    }
}

const MAGIC: &[u8; 8] = b"INNMODEL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    variant: Variant,
    arch: Architecture,
    preprocessing: Preprocessing,
    vocab: Vocab,
    mask: AblationMask,
    fingerprint: Option<String>,
    /// Parameter tensors in storage order: name and element count.
    groups: Vec<(String, usize)>,
}

/// Serializes a model: magic, version, JSON header, little-endian f64
/// weights, SHA-256 of everything before it.
pub fn write_model<T: Scalar, W: Write>(model: &Model<T>, mut w: W) -> Result<()> {
    let params = &model.params;
    let header = Header {
        variant: params.variant,
        arch: params.arch.clone(),
        preprocessing: model.preprocessing.clone(),
        vocab: model.vocab.clone(),
        mask: model.mask.clone(),
        fingerprint: Some(model.fingerprint()),
        groups: params.groups().iter().map(|g| (g.name.clone(), g.values.len())).collect(),
    };
    let header = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(header.len() + 8 * params.parameter_count() + 64);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for g in params.groups() {
        for v in g.values {
            buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    w.write_all(&buf).map_err(|e| Error::io("<model>", e))
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Truncated(format!("ends inside the {what}")));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

pub fn read_model<T: Scalar, R: Read>(mut r: R) -> Result<Model<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io("<model>", e))?;
    let mut rest = bytes.as_slice();
    if rest.len() < MAGIC.len() || &rest[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic);
    }
    rest = &rest[MAGIC.len()..];
    let version = u32::from_le_bytes(take(&mut rest, 4, "version")?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, expected: FORMAT_VERSION });
    }
    let header_len = u64::from_le_bytes(take(&mut rest, 8, "header length")?.try_into().expect("8 bytes"));
    let header_len = usize::try_from(header_len).map_err(|_| Error::Truncated("header length overflows".into()))?;
    let header: Header = serde_json::from_slice(take(&mut rest, header_len, "header")?)
        .map_err(|e| Error::Truncated(format!("unreadable header: {e}")))?;
    let count: usize = header.groups.iter().map(|(_, n)| n).sum();
    let weights = take(&mut rest, count * 8, "weights")?;
    let trailer = take(&mut rest, 32, "checksum")?;
    if !rest.is_empty() {
        return Err(Error::Truncated(format!("{} unexpected trailing bytes", rest.len())));
    }
    let body_len = bytes.len() - 32;
    if Sha256::digest(&bytes[..body_len]).as_slice() != trailer {
        return Err(Error::Truncated("checksum mismatch".into()));
    }
    let fingerprint = header.fingerprint.ok_or(Error::MissingFingerprint)?;
    let expected = header.preprocessing.fingerprint(&header.vocab);
    if fingerprint != expected {
        return Err(Error::FingerprintMismatch { model: fingerprint, features: expected });
    }

    let mut params = ModelParams::<T>::zeros(&header.arch, header.variant, header.vocab.len())?;
    let layout: Vec<(String, usize)> = params.groups().iter().map(|g| (g.name.clone(), g.values.len())).collect();
    if layout != header.groups {
        return Err(Error::Shape("stored tensors do not match the declared architecture".into()));
    }
    params.load_flat(weights.chunks_exact(8).map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes")))))?;
    Ok(Model { params, preprocessing: header.preprocessing, vocab: header.vocab, mask: header.mask })
}

pub fn save_model<T: Scalar>(model: &Model<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(model, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<Model<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(file))
}

/// One train-and-evaluate run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub mask: AblationMask,
    pub train: TrainConfig,
    /// Share of the training pool held out for early stopping (0 = none).
    pub val_fraction: f64,
    /// Seeds the validation split, embedding and weight initialization.
    pub seed: u64,
    /// Replaces the full-size network, e.g. with smaller banks.
    pub arch: Option<Architecture>,
}

impl ExperimentConfig {
    pub fn new(variant: Variant) -> Self {
        ExperimentConfig {
            variant,
            mask: AblationMask::none(),
            train: TrainConfig::default(),
            val_fraction: 0.1,
            seed: 0,
            arch: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome<T> {
    pub model: Model<T>,
    pub history: TrainHistory,
    pub test_scores: Vec<T>,
    pub test_report: MetricsReport,
}

/// Splits off validation data, fits the vocabulary on the remaining
/// training documents, trains and scores the test documents.
///
/// `pretrained` is the text of a `word v1 … vn` vector file; listed words
/// start from their vectors, the rest from the seeded random table.
pub fn run_experiment<T: Scalar>(
    pre: &Preprocessing,
    train_docs: &[AnalyzedDoc],
    test_docs: &[AnalyzedDoc],
    cfg: &ExperimentConfig,
    pretrained: Option<&str>,
) -> Result<Outcome<T>> {
    pre.validate()?;
    if !(0.0..1.0).contains(&cfg.val_fraction) {
        return Err(Error::Config(format!("validation fraction {} outside [0, 1)", cfg.val_fraction)));
    }
    let (fit_idx, val_idx) = stratified_partition(train_docs, |d| d.label, 1.0 - cfg.val_fraction, cfg.seed)?;
    if fit_idx.is_empty() {
        return Err(Error::Data("no training documents left after the validation split".into()));
    }
    let fit: Vec<AnalyzedDoc> = fit_idx.iter().map(|&i| train_docs[i].clone()).collect();
    let val: Vec<AnalyzedDoc> = val_idx.iter().map(|&i| train_docs[i].clone()).collect();

    let vocab = fit_vocab(&fit, pre)?;
    let arch = cfg.arch.clone().unwrap_or_else(|| pre.architecture());
    if arch.seq_len != pre.seq_len || arch.embedding_dim != pre.embedding_dim || arch.keywords != pre.spec.len() {
        return Err(Error::Config("architecture shape disagrees with the preprocessing settings".into()));
    }
    let embedding: Option<Array2<T>> = if cfg.variant.uses_text() {
        let mut table: EmbeddingTable<T> = init_embeddings(&vocab, pre.embedding_dim, cfg.seed)?;
        if let Some(text) = pretrained {
            table.load_pretrained(&vocab, text.as_bytes())?;
        }
        Some(table.matrix)
    } else {
        None
    };
    let init = ModelParams::init(&arch, cfg.variant, embedding, cfg.seed.wrapping_add(1))?;

    let fit_x = featurize::<T>(&fit, pre, &vocab).examples(&cfg.mask)?;
    let val_x = featurize::<T>(&val, pre, &vocab).examples(&cfg.mask)?;
    let (params, history) = train(init, &cfg.train, &fit_x, &val_x)?;

    let model = Model { params, preprocessing: pre.clone(), vocab, mask: cfg.mask.clone() };
    let test = model.featurize(test_docs);
    let test_scores = model.scores(&test)?;
    let test_report = evaluate(&test_scores, &test.labels()?, T::lit(cfg.train.threshold))?;
    Ok(Outcome { model, history, test_scores, test_report })
}
