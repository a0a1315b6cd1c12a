//! Keyword scores and the per-document knowledge matrix.
//!
//! Each keyword of the spec gets one row `[KC, BC, DC, PREV]`:
//!
//! * **KC** – keyword centrality: `a + Σ a / d(w, v)` over the other spec
//!   keywords `v` present in the graph; unreachable keywords add nothing.
//! * **BC** – betweenness over unordered pairs, endpoints excluded.
//! * **DC** – number of distinct co-occurring words.
//! * **PREV** – occurrence count after canonicalization.
//!
//! Keywords missing from the document get an all-zero row, so the matrix
//! shape depends only on the spec.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{match_keywords, tokenize, Document, KeywordSpec, TokenSeq, TokenizerOptions};
use crate::error::{Error, Result};
use crate::graph::{build_cooccurrence, CooccurrenceGraph};
use crate::scalar::{Scalar, Weight};

pub const EIK_COLUMNS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Column {
    Kc,
    Bc,
    Dc,
    Prev,
}

impl Column {
    pub const ALL: [Column; 4] = [Column::Kc, Column::Bc, Column::Dc, Column::Prev];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Column::Kc => "KC",
            Column::Bc => "BC",
            Column::Dc => "DC",
            Column::Prev => "PREV",
        }
    }
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Column::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown knowledge column {s:?}")))
    }
}

/// Document id with one row per keyword.
pub type DocRows<T> = (String, Vec<EikRow<T>>);

/// Raw scores of one keyword in one document.
#[derive(Clone, Debug, PartialEq)]
pub struct EikRow<T> {
    pub keyword: String,
    pub kc: T,
    pub bc: T,
    pub dc: usize,
    pub prev: usize,
}

impl<T: Weight> EikRow<T> {
    pub fn zero(keyword: impl Into<String>) -> Self {
        EikRow { keyword: keyword.into(), kc: T::zero(), bc: T::zero(), dc: 0, prev: 0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scaling {
    None,
    #[default]
    Log1p,
}

impl Scaling {
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Scaling::None => x,
            Scaling::Log1p => x.ln_1p(),
        }
    }
}

impl FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "raw" => Ok(Scaling::None),
            "log1p" => Ok(Scaling::Log1p),
            _ => Err(Error::Config(format!("unknown scaling {s:?} (expected none or log1p)"))),
        }
    }
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scaling::None => "none",
            Scaling::Log1p => "log1p",
        })
    }
}

/// K×4 knowledge matrix, rows in keyword-spec order.
#[derive(Clone, Debug, PartialEq)]
pub struct EikMatrix<T> {
    pub keywords: Vec<String>,
    pub values: Array2<T>,
    pub scaling: Scaling,
}

impl<T: Scalar> EikMatrix<T> {
    pub fn from_rows(rows: &[EikRow<T>], scaling: Scaling) -> Self {
        let mut values = Array2::zeros((rows.len(), EIK_COLUMNS));
        for (i, r) in rows.iter().enumerate() {
            let raw = [r.kc, r.bc, T::from_count(r.dc), T::from_count(r.prev)];
            for (j, x) in raw.into_iter().enumerate() {
                values[[i, j]] = scaling.apply(x);
            }
        }
        EikMatrix { keywords: rows.iter().map(|r| r.keyword.clone()).collect(), values, scaling }
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn column(&self, col: Column) -> Vec<T> {
        self.values.column(col.index()).to_vec()
    }
}

/// Columns to zero for an ablation variant.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationMask {
    pub zeroed_columns: BTreeSet<Column>,
}

impl AblationMask {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn zero(columns: impl IntoIterator<Item = Column>) -> Self {
        AblationMask { zeroed_columns: columns.into_iter().collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.zeroed_columns.is_empty()
    }
}

pub fn apply_ablation<T: Scalar>(m: &EikMatrix<T>, mask: &AblationMask) -> EikMatrix<T> {
    let mut out = m.clone();
    for col in &mask.zeroed_columns {
        out.values.column_mut(col.index()).fill(T::zero());
    }
    out
}

/// Initial activation plus activation `a / d` received from every other
/// keyword of `keywords` reachable in `g`.
pub fn keyword_centrality<T: Weight>(g: &CooccurrenceGraph, w: &str, keywords: &[&str], a: T) -> Result<T> {
    let source = g.node_index(w).ok_or_else(|| Error::MissingNode(w.to_string()))?;
    let dist = g.distances_from(source);
    Ok(kc_from_distances(g, w, keywords, &dist, a))
}

fn kc_from_distances<T: Weight>(g: &CooccurrenceGraph, w: &str, keywords: &[&str], dist: &[Option<usize>], a: T) -> T {
    let mut total = a.clone();
    for &other in keywords {
        if other == w {
            continue;
        }
        if let Some(d) = g.node_index(other).and_then(|i| dist[i]) {
            total = total + a.clone() / T::from_count(d);
        }
    }
    total
}

pub fn prevalence(seq: &TokenSeq, w: &str) -> usize {
    seq.keyword_occurrences.get(w).map_or(0, Vec::len)
}

/// Raw scores for every spec keyword of an already keyword-matched sequence.
pub fn eik_rows<T: Weight>(seq: &TokenSeq, spec: &KeywordSpec, window: usize) -> Result<Vec<EikRow<T>>> {
    let g = build_cooccurrence(seq, window)?;
    Ok(eik_rows_from_graph(&g, seq, spec))
}

pub fn eik_rows_from_graph<T: Weight>(g: &CooccurrenceGraph, seq: &TokenSeq, spec: &KeywordSpec) -> Vec<EikRow<T>> {
    let keywords: Vec<&str> = spec.canonical_names().collect();
    let present = keywords.iter().any(|k| g.contains(k));
    let bc = if present { g.betweenness_all::<T>() } else { Vec::new() };
    keywords
        .iter()
        .map(|&kw| match g.node_index(kw) {
            None => EikRow::zero(kw),
            Some(i) => {
                let dist = g.distances_from(i);
                EikRow {
                    keyword: kw.to_string(),
                    kc: kc_from_distances(g, kw, &keywords, &dist, T::one()),
                    bc: bc[i].clone(),
                    dc: g.degree(kw).expect("node present"),
                    prev: prevalence(seq, kw),
                }
            }
        })
        .collect()
}

/// Tokenize, canonicalize keywords, normalize, build the graph and score
/// every keyword.
pub fn document_rows<T: Weight>(
    doc: &Document,
    spec: &KeywordSpec,
    window: usize,
    opts: &TokenizerOptions,
) -> Result<(TokenSeq, Vec<EikRow<T>>)> {
    let seq = match_keywords(&tokenize(&doc.title, &doc.body), spec).normalize(opts);
    let rows = eik_rows(&seq, spec, window)?;
    Ok((seq, rows))
}

pub fn build_eik_matrix<T: Scalar>(
    doc: &Document,
    spec: &KeywordSpec,
    window: usize,
    scaling: Scaling,
) -> Result<EikMatrix<T>> {
    let (_, rows) = document_rows::<T>(doc, spec, window, &TokenizerOptions::default())?;
    Ok(EikMatrix::from_rows(&rows, scaling))
}

#[derive(Debug, Serialize, Deserialize)]
struct EikRecord {
    doc_id: String,
    keyword: String,
    kc: f64,
    bc: f64,
    dc: usize,
    prev: usize,
}

/// Writes raw (unscaled) rows as TSV: `doc_id keyword kc bc dc prev`,
/// preceded by a `# fingerprint=` comment line.
pub fn write_eik_records<W: Write, T: Scalar>(
    mut writer: W,
    fingerprint: &str,
    docs: &[(String, Vec<EikRow<T>>)],
) -> Result<()> {
    writeln!(writer, "# fingerprint={fingerprint}").map_err(|e| Error::io("<eik export>", e))?;
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(writer);
    for (doc_id, rows) in docs {
        for r in rows {
            w.serialize(EikRecord {
                doc_id: doc_id.clone(),
                keyword: r.keyword.clone(),
                kc: r.kc.to_f64_lossy(),
                bc: r.bc.to_f64_lossy(),
                dc: r.dc,
                prev: r.prev,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io("<eik export>", e))?;
    Ok(())
}

/// Reads an export back, grouped by document in file order. Returns the
/// fingerprint from the header comment, if any.
pub fn read_eik_records<R: Read, T: Scalar>(reader: R) -> Result<(Option<String>, Vec<DocRows<T>>)> {
    let mut text = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut text).map_err(|e| Error::io("<eik export>", e))?;
    let fingerprint = text.lines().next().and_then(|l| l.strip_prefix("# fingerprint=")).map(str::to_string);
    let mut r = csv::ReaderBuilder::new().delimiter(b'\t').comment(Some(b'#')).from_reader(text.as_bytes());
    let mut out: Vec<(String, Vec<EikRow<T>>)> = Vec::new();
    for rec in r.deserialize::<EikRecord>() {
        let rec = rec?;
        let row = EikRow { keyword: rec.keyword, kc: T::lit(rec.kc), bc: T::lit(rec.bc), dc: rec.dc, prev: rec.prev };
        match out.last_mut() {
            Some((id, rows)) if *id == rec.doc_id => rows.push(row),
            _ => out.push((rec.doc_id, vec![row])),
        }
    }
    Ok((fingerprint, out))
}
