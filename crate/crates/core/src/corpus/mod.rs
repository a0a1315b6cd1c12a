//! Document collections: record I/O, tokenization, keyword canonicalization,
//! dataset splits and synthetic corpora.

mod keywords;
mod split;
mod synth;
mod tokenize;

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use keywords::{match_keywords, parse_keyword_spec, KeywordEntry, KeywordSpec, Pattern};
pub use split::{split_dataset, stratified_partition, SplitConfig};
pub use synth::{generate_synthetic, Rule, SynthConfig};
pub use tokenize::{light_stem, tokenize, TokenSeq, TokenizerOptions, STOPWORDS};

/// One text unit: title and body, optionally labeled relevant (1) or not (0).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

impl Document {
    pub fn new(id: impl Into<String>, title: impl Into<String>, body: impl Into<String>) -> Self {
        Document { id: id.into(), title: title.into(), body: body.into(), label: None }
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = Some(label);
        self
    }

    pub fn is_relevant(&self) -> Option<bool> {
        self.label.map(|l| l == 1)
    }
}

/// Reads one JSON record per line. Blank lines are ignored.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        if doc.id.is_empty() {
            return Err(Error::Parse { line: line_no, message: "empty document id".into() });
        }
        if let Some(label) = doc.label {
            if label > 1 {
                return Err(Error::Parse { line: line_no, message: format!("label must be 0 or 1, got {label}") });
            }
        }
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId(doc.id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus<W: Write>(mut writer: W, docs: &[Document]) -> std::io::Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut writer, doc)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn read_corpus_file(path: impl AsRef<std::path::Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(std::io::BufReader::new(file))
}

pub fn read_keyword_spec_file(path: impl AsRef<std::path::Path>) -> Result<KeywordSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_keyword_spec(&text)
}

/// Fails on the first unlabeled document.
pub fn labels(docs: &[Document]) -> Result<Vec<u8>> {
    docs.iter().map(|d| d.label.ok_or_else(|| Error::Unlabeled(d.id.clone()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_labeled_record() {
        let docs = parse_corpus(r#"{"id":"d1","title":"T","body":"B","label":1}"#.as_bytes()).unwrap();
        assert_eq!(docs, vec![Document::new("d1", "T", "B").with_label(1)]);
    }

    #[test]
    fn empty_stream_is_empty_corpus() {
        assert!(parse_corpus("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn unlabeled_record_has_no_label() {
        let docs = parse_corpus(r#"{"id":"x","title":"","body":"b"}"#.as_bytes()).unwrap();
        assert_eq!(docs[0].label, None);
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = "{\"id\":\"d1\",\"title\":\"a\",\"body\":\"b\"}\n{\"id\":\"d1\",\"title\":\"c\",\"body\":\"d\"}\n";
        assert!(matches!(parse_corpus(text.as_bytes()), Err(Error::DuplicateId(id)) if id == "d1"));
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = "{\"id\":\"d1\",\"title\":\"a\",\"body\":\"b\"}\n\nnot json\n";
        match parse_corpus(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_label_rejected() {
        let text = r#"{"id":"d1","title":"a","body":"b","label":2}"#;
        assert!(matches!(parse_corpus(text.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn write_then_parse_round_trips() {
        let docs =
            vec![Document::new("a", "Title", "body \"quoted\" £5").with_label(0), Document::new("b", "", "unlabeled")];
        let mut buf = Vec::new();
        write_corpus(&mut buf, &docs).unwrap();
        assert_eq!(parse_corpus(buf.as_slice()).unwrap(), docs);
    }
}
