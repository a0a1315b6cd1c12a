use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::tokenize::TokenSeq;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    /// Whole-token equality.
    Exact(String),
    /// Whole token starting with the stem (`aborig*`).
    Prefix(String),
    /// Consecutive tokens, collapsed into one canonical token.
    Phrase(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeywordEntry {
    pub canonical: String,
    pub pattern: Pattern,
    pub group: String,
}

impl KeywordEntry {
    /// Number of tokens this entry consumes at the head of `tokens` (0 = no match).
    /// A token that already is the canonical name matches itself.
    fn match_len(&self, tokens: &[String]) -> usize {
        let Some(first) = tokens.first() else { return 0 };
        if *first == self.canonical {
            return 1;
        }
        match &self.pattern {
            Pattern::Exact(word) => usize::from(first == word),
            Pattern::Prefix(stem) => usize::from(first.starts_with(stem.as_str())),
            Pattern::Phrase(words) => {
                if tokens.len() >= words.len() && tokens.iter().zip(words).all(|(t, w)| t == w) {
                    words.len()
                } else {
                    0
                }
            }
        }
    }
}

/// Ordered expert keywords. Entry order fixes the row order of every
/// knowledge matrix built from this spec.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeywordSpec {
    entries: Vec<KeywordEntry>,
}

impl KeywordSpec {
    pub fn new(entries: Vec<KeywordEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::KeywordSpec("no keyword patterns".into()));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if e.group.is_empty() {
                return Err(Error::KeywordSpec(format!("keyword {:?} has an empty group", e.canonical)));
            }
            if !seen.insert(e.canonical.as_str()) {
                return Err(Error::KeywordSpec(format!("duplicate keyword {:?}", e.canonical)));
            }
        }
        Ok(KeywordSpec { entries })
    }

    pub fn entries(&self) -> &[KeywordEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn canonical_names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.canonical.as_str())
    }

    pub fn position(&self, canonical: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.canonical == canonical)
    }

    pub fn group_of(&self, canonical: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.canonical == canonical).map(|e| e.group.as_str())
    }

    pub fn groups(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.group.as_str()) {
                out.push(&e.group);
            }
        }
        out
    }

    /// Canonical form of a single token, if it matches any single-token entry.
    pub fn canonicalize(&self, token: &str) -> Option<&str> {
        let tokens = [token.to_string()];
        self.entries.iter().find(|e| e.match_len(&tokens) > 0).map(|e| e.canonical.as_str())
    }
}

fn parse_pattern(raw: &str, line: usize) -> Result<Option<(String, Pattern)>> {
    let cleaned: String =
        raw.trim().trim_matches(|c| matches!(c, '[' | ']' | '(' | ')')).trim().trim_end_matches('.').to_lowercase();
    let words: Vec<&str> = cleaned.split_whitespace().collect();
    if words.is_empty() {
        return Ok(None);
    }
    let canonical = words.join(" ");
    let bad = |msg: &str| Error::Parse { line, message: format!("pattern {canonical:?}: {msg}") };
    if words.len() > 1 {
        if canonical.contains('*') {
            return Err(bad("wildcards are not supported inside phrases"));
        }
        let words = words.into_iter().map(str::to_string).collect();
        return Ok(Some((canonical, Pattern::Phrase(words))));
    }
    match canonical.find('*') {
        None => Ok(Some((canonical.clone(), Pattern::Exact(canonical)))),
        Some(i) if i + 1 == canonical.len() && i > 0 => {
            let stem = canonical[..i].to_string();
            Ok(Some((canonical, Pattern::Prefix(stem))))
        }
        Some(_) => Err(bad("'*' is only allowed as a trailing wildcard")),
    }
}

/// Parses `[Group]` headers followed by comma- or semicolon-separated
/// patterns. `#` starts a comment. Bracketed sublists are flattened into
/// independent keywords.
pub fn parse_keyword_spec(text: &str) -> Result<KeywordSpec> {
    let mut entries = Vec::new();
    let mut group: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') && !line.contains(',') {
            let name = line[1..line.len() - 1].trim();
            if name.is_empty() {
                return Err(Error::Parse { line: line_no, message: "empty group name".into() });
            }
            group = Some(name.to_string());
            continue;
        }
        let Some(group) = &group else {
            return Err(Error::Parse { line: line_no, message: "pattern before any [Group] header".into() });
        };
        for raw in line.split([',', ';']) {
            if let Some((canonical, pattern)) = parse_pattern(raw, line_no)? {
                entries.push(KeywordEntry { canonical, pattern, group: group.clone() });
            }
        }
    }
    KeywordSpec::new(entries)
}

/// Rewrites keyword tokens to their canonical names and records positions.
///
/// Scans left to right; at each position the longest matching entry wins,
/// the earlier entry on equal length. Phrases collapse into a single token.
pub fn match_keywords(seq: &TokenSeq, spec: &KeywordSpec) -> TokenSeq {
    let tokens = &seq.tokens;
    let mut out = TokenSeq::default();
    let mut i = 0;
    while i < tokens.len() {
        let mut best: Option<(usize, &KeywordEntry)> = None;
        for entry in spec.entries() {
            let len = entry.match_len(&tokens[i..]);
            if len > best.map_or(0, |(l, _)| l) {
                best = Some((len, entry));
            }
        }
        match best {
            Some((len, entry)) => {
                out.keyword_occurrences.entry(entry.canonical.clone()).or_default().push(out.tokens.len());
                out.tokens.push(entry.canonical.clone());
                i += len;
            }
            None => {
                out.tokens.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}
