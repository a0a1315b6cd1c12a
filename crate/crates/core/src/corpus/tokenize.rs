use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Token stream of one document plus, once keywords are matched, the
/// positions of each canonical keyword.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
    pub keyword_occurrences: BTreeMap<String, Vec<usize>>,
}

impl TokenSeq {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TokenSeq { tokens: tokens.into_iter().map(Into::into).collect(), keyword_occurrences: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_keyword_at(&self, pos: usize) -> bool {
        self.keyword_occurrences.values().any(|ps| ps.binary_search(&pos).is_ok())
    }

    /// Applies stemming / stopword removal to non-keyword tokens and
    /// re-indexes keyword positions.
    pub fn normalize(&self, opts: &TokenizerOptions) -> TokenSeq {
        if !opts.stem && !opts.remove_stopwords {
            return self.clone();
        }
        let mut owner = vec![None; self.tokens.len()];
        for (kw, ps) in &self.keyword_occurrences {
            for &p in ps {
                owner[p] = Some(kw.as_str());
            }
        }
        let mut out = TokenSeq::default();
        for (tok, kw) in self.tokens.iter().zip(&owner) {
            match kw {
                Some(kw) => {
                    out.keyword_occurrences.entry((*kw).to_string()).or_default().push(out.tokens.len());
                    out.tokens.push(tok.clone());
                }
                None => {
                    if opts.remove_stopwords && STOPWORDS.binary_search(&tok.as_str()).is_ok() {
                        continue;
                    }
                    out.tokens.push(if opts.stem { light_stem(tok) } else { tok.clone() });
                }
            }
        }
        out
    }
}

/// Optional text normalization applied after keyword matching. Both off by default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerOptions {
    pub stem: bool,
    pub remove_stopwords: bool,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}')
}

/// Lowercased word tokens of `title` followed by `body`.
///
/// Words are runs of letters and digits, optionally joined by an inner hyphen
/// or apostrophe. `£`, `$` and the shilling mark `/-` survive as tokens of
/// their own; every other symbol separates tokens.
pub fn tokenize(title: &str, body: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    scan(title, &mut tokens);
    scan(body, &mut tokens);
    TokenSeq::from_tokens(tokens)
}

fn scan(text: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '£' || c == '$' {
            out.push(c.to_string());
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'-') {
            out.push("/-".to_string());
            i += 2;
        } else if is_word_char(c) {
            let start = i;
            i += 1;
            loop {
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
                if i + 1 < chars.len() && is_joiner(chars[i]) && is_word_char(chars[i + 1]) {
                    i += 1;
                } else {
                    break;
                }
            }
            let word: String = chars[start..i].iter().collect();
            out.push(word.to_lowercase());
        } else {
            i += 1;
        }
    }
}

/// Plural-stripping stemmer: `ies`→`y`, `es`→`e`, `s`→`` with the usual exceptions.
pub fn light_stem(word: &str) -> String {
    let n = word.len();
    if n > 3 && word.ends_with("ies") && !word.ends_with("eies") && !word.ends_with("aies") {
        return format!("{}y", &word[..n - 3]);
    }
    if n > 3 && word.ends_with("es") && !(word.ends_with("aes") || word.ends_with("ees") || word.ends_with("oes")) {
        return word[..n - 1].to_string();
    }
    if n > 2 && word.ends_with('s') && !(word.ends_with("us") || word.ends_with("ss")) {
        return word[..n - 1].to_string();
    }
    word.to_string()
}

/// Sorted; searched with `binary_search`.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been", "but", "by", "can",
    "could", "did", "do", "for", "from", "had", "has", "have", "he", "her", "his", "i", "if", "in", "into", "is", "it",
    "its", "more", "no", "not", "of", "on", "one", "or", "other", "our", "out", "she", "so", "some", "than", "that",
    "the", "their", "them", "then", "there", "these", "they", "this", "to", "up", "was", "we", "were", "what", "when",
    "which", "who", "will", "with", "would", "you",
];

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(title: &str, body: &str) -> Vec<String> {
        tokenize(title, body).tokens
    }

    #[test]
    fn lowercases_and_strips_punctuation() {
        assert_eq!(toks("", "Skull sold!"), ["skull", "sold"]);
    }

    #[test]
    fn keeps_currency_marks() {
        assert_eq!(toks("A", "£5 paid"), ["a", "£", "5", "paid"]);
        assert_eq!(toks("", "price 10/- or $3"), ["price", "10", "/-", "or", "$", "3"]);
    }

    #[test]
    fn empty_input() {
        assert!(toks("", "").is_empty());
    }

    #[test]
    fn intra_word_joiners() {
        assert_eq!(
            toks("", "half-caste o'brien -dash trailing- 'quote'"),
            ["half-caste", "o'brien", "dash", "trailing", "quote"]
        );
    }

    #[test]
    fn stopwords_sorted() {
        assert!(STOPWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn stemmer_cases() {
        assert_eq!(light_stem("skulls"), "skull");
        assert_eq!(light_stem("bodies"), "body");
        assert_eq!(light_stem("graves"), "grave");
        assert_eq!(light_stem("glass"), "glass");
        assert_eq!(light_stem("census"), "census");
        assert_eq!(light_stem("heroes"), "heroe");
    }

    #[test]
    fn normalize_preserves_keywords() {
        let mut seq = TokenSeq::from_tokens(["the", "skulls", "were", "sold"]);
        seq.keyword_occurrences.insert("sold".into(), vec![3]);
        let out = seq.normalize(&TokenizerOptions { stem: true, remove_stopwords: true });
        assert_eq!(out.tokens, ["skull", "sold"]);
        assert_eq!(out.keyword_occurrences["sold"], vec![1]);
    }
}
