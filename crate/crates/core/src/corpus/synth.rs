//! Synthetic labeled corpora whose labels follow an exact keyword rule.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::keywords::{match_keywords, KeywordSpec, Pattern};
use super::tokenize::{tokenize, TokenSeq};
use super::Document;
use crate::error::{Error, Result};

/// Labeling rule applied to the canonicalized token stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Two distinct keywords less than `window` positions apart.
    Proximity { window: usize },
    /// Keywords from at least two groups anywhere in the document.
    CrossGroup,
    /// Some keyword occurs at least `threshold` times.
    Frequency { threshold: usize },
}

impl Rule {
    pub fn evaluate(&self, seq: &TokenSeq, spec: &KeywordSpec) -> bool {
        let occ = &seq.keyword_occurrences;
        match *self {
            Rule::Proximity { window } => {
                let mut hits: Vec<(usize, &str)> =
                    occ.iter().flat_map(|(k, ps)| ps.iter().map(move |&p| (p, k.as_str()))).collect();
                hits.sort_unstable();
                hits.iter().enumerate().any(|(i, &(p, k))| {
                    hits[i + 1..].iter().take_while(|&&(q, _)| q - p < window).any(|&(_, k2)| k2 != k)
                })
            }
            Rule::CrossGroup => {
                let groups: BTreeSet<&str> = occ.keys().filter_map(|k| spec.group_of(k)).collect();
                groups.len() >= 2
            }
            Rule::Frequency { threshold } => occ.values().any(|ps| ps.len() >= threshold),
        }
    }

    pub fn label_document(&self, doc: &Document, spec: &KeywordSpec) -> bool {
        self.evaluate(&match_keywords(&tokenize(&doc.title, &doc.body), spec), spec)
    }

    /// Parses `proximity`, `cross_group` or `frequency`, taking the numeric
    /// parameter from `param` (window or threshold).
    pub fn parse(name: &str, param: usize) -> Result<Rule> {
        match name {
            "proximity" => Ok(Rule::Proximity { window: param }),
            "cross_group" | "cross-group" => Ok(Rule::CrossGroup),
            "frequency" => Ok(Rule::Frequency { threshold: param }),
            other => Err(Error::Config(format!("unknown rule {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub n_docs: usize,
    pub vocab_size: usize,
    pub keywords: KeywordSpec,
    pub rule: Rule,
    pub seed: u64,
    /// Target fraction of relevant documents.
    pub balance: f64,
    pub balance_tolerance: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// Keyword occurrences injected per document (raised when a relevant
    /// document needs more to satisfy the rule).
    pub min_keywords: usize,
    pub max_keywords: usize,
}

impl SynthConfig {
    pub fn new(keywords: KeywordSpec, rule: Rule) -> Self {
        SynthConfig {
            n_docs: 400,
            vocab_size: 2000,
            keywords,
            rule,
            seed: 0,
            balance: 0.5,
            balance_tolerance: 0.1,
            min_len: 50,
            max_len: 500,
            min_keywords: 2,
            max_keywords: 4,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let k = self.keywords.len();
        if self.vocab_size < k {
            return bad(format!("vocab_size {} is smaller than the keyword count {k}", self.vocab_size));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad(format!("invalid length range {}..={}", self.min_len, self.max_len));
        }
        if self.min_keywords > self.max_keywords {
            return bad("min_keywords exceeds max_keywords".into());
        }
        if !(0.0..=1.0).contains(&self.balance) {
            return bad(format!("balance must be in [0, 1], got {}", self.balance));
        }
        let needed = match self.rule {
            Rule::Proximity { window } => {
                if window < 2 {
                    return bad("proximity window must be at least 2".into());
                }
                if k < 2 {
                    return bad("proximity rule needs at least two keywords".into());
                }
                // Negatives need room to keep distinct keywords a window apart.
                (self.max_keywords.max(2)) * window
            }
            Rule::CrossGroup => {
                if self.keywords.groups().len() < 2 {
                    return bad("cross-group rule needs keywords from at least two groups".into());
                }
                self.max_keywords.max(2)
            }
            Rule::Frequency { threshold } => {
                if threshold == 0 {
                    return bad("frequency threshold must be at least 1".into());
                }
                self.max_keywords.max(threshold)
            }
        };
        if needed > self.min_len {
            return bad(format!("min_len {} too short to place {needed} keyword positions", self.min_len));
        }
        Ok(())
    }
}

const SYLLABLES: [&str; 20] = [
    "ka", "lo", "mi", "ne", "pu", "ra", "si", "to", "vu", "ze", "ba", "de", "fi", "go", "hu", "ja", "ke", "li", "mo",
    "nu",
];

fn syllable_word(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.push_str(SYLLABLES[i % SYLLABLES.len()]);
        i /= SYLLABLES.len();
        if i == 0 {
            break;
        }
    }
    s
}

fn background_vocab(size: usize, spec: &KeywordSpec) -> Vec<String> {
    let mut out = Vec::with_capacity(size);
    let mut i = SYLLABLES.len() * SYLLABLES.len();
    while out.len() < size {
        let w = syllable_word(i);
        i += 1;
        if spec.canonicalize(&w).is_none() {
            out.push(w);
        }
    }
    out
}

const SUFFIXES: [&str; 7] = ["", "s", "al", "es", "ing", "ed", "ine"];

/// Surface forms per keyword that canonicalize back to that keyword.
fn surface_forms(spec: &KeywordSpec) -> Result<Vec<Vec<Vec<String>>>> {
    spec.entries()
        .iter()
        .map(|e| {
            let candidates: Vec<Vec<String>> = match &e.pattern {
                Pattern::Exact(w) => vec![vec![w.clone()]],
                Pattern::Prefix(stem) => SUFFIXES.iter().map(|s| vec![format!("{stem}{s}")]).collect(),
                Pattern::Phrase(ws) => vec![ws.clone()],
            };
            let forms: Vec<Vec<String>> = candidates
                .into_iter()
                .filter(|form| {
                    let seq = match_keywords(&tokenize("", &form.join(" ")), spec);
                    seq.tokens.len() == 1 && seq.tokens[0] == e.canonical
                })
                .collect();
            if forms.is_empty() {
                Err(Error::Config(format!("keyword {:?} has no realizable surface form", e.canonical)))
            } else {
                Ok(forms)
            }
        })
        .collect()
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    vocab: Vec<String>,
    forms: Vec<Vec<Vec<String>>>,
}

impl Generator<'_> {
    fn distinct_pair(&mut self, k: usize) -> (usize, usize) {
        let a = self.rng.random_range(0..k);
        let mut b = self.rng.random_range(0..k - 1);
        if b >= a {
            b += 1;
        }
        (a, b)
    }

    /// Keyword indices (into the spec) for one document.
    fn choose_keywords(&mut self, relevant: bool, count: usize) -> Vec<usize> {
        let k = self.cfg.keywords.len();
        let spec = &self.cfg.keywords;
        match self.cfg.rule {
            Rule::Proximity { .. } => {
                if count < 2 {
                    return (0..count).map(|_| self.rng.random_range(0..k)).collect();
                }
                let (a, b) = self.distinct_pair(k);
                let mut out = vec![a, b];
                out.extend((2..count).map(|_| self.rng.random_range(0..k)));
                out
            }
            Rule::CrossGroup => {
                let groups = spec.groups();
                if relevant {
                    let (ga, gb) = {
                        let a = self.rng.random_range(0..groups.len());
                        let mut b = self.rng.random_range(0..groups.len() - 1);
                        if b >= a {
                            b += 1;
                        }
                        (groups[a], groups[b])
                    };
                    let pick = |g: &str, rng: &mut ChaCha8Rng| {
                        let members: Vec<usize> = (0..k).filter(|&i| spec.entries()[i].group == g).collect();
                        *members.choose(rng).expect("group has members")
                    };
                    let mut out = vec![pick(ga, &mut self.rng), pick(gb, &mut self.rng)];
                    out.extend((2..count).map(|_| self.rng.random_range(0..k)));
                    out
                } else {
                    let g = *groups.choose(&mut self.rng).expect("nonempty groups");
                    let members: Vec<usize> = (0..k).filter(|&i| spec.entries()[i].group == g).collect();
                    (0..count).map(|_| *members.choose(&mut self.rng).expect("nonempty")).collect()
                }
            }
            Rule::Frequency { threshold } => {
                if relevant {
                    let hot = self.rng.random_range(0..k);
                    let mut out = vec![hot; threshold];
                    out.extend((threshold..count).map(|_| self.rng.random_range(0..k)));
                    out
                } else {
                    let mut counts = vec![0usize; k];
                    let mut out = Vec::new();
                    for _ in 0..count {
                        let open: Vec<usize> = (0..k).filter(|&i| counts[i] + 1 < threshold).collect();
                        let Some(&i) = open.choose(&mut self.rng) else { break };
                        counts[i] += 1;
                        out.push(i);
                    }
                    out
                }
            }
        }
    }

    /// Positions for the chosen keywords within a document of `len` slots.
    fn place(&mut self, relevant: bool, kws: &[usize], len: usize) -> Option<Vec<usize>> {
        let mut taken: Vec<(usize, usize)> = Vec::with_capacity(kws.len());
        let window = match self.cfg.rule {
            Rule::Proximity { window } => Some(window),
            _ => None,
        };
        for (slot, &kw) in kws.iter().enumerate() {
            let mut placed = None;
            for _ in 0..200 {
                let p = if let (Some(w), true, 1) = (window, relevant, slot) {
                    // Second keyword of a relevant document sits within the window of the first.
                    let first = taken[0].0;
                    let lo = first.saturating_sub(w - 1);
                    let hi = (first + w - 1).min(len - 1);
                    self.rng.random_range(lo..=hi)
                } else {
                    self.rng.random_range(0..len)
                };
                let free = taken.iter().all(|&(q, _)| q != p);
                let spaced = match (window, relevant) {
                    (Some(w), false) => taken.iter().all(|&(q, k)| k == kw || p.abs_diff(q) >= w),
                    _ => true,
                };
                if free && spaced {
                    placed = Some(p);
                    break;
                }
            }
            taken.push((placed?, kw));
        }
        Some(taken.into_iter().map(|(p, _)| p).collect())
    }

    fn document(&mut self, index: usize, relevant: bool) -> Result<Document> {
        let cfg = self.cfg;
        for _attempt in 0..100 {
            let len = self.rng.random_range(cfg.min_len..=cfg.max_len);
            let mut count = self.rng.random_range(cfg.min_keywords..=cfg.max_keywords);
            if relevant {
                count = count.max(match cfg.rule {
                    Rule::Proximity { .. } | Rule::CrossGroup => 2,
                    Rule::Frequency { threshold } => threshold,
                });
            }
            let kws = self.choose_keywords(relevant, count);
            let Some(positions) = self.place(relevant, &kws, len) else { continue };
            let mut slots: BTreeMap<usize, usize> = BTreeMap::new();
            for (&p, &kw) in positions.iter().zip(&kws) {
                slots.insert(p, kw);
            }
            let mut words: Vec<String> = Vec::with_capacity(len + 4);
            for p in 0..len {
                match slots.get(&p) {
                    Some(&kw) => {
                        let form = self.forms[kw].choose(&mut self.rng).expect("nonempty forms").clone();
                        words.extend(form);
                    }
                    None => words.push(self.vocab.choose(&mut self.rng).expect("nonempty vocab").clone()),
                }
            }
            let split = words.len().min(5);
            let doc = Document::new(format!("synth-{index:05}"), words[..split].join(" "), words[split..].join(" "));
            let label = cfg.rule.label_document(&doc, &cfg.keywords);
            return Ok(doc.with_label(u8::from(label)));
        }
        Err(Error::Config("could not place keywords; increase min_len or reduce max_keywords".into()))
    }
}

/// Generates a labeled corpus. Labels are computed by re-applying the rule
/// to the emitted text, so they are exact even if placement misses the target.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<Document>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_pos = (cfg.balance * cfg.n_docs as f64).round() as usize;
    let mut targets: Vec<bool> = (0..cfg.n_docs).map(|i| i < n_pos).collect();
    targets.shuffle(&mut rng);
    let mut gen = Generator {
        cfg,
        rng,
        vocab: background_vocab(cfg.vocab_size, &cfg.keywords),
        forms: surface_forms(&cfg.keywords)?,
    };
    let docs =
        targets.iter().enumerate().map(|(i, &relevant)| gen.document(i, relevant)).collect::<Result<Vec<_>>>()?;
    if !docs.is_empty() {
        let frac = docs.iter().filter(|d| d.label == Some(1)).count() as f64 / docs.len() as f64;
        if (frac - cfg.balance).abs() > cfg.balance_tolerance {
            return Err(Error::Config(format!(
                "generated positive fraction {frac:.3} outside {}±{}",
                cfg.balance, cfg.balance_tolerance
            )));
        }
    }
    Ok(docs)
}
