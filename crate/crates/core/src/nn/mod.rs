//! Two-branch convolutional classifier.
//!
//! The text branch convolves the embedded text matrix with banks of filter
//! heights 3, 4 and 5; the knowledge branch convolves the keyword score
//! matrix with height-3 filters. Every filter is max-pooled over positions,
//! the pooled features are concatenated and fed through a ReLU dense layer
//! and a single sigmoid unit. `Ikom` keeps only the knowledge branch,
//! `TextOnly` only the text branch.

mod adam;
mod forward;
mod params;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use forward::{
    backward, backward_into, bce_loss, conv_branch, forward, forward_with_masks, predict_proba, sample_masks,
    DropoutMasks, Input, Mode, Trace, LOSS_CLAMP,
};
pub use params::{FilterBank, ModelParams, ParamGroup, ParamGroupMut};
pub use train::{mean_loss, predict_examples, train, EpochRecord, Example, TrainConfig, TrainHistory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Inn,
    Ikom,
    TextOnly,
}

impl Variant {
    pub fn uses_text(self) -> bool {
        matches!(self, Variant::Inn | Variant::TextOnly)
    }

    pub fn uses_knowledge(self) -> bool {
        matches!(self, Variant::Inn | Variant::Ikom)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Inn => "INN",
            Variant::Ikom => "IKOM",
            Variant::TextOnly => "TEXT_ONLY",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "INN" => Ok(Variant::Inn),
            "IKOM" => Ok(Variant::Ikom),
            "TEXT_ONLY" | "TEXT" | "CNN" => Ok(Variant::TextOnly),
            _ => Err(Error::Config(format!("unknown variant {s:?} (expected inn, ikom or text_only)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BankSpec {
    pub height: usize,
    pub filters: usize,
}

/// Layer sizes. [`Architecture::standard`] gives the full-size network; tests
/// use tiny shapes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub text_banks: Vec<BankSpec>,
    pub knowledge_bank: BankSpec,
    pub hidden: usize,
    /// Embedding dimension n.
    pub embedding_dim: usize,
    /// Text capacity m (rows of the embedded text matrix).
    pub seq_len: usize,
    /// Rows of the knowledge matrix (keyword count).
    pub keywords: usize,
}

impl Architecture {
    /// 128/256/512 text filters of heights 3/4/5, 512 knowledge filters of
    /// height 3, 256 hidden units.
    pub fn standard(embedding_dim: usize, seq_len: usize, keywords: usize) -> Self {
        Architecture {
            text_banks: vec![
                BankSpec { height: 3, filters: 128 },
                BankSpec { height: 4, filters: 256 },
                BankSpec { height: 5, filters: 512 },
            ],
            knowledge_bank: BankSpec { height: 3, filters: 512 },
            hidden: 256,
            embedding_dim,
            seq_len,
            keywords,
        }
    }

    pub fn text_features(&self) -> usize {
        self.text_banks.iter().map(|b| b.filters).sum()
    }

    pub fn pooled_features(&self, variant: Variant) -> usize {
        let text = if variant.uses_text() { self.text_features() } else { 0 };
        let knowledge = if variant.uses_knowledge() { self.knowledge_bank.filters } else { 0 };
        text + knowledge
    }

    pub fn validate(&self, variant: Variant) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.hidden == 0 {
            return bad("hidden layer must have at least one unit".into());
        }
        if variant.uses_text() {
            if self.text_banks.is_empty() || self.embedding_dim == 0 {
                return bad("text branch needs filter banks and a positive embedding dimension".into());
            }
            let tallest = self.text_banks.iter().map(|b| b.height).max().unwrap_or(0);
            if self.seq_len < tallest {
                return bad(format!("sequence length {} is shorter than the tallest filter {tallest}", self.seq_len));
            }
        }
        if variant.uses_knowledge() && self.keywords < self.knowledge_bank.height {
            return bad(format!(
                "knowledge branch needs at least {} keywords, spec has {}",
                self.knowledge_bank.height, self.keywords
            ));
        }
        Ok(())
    }
}

/// Per-layer dropout rates. Text bank rates pair with
/// [`Architecture::text_banks`] by position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropoutSchedule {
    pub input: f64,
    pub text_banks: Vec<f64>,
    pub knowledge: f64,
    pub dense: f64,
}

impl Default for DropoutSchedule {
    fn default() -> Self {
        DropoutSchedule { input: 0.5, text_banks: vec![0.5, 0.2, 0.2], knowledge: 0.2, dense: 0.5 }
    }
}

impl DropoutSchedule {
    pub fn none(text_banks: usize) -> Self {
        DropoutSchedule { input: 0.0, text_banks: vec![0.0; text_banks], knowledge: 0.0, dense: 0.0 }
    }

    pub fn validate(&self, arch: &Architecture) -> Result<()> {
        let rates = [self.input, self.knowledge, self.dense].into_iter().chain(self.text_banks.iter().copied());
        for r in rates {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("dropout rate {r} outside [0, 1)")));
            }
        }
        if self.text_banks.len() != arch.text_banks.len() {
            return Err(Error::Config(format!(
                "{} text-bank dropout rates for {} text banks",
                self.text_banks.len(),
                arch.text_banks.len()
            )));
        }
        Ok(())
    }
}
