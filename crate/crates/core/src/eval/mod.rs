//! Classification measures and the comparison machinery built on them:
//! ablation tables, cumulative ranking across topics, pairwise scatter data
//! and training-size sweeps.

mod compare;
mod sweep;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use compare::{
    ablation_table, cumulative_ranking, pairwise_points, write_records, AblationRow, PairwisePoints, TopicResult,
    ABLATION_ORDER,
};
pub use sweep::{size_sweep, write_sweep, SweepPoint};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

fn check_lengths<T>(scores: &[T], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Data(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Data(format!("label {l} is not binary")));
    }
    Ok(())
}

/// `score >= threshold` predicts relevant.
pub fn confusion<T: Scalar>(scores: &[T], labels: &[u8], threshold: T) -> Result<ConfusionCounts> {
    check_lengths(scores, labels)?;
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// A ratio that was undefined and replaced by its fallback value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Undefined {
    /// No predicted positives; precision set to 0.
    Precision,
    /// No actual positives; recall set to 0.
    Recall,
    /// Precision + recall = 0; F1 set to 0.
    F1,
    /// Chance agreement is 1; kappa set to 0.
    Kappa,
    /// Only one class present; AUC set to 0.5.
    Auc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ck: f64,
    pub auc: f64,
    pub undefined: BTreeSet<Undefined>,
}

impl MetricsReport {
    pub fn get(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Accuracy => self.accuracy,
            Measure::Precision => self.precision,
            Measure::Recall => self.recall,
            Measure::F1 => self.f1,
            Measure::Ck => self.ck,
            Measure::Auc => self.auc,
        }
    }

    pub fn values(&self) -> [f64; 6] {
        Measure::ALL.map(|m| self.get(m))
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Measure {
    Accuracy,
    Precision,
    Recall,
    F1,
    Ck,
    Auc,
}

impl Measure {
    pub const ALL: [Measure; 6] =
        [Measure::Accuracy, Measure::Precision, Measure::Recall, Measure::F1, Measure::Ck, Measure::Auc];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Accuracy => "accuracy",
            Measure::Precision => "precision",
            Measure::Recall => "recall",
            Measure::F1 => "f1",
            Measure::Ck => "ck",
            Measure::Auc => "auc",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "kappa" | "cohen_kappa" => return Ok(Measure::Ck),
            "f1_score" => return Ok(Measure::F1),
            _ => {}
        }
        Measure::ALL.into_iter().find(|m| m.name() == lower).ok_or_else(|| Error::UnknownMeasure(s.to_string()))
    }
}

/// Area under the ROC curve as the Mann–Whitney statistic, tied scores
/// sharing their average rank. `None` when only one class is present.
pub fn auc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<Option<f64>> {
    check_lengths(scores, labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Data("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("no NaN"));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j share their mean.
        let avg = (i + 1 + j) as f64 / 2.0;
        pos_rank_sum += avg * order[i..j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(Some(u / (n_pos as f64 * n_neg as f64)))
}

/// All six measures. Undefined ratios fall back to fixed values and are
/// listed in [`MetricsReport::undefined`].
pub fn metrics<T: Scalar>(counts: &ConfusionCounts, scores: &[T], labels: &[u8]) -> Result<MetricsReport> {
    check_lengths(scores, labels)?;
    if counts.total() != labels.len() {
        return Err(Error::Data(format!("confusion counts cover {} of {} documents", counts.total(), labels.len())));
    }
    let ConfusionCounts { tp, tn, fp, fn_ } = *counts;
    let n = counts.total();
    let mut undefined = BTreeSet::new();
    let ratio = |num: usize, den: usize, flag: Undefined, undefined: &mut BTreeSet<Undefined>| {
        if den == 0 {
            undefined.insert(flag);
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = if n == 0 { 0.0 } else { (tp + tn) as f64 / n as f64 };
    let precision = ratio(tp, tp + fp, Undefined::Precision, &mut undefined);
    let recall = ratio(tp, tp + fn_, Undefined::Recall, &mut undefined);
    let f1 = if precision + recall == 0.0 {
        undefined.insert(Undefined::F1);
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    // Kappa in integer arithmetic: (n·agree − chance) / (n² − chance), where
    // chance = Σ_class predicted·actual. A constant predictor gives exactly 0.
    let (n128, agree) = (n as i128, (tp + tn) as i128);
    let chance = ((tp + fp) * (tp + fn_) + (tn + fn_) * (tn + fp)) as i128;
    let ck = if n == 0 || n128 * n128 == chance {
        undefined.insert(Undefined::Kappa);
        0.0
    } else {
        (n128 * agree - chance) as f64 / (n128 * n128 - chance) as f64
    };
    let auc = auc(scores, labels)?.unwrap_or_else(|| {
        undefined.insert(Undefined::Auc);
        0.5
    });
    Ok(MetricsReport { accuracy, precision, recall, f1, ck, auc, undefined })
}

/// Confusion at `threshold` followed by [`metrics`].
pub fn evaluate<T: Scalar>(scores: &[T], labels: &[u8], threshold: T) -> Result<MetricsReport> {
    metrics(&confusion(scores, labels, threshold)?, scores, labels)
}

/// Fixed-width table with one row per labeled report.
pub fn format_table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a MetricsReport)>) -> String {
    let mut out = format!("{:<12}", "");
    for m in Measure::ALL {
        out.push_str(&format!("{:>10}", m.name()));
    }
    out.push('\n');
    for (name, r) in rows {
        out.push_str(&format!("{name:<12}"));
        for v in r.values() {
            out.push_str(&format!("{v:>10.3}"));
        }
        out.push('\n');
    }
    out
}
