use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Measure, MetricsReport};
use crate::error::{Error, Result};

/// Row order of the ablation table.
pub const ABLATION_ORDER: [&str; 5] = ["IKOM", "NPREV", "NBC", "NDC", "NKC"];

/// Per-model reports on one topic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicResult {
    pub topic: String,
    pub reports: BTreeMap<String, MetricsReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub report: MetricsReport,
}

pub fn ablation_table(reports: &BTreeMap<String, MetricsReport>) -> Result<Vec<AblationRow>> {
    ABLATION_ORDER
        .iter()
        .map(|&name| {
            let report = reports.get(name).ok_or_else(|| Error::Data(format!("ablation variant {name} missing")))?;
            Ok(AblationRow { variant: name.to_string(), report: report.clone() })
        })
        .collect()
}

fn check_models(results: &[TopicResult]) -> Result<()> {
    let Some(first) = results.first() else {
        return Err(Error::Data("no topics".into()));
    };
    for r in results {
        if !r.reports.keys().eq(first.reports.keys()) {
            return Err(Error::Data(format!("topic {} evaluates a different model set", r.topic)));
        }
    }
    Ok(())
}

/// Ranks 1..=n with ties sharing their average rank; higher value, higher rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Per topic, rank the models on `measure` (best gets the highest rank,
/// ties share the average) and sum the ranks across topics.
pub fn cumulative_ranking(results: &[TopicResult], measure: &str) -> Result<BTreeMap<String, f64>> {
    let measure: Measure = measure.parse()?;
    check_models(results)?;
    let mut sums: BTreeMap<String, f64> = results[0].reports.keys().map(|k| (k.clone(), 0.0)).collect();
    for r in results {
        let values: Vec<f64> = r.reports.values().map(|rep| rep.get(measure)).collect();
        for ((_, sum), rank) in sums.iter_mut().zip(average_ranks(&values)) {
            *sum += rank;
        }
    }
    Ok(sums)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwisePoints {
    /// `(topic, value of a, value of b)`.
    pub points: Vec<(String, f64, f64)>,
    /// Topics where `a` scores strictly higher.
    pub a_wins: usize,
}

impl PairwisePoints {
    /// Two whitespace-separated numeric columns, one topic per line.
    pub fn write_columns<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (_, a, b) in &self.points {
            writeln!(w, "{a} {b}")?;
        }
        Ok(())
    }
}

pub fn pairwise_points(results: &[TopicResult], model_a: &str, model_b: &str, measure: &str) -> Result<PairwisePoints> {
    let measure: Measure = measure.parse()?;
    let mut points = Vec::with_capacity(results.len());
    for r in results {
        let get = |m: &str| {
            r.reports
                .get(m)
                .map(|rep| rep.get(measure))
                .ok_or_else(|| Error::Data(format!("model {m} missing from topic {}", r.topic)))
        };
        points.push((r.topic.clone(), get(model_a)?, get(model_b)?));
    }
    let a_wins = points.iter().filter(|(_, a, b)| a > b).count();
    Ok(PairwisePoints { points, a_wins })
}

/// Machine-readable rows `topic,model,measure,value`.
pub fn write_records<W: Write>(results: &[TopicResult], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["topic", "model", "measure", "value"])?;
    for r in results {
        for (model, rep) in &r.reports {
            for m in Measure::ALL {
                out.write_record([r.topic.as_str(), model, m.name(), &rep.get(m).to_string()])?;
            }
        }
    }
    out.flush().map_err(|e| Error::io("<records>", e))?;
    Ok(())
}
