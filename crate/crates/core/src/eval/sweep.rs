use serde::{Deserialize, Serialize};

use super::MetricsReport;
use crate::corpus::stratified_partition;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub fraction: f64,
    pub train_docs: usize,
    pub report: MetricsReport,
}

/// Trains and evaluates once per fraction.
///
/// `labels` are the labels of the full training pool. For each fraction a
/// stratified subsample is drawn with `seed` and its indices (in pool
/// order) are passed to `run`, which trains a fresh model and evaluates it
/// on a fixed test set. At fraction 1.0 `run` receives the whole pool.
pub fn size_sweep(
    labels: &[u8],
    fractions: &[f64],
    seed: u64,
    mut run: impl FnMut(&[usize]) -> Result<MetricsReport>,
) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let (subset, _) = stratified_partition(labels, |&l| Some(l), fraction, seed)?;
        for class in [0u8, 1] {
            if !subset.iter().any(|&i| labels[i] == class) {
                return Err(Error::Data(format!("fraction {fraction} leaves no documents of class {class}")));
            }
        }
        let report = run(&subset)?;
        out.push(SweepPoint { fraction, train_docs: subset.len(), report });
    }
    Ok(out)
}

/// Data rows `fraction,train_docs,<six measures>`.
pub fn write_sweep<W: std::io::Write>(points: &[SweepPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["fraction".to_string(), "train_docs".to_string()];
    header.extend(super::Measure::ALL.iter().map(|m| m.name().to_string()));
    out.write_record(&header)?;
    for p in points {
        let mut row = vec![p.fraction.to_string(), p.train_docs.to_string()];
        row.extend(p.report.values().iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| Error::io("<sweep>", e))?;
    Ok(())
}
