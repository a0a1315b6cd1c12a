use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Document;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train_fraction: 0.9, seed: 0 }
    }
}

/// Stratified partition of item indices into (selected, rest).
///
/// Each class contributes `round(fraction * class_size)` items, drawn by a
/// seeded shuffle. Both halves keep the original item order, so a fraction
/// of 1.0 returns every index in order.
pub fn stratified_partition<T>(
    items: &[T],
    label: impl Fn(&T) -> Option<u8>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, item) in items.iter().enumerate() {
        match label(item) {
            Some(l) if l <= 1 => by_class[l as usize].push(i),
            _ => return Err(Error::Data(format!("item {i} has no binary label"))),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::new();
    let mut rest = Vec::new();
    for class in &mut by_class {
        class.shuffle(&mut rng);
        let take = (fraction * class.len() as f64).round() as usize;
        selected.extend_from_slice(&class[..take]);
        rest.extend_from_slice(&class[take..]);
    }
    selected.sort_unstable();
    rest.sort_unstable();
    Ok((selected, rest))
}

/// Stratified, seeded train/test split of a labeled corpus.
pub fn split_dataset(docs: &[Document], cfg: &SplitConfig) -> Result<(Vec<Document>, Vec<Document>)> {
    if let Some(d) = docs.iter().find(|d| d.label.is_none()) {
        return Err(Error::Unlabeled(d.id.clone()));
    }
    let (train, test) = stratified_partition(docs, |d| d.label, cfg.train_fraction, cfg.seed)?;
    Ok((train.into_iter().map(|i| docs[i].clone()).collect(), test.into_iter().map(|i| docs[i].clone()).collect()))
}
