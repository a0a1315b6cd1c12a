use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::forward::{backward_into, bce_loss, forward, predict_proba, Input, Mode};
use super::params::ModelParams;
use super::{Architecture, DropoutSchedule, Variant};
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricsReport};
use crate::scalar::Scalar;

/// A featurized, labeled document.
#[derive(Clone, Debug, PartialEq)]
pub struct Example<T> {
    pub id: String,
    pub token_ids: Vec<usize>,
    pub eik: Array2<T>,
    pub label: u8,
}

impl<T: Scalar> Example<T> {
    /// The inputs `variant` consumes.
    pub fn input_for(&self, variant: Variant) -> Input<'_, T> {
        Input {
            text: variant.uses_text().then_some(self.token_ids.as_slice()),
            eik: variant.uses_knowledge().then(|| self.eik.view()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: DropoutSchedule,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 32,
            dropout: DropoutSchedule::default(),
            patience: 5,
            seed: 0,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, arch: &Architecture) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        self.dropout.validate(arch)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training-mode loss over the epoch's examples.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_metrics: Option<MetricsReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,val_loss,val_f1";

    /// One row per epoch. Missing validation values are left empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            let val_loss = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
            let val_f1 = r.val_metrics.as_ref().map(|m| m.f1.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", r.epoch, r.train_loss, val_loss, val_f1)?;
        }
        Ok(())
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

/// Infer-mode probabilities for every example.
pub fn predict_examples<T: Scalar>(params: &ModelParams<T>, examples: &[Example<T>]) -> Result<Vec<T>> {
    examples.iter().map(|ex| predict_proba(params, ex.input_for(params.variant))).collect()
}

/// Mean infer-mode loss.
pub fn mean_loss<T: Scalar>(params: &ModelParams<T>, examples: &[Example<T>]) -> Result<f64> {
    let probs = predict_examples(params, examples)?;
    let total: f64 = probs.iter().zip(examples).map(|(&p, ex)| bce_loss(p, ex.label).to_f64_lossy()).sum();
    Ok(total / examples.len().max(1) as f64)
}

/// Mini-batch Adam on binary cross-entropy.
///
/// Examples are reshuffled every epoch from a generator seeded by
/// `cfg.seed`, which also draws the dropout masks. With a nonempty
/// validation set, training stops once validation loss has failed to
/// improve for more than `cfg.patience` epochs and the best parameters are
/// returned; otherwise the final parameters are.
pub fn train<T: Scalar>(
    init: ModelParams<T>,
    cfg: &TrainConfig,
    train: &[Example<T>],
    val: &[Example<T>],
) -> Result<(ModelParams<T>, TrainHistory)> {
    cfg.validate(&init.arch)?;
    if train.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let variant = init.variant;
    let threshold = T::lit(cfg.threshold);
    let val_labels: Vec<u8> = val.iter().map(|ex| ex.label).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init;
    let mut state = AdamState::new(&params);
    let mut grad = params.zeros_like();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ModelParams<T>)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.scale(T::zero());
            for &i in batch {
                let ex = &train[i];
                let trace =
                    forward(&params, ex.input_for(variant), Mode::Train { rng: &mut rng, dropout: &cfg.dropout })?;
                epoch_loss += bce_loss(trace.prob, ex.label).to_f64_lossy();
                backward_into(&params, &trace, ex.label, &mut grad)?;
            }
            grad.scale(T::one() / T::from_usize(batch.len()).expect("batch size fits"));
            adam_step(&mut params, &grad, &mut state, cfg.learning_rate)?;
        }
        let train_loss = epoch_loss / train.len() as f64;

        let (val_loss, val_metrics) = if val.is_empty() {
            (None, None)
        } else {
            let probs = predict_examples(&params, val)?;
            let loss = probs.iter().zip(&val_labels).map(|(&p, &y)| bce_loss(p, y).to_f64_lossy()).sum::<f64>()
                / val.len() as f64;
            (Some(loss), Some(evaluate(&probs, &val_labels, threshold)?))
        };
        if !train_loss.is_finite() || val_loss.is_some_and(|l| !l.is_finite()) {
            return Err(Error::Data(format!("loss diverged at epoch {epoch}")));
        }
        history.records.push(EpochRecord { epoch, train_loss, val_loss, val_metrics });

        let Some(loss) = val_loss else {
            history.best_epoch = epoch;
            continue;
        };
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, params.clone()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > cfg.patience {
                history.stopped_early = epoch < cfg.epochs;
                break;
            }
        }
    }
    let params = best.map_or(params, |(_, p)| p);
    Ok((params, history))
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;

    use super::*;
    use crate::nn::BankSpec;

    fn tiny_arch() -> Architecture {
        Architecture {
            text_banks: vec![BankSpec { height: 3, filters: 2 }, BankSpec { height: 4, filters: 2 }],
            knowledge_bank: BankSpec { height: 3, filters: 3 },
            hidden: 4,
            embedding_dim: 3,
            seq_len: 8,
            keywords: 4,
        }
    }

    fn example(id: usize, label: u8) -> Example<f64> {
        let v = if label == 1 { 1.0 } else { 0.1 };
        Example {
            id: format!("d{id}"),
            token_ids: vec![2 + label as usize, 4, 5, 2 + label as usize, 6],
            eik: Array2::from_shape_fn((4, 4), |(i, j)| v * (1 + i + j) as f64 / 8.0),
            label,
        }
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 2,
            dropout: DropoutSchedule::none(2),
            learning_rate: 1e-2,
            ..TrainConfig::default()
        }
    }

    fn params(variant: Variant) -> ModelParams<f64> {
        let arch = tiny_arch();
        let emb =
            Array2::from_shape_fn((8, 3), |(i, j)| if i == 0 { 0.0 } else { ((i * 3 + j) as f64 * 0.37).sin() * 0.3 });
        ModelParams::init(&arch, variant, variant.uses_text().then_some(emb), 7).unwrap()
    }

    #[test]
    fn empty_train_set_rejected() {
        assert!(matches!(train(params(Variant::Inn), &cfg(1), &[], &[]), Err(Error::Data(_))));
    }

    #[test]
    fn single_document_loss_decreases() {
        let data = [example(0, 1)];
        let p0 = params(Variant::Inn);
        let before = mean_loss(&p0, &data).unwrap();
        let (p1, h) = train(p0, &cfg(1), &data, &[]).unwrap();
        assert!(mean_loss(&p1, &data).unwrap() < before);
        assert_eq!(h.records.len(), 1);
    }

    #[test]
    fn patience_zero_returns_first_epoch_when_validation_worsens() {
        // Training pushes every score up; the validation copies are labeled
        // negative, so validation loss rises from the first epoch on.
        let train_set: Vec<_> = (0..6).map(|i| example(i, 1)).collect();
        let val: Vec<_> = train_set.iter().map(|ex| Example { label: 0, ..ex.clone() }).collect();
        let mut c = cfg(20);
        c.patience = 0;
        c.learning_rate = 0.05;
        let p0 = params(Variant::Ikom);
        let (_, h) = train(p0.clone(), &c, &train_set, &val).unwrap();
        let losses: Vec<f64> = h.records.iter().map(|r| r.val_loss.unwrap()).collect();
        assert!(losses[1] >= losses[0], "{losses:?}");
        assert_eq!(h.best_epoch, 1);
        assert_eq!(h.records.len(), 2);

        let mut one = c.clone();
        one.epochs = 1;
        let (expected, _) = train(p0.clone(), &one, &train_set, &[]).unwrap();
        let (got, _) = train(p0, &c, &train_set, &val).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn identical_runs_identical_history() {
        let data: Vec<_> = (0..6).map(|i| example(i, (i % 2) as u8)).collect();
        let mut c = cfg(3);
        c.dropout = DropoutSchedule { text_banks: vec![0.5, 0.2], ..DropoutSchedule::default() };
        let run = || train(params(Variant::Inn), &c, &data, &data[..2]).unwrap();
        let (pa, ha) = run();
        let (pb, hb) = run();
        assert_eq!(pa, pb);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        ha.write_csv(&mut a).unwrap();
        hb.write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().starts_with(TrainHistory::CSV_HEADER));
    }
}
