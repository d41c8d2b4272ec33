//! Mini-batch ADAM training with best-validation snapshot selection.

use std::collections::BTreeMap;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array::Array;
use crate::augment::Dihedral;
use crate::error::{NnError, Result};
use crate::optim::Adam;
use crate::params::{ParamStore, ParamVars};
use crate::tape::{Tape, Tensor};

/// Correct/total counts, overall and per class.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tally {
    pub correct: f64,
    pub total: f64,
    pub class_correct: Vec<f64>,
    pub class_total: Vec<f64>,
}

impl Tally {
    pub fn new(classes: usize) -> Self {
        Self {
            correct: 0.0,
            total: 0.0,
            class_correct: vec![0.0; classes],
            class_total: vec![0.0; classes],
        }
    }

    /// Counts items with positive mask weight.
    pub fn from_predictions(
        pred: &[usize],
        target: &[usize],
        mask: &[f64],
        classes: usize,
    ) -> Self {
        let mut t = Self::new(classes);
        for ((&p, &y), &m) in pred.iter().zip(target).zip(mask) {
            if m > 0.0 {
                t.total += 1.0;
                t.class_total[y] += 1.0;
                if p == y {
                    t.correct += 1.0;
                    t.class_correct[y] += 1.0;
                }
            }
        }
        t
    }

    pub fn merge(&mut self, other: &Tally) {
        self.correct += other.correct;
        self.total += other.total;
        if self.class_total.len() < other.class_total.len() {
            self.class_total.resize(other.class_total.len(), 0.0);
            self.class_correct.resize(other.class_total.len(), 0.0);
        }
        for (i, (c, t)) in other
            .class_correct
            .iter()
            .zip(&other.class_total)
            .enumerate()
        {
            self.class_correct[i] += c;
            self.class_total[i] += t;
        }
    }

    pub fn accuracy(&self) -> f64 {
        if self.total == 0.0 {
            0.0
        } else {
            self.correct / self.total
        }
    }

    /// Mean of per-class recalls over the classes that occur.
    pub fn balanced_accuracy(&self) -> f64 {
        let present: Vec<f64> = self
            .class_correct
            .iter()
            .zip(&self.class_total)
            .filter(|(_, &t)| t > 0.0)
            .map(|(c, t)| c / t)
            .collect();
        if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        }
    }
}

/// How cross-entropy terms are weighted per class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassWeighting {
    #[default]
    Uniform,
    /// `w_k = total / (K * count_k)` over the training set.
    InverseFrequency,
}

/// Which validation score picks the retained snapshot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selection {
    #[default]
    Accuracy,
    BalancedAccuracy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Random rotations and flips of each training sample.
    pub augment: bool,
    #[serde(default)]
    pub class_weighting: ClassWeighting,
    #[serde(default)]
    pub selection: Selection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.005,
            beta1: 0.5,
            beta2: 0.999,
            epochs: 50,
            batch_size: 8,
            seed: 0,
            augment: false,
            class_weighting: ClassWeighting::Uniform,
            selection: Selection::Accuracy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.batch_size > 0;
        if ok {
            Ok(())
        } else {
            Err(NnError::Config(format!("training: {self:?}")))
        }
    }
}

/// Per-class loss weights handed to [`Model::sample_loss`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossOptions {
    pub class_weights: Option<Vec<f64>>,
}

impl LossOptions {
    pub fn class_weight(&self, class: usize) -> f64 {
        self.class_weights
            .as_ref()
            .and_then(|w| w.get(class).copied())
            .unwrap_or(1.0)
    }
}

/// A trainable network over some sample type.
pub trait Model {
    type Sample;

    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    fn num_classes(&self) -> usize;

    /// Training-mode forward pass producing a scalar loss on `vars`' tape.
    /// Buffer updates (running statistics) are appended to `updates`.
    fn sample_loss(
        &self,
        vars: &ParamVars,
        sample: &Self::Sample,
        loss: &LossOptions,
        updates: &mut Vec<(String, Array)>,
    ) -> Result<(Tensor, Tally)>;

    /// Inference-mode accuracy counts.
    fn evaluate(&self, sample: &Self::Sample) -> Result<Tally>;

    /// Loss-relevant item counts per class.
    fn class_counts(&self, sample: &Self::Sample) -> Vec<f64>;

    fn augment(&self, _sample: &Self::Sample, _t: Dihedral) -> Option<Self::Sample> {
        None
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub validation_scores: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub best_score: f64,
}

/// Evaluates `model` over `samples` and returns the merged tally.
pub fn evaluate_all<M: Model>(model: &M, samples: &[M::Sample]) -> Result<Tally> {
    let mut tally = Tally::new(model.num_classes());
    for s in samples {
        tally.merge(&model.evaluate(s)?);
    }
    Ok(tally)
}

fn class_weights<M: Model>(model: &M, samples: &[M::Sample], mode: ClassWeighting) -> LossOptions {
    match mode {
        ClassWeighting::Uniform => LossOptions::default(),
        ClassWeighting::InverseFrequency => {
            let k = model.num_classes();
            let mut counts = vec![0.0; k];
            for s in samples {
                for (c, v) in counts.iter_mut().zip(model.class_counts(s)) {
                    *c += v;
                }
            }
            let total: f64 = counts.iter().sum();
            let weights = counts
                .iter()
                .map(|&c| if c > 0.0 { total / (k as f64 * c) } else { 1.0 })
                .collect();
            LossOptions {
                class_weights: Some(weights),
            }
        }
    }
}

/// Trains `model` in place and leaves it at the snapshot with the best
/// validation score (training score when `validation` is empty).
pub fn train<M: Model>(
    model: &mut M,
    train_set: &[M::Sample],
    validation: &[M::Sample],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let loss_opts = class_weights(model, train_set, cfg.class_weighting);
    let mut adam = Adam::new(cfg.lr, cfg.beta1, cfg.beta2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut report = TrainReport {
        best_score: f64::NEG_INFINITY,
        ..TrainReport::default()
    };
    let mut best: Option<ParamStore> = None;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: BTreeMap<String, Array> = BTreeMap::new();
            for &idx in batch {
                let augmented = if cfg.augment {
                    let t = Dihedral::random(&mut rng);
                    model.augment(&train_set[idx], t)
                } else {
                    None
                };
                let sample = augmented.as_ref().unwrap_or(&train_set[idx]);
                let tape = Tape::new();
                let vars = model.params().bind(&tape);
                let mut updates = Vec::new();
                let (loss, _) = model.sample_loss(&vars, sample, &loss_opts, &mut updates)?;
                let loss_value = loss.value().data()[0];
                if !loss_value.is_finite() || tape.check_finite().is_err() {
                    return Err(NnError::Diverged { epoch });
                }
                epoch_loss += loss_value;
                let mut grads = loss.backward();
                for (name, g) in vars.gradients(&mut grads) {
                    match acc.get_mut(&name) {
                        Some(a) => a.add_assign(&g),
                        None => {
                            acc.insert(name, g);
                        }
                    }
                }
                for (name, value) in updates {
                    *model.params_mut().buffer_mut(&name)? = value;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for g in acc.values_mut() {
                g.scale(inv);
            }
            adam.step(model.params_mut(), &acc)?;
        }
        epoch_loss /= train_set.len() as f64;
        let eval_set = if validation.is_empty() {
            train_set
        } else {
            validation
        };
        let tally = evaluate_all(model, eval_set)?;
        let score = match cfg.selection {
            Selection::Accuracy => tally.accuracy(),
            Selection::BalancedAccuracy => tally.balanced_accuracy(),
        };
        debug!("epoch {epoch}: loss {epoch_loss:.5}, validation {score:.4}");
        report.epoch_losses.push(epoch_loss);
        report.validation_scores.push(score);
        if best.is_none() || score > report.best_score {
            report.best_score = score;
            report.best_epoch = Some(epoch);
            best = Some(model.params().clone());
        }
    }
    if let Some(best) = best {
        *model.params_mut() = best;
    }
    info!(
        "trained {} epochs, best epoch {:?} with score {:.4}",
        cfg.epochs, report.best_epoch, report.best_score
    );
    Ok(report)
}

/// Two-phase curriculum: train on `easy` first, then continue on `hard`
/// (typically with a lower learning rate). Either phase may be skipped by
/// passing an empty set.
pub fn curriculum_train<M: Model>(
    model: &mut M,
    easy: &[M::Sample],
    hard: &[M::Sample],
    validation: &[M::Sample],
    cfg_easy: &TrainConfig,
    cfg_hard: &TrainConfig,
) -> Result<(Option<TrainReport>, TrainReport)> {
    let first = if easy.is_empty() {
        None
    } else {
        Some(train(model, easy, validation, cfg_easy)?)
    };
    let second = train(model, hard, validation, cfg_hard)?;
    Ok((first, second))
}
