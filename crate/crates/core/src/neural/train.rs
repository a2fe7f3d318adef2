use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::model::{argmax, softmax, Model, Params};
use super::preprocess::Example;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle_seed: u64,
    /// Linear learning-rate ramp over this many optimizer steps.
    pub warmup_steps: usize,
    /// Rescale the batch gradient when its L2 norm exceeds this.
    pub clip_norm: Option<f64>,
    pub schedule: Schedule,
    /// Evaluate per-sample gradients on the rayon pool. Results are
    /// bit-identical to the serial path.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle_seed: 42,
            warmup_steps: 100,
            clip_norm: Some(1.0),
            schedule: Schedule::Cosine,
            parallel: false,
        }
    }
}

/// Learning-rate multiplier applied after warmup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Constant,
    /// Half-cosine from 1 toward 0 over the whole run.
    Cosine,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !pos(self.learning_rate) || !pos(self.epsilon) || !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::Config("optimizer hyperparameters out of range".into()));
        }
        if self.clip_norm.is_some_and(|c| !pos(c)) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean loss over the epoch's mini-batches, taken before each update.
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

impl History {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(HISTORY_HEADER);
        out.push('\n');
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Dataset { line, msg };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == HISTORY_HEADER => {}
            _ => return Err(bad(1, format!("expected header {HISTORY_HEADER}"))),
        }
        let mut epochs = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 5 {
                return Err(bad(i + 1, format!("expected 5 columns, found {}", cols.len())));
            }
            let epoch = cols[0]
                .parse()
                .map_err(|_| bad(i + 1, format!("bad epoch {:?}", cols[0])))?;
            let mut v = [0.0; 4];
            for (k, c) in cols[1..].iter().enumerate() {
                v[k] = c.parse().map_err(|_| bad(i + 1, format!("bad number {c:?}")))?;
            }
            epochs.push(EpochStats {
                epoch,
                train_loss: v[0],
                train_acc: v[1],
                val_loss: v[2],
                val_acc: v[3],
            });
        }
        Ok(Self { epochs })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub final_model: Model,
    /// Highest validation accuracy; earliest epoch wins ties.
    pub best_model: Model,
    pub best_epoch: usize,
    pub history: History,
}

struct Adam {
    m: Params,
    v: Params,
    step: u64,
}

impl Adam {
    fn new(p: &Params) -> Self {
        Self {
            m: p.zeros_like(),
            v: p.zeros_like(),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut Params, grads: &Params, cfg: &TrainConfig, total_steps: usize) {
        self.step += 1;
        let t = self.step as f64;
        let warm = if cfg.warmup_steps > 0 {
            (t / cfg.warmup_steps as f64).min(1.0)
        } else {
            1.0
        };
        let decay = match cfg.schedule {
            Schedule::Constant => 1.0,
            Schedule::Cosine => 0.5 * (1.0 + (std::f64::consts::PI * (t - 1.0) / total_steps as f64).cos()),
        };
        let lr = cfg.learning_rate * warm * decay;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powf(t);
        let c2 = 1.0 - b2.powf(t);
        let clip = match cfg.clip_norm {
            Some(c) => {
                let n = grads.l2_norm();
                if n > c {
                    c / n
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let gs: Vec<&Tensor> = grads.named().into_iter().map(|(_, g)| g).collect();
        let ps = params.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, m), v), g) in ps.into_iter().zip(ms).zip(vs).zip(gs) {
            let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
            for k in 0..p.len() {
                let gk = g.data()[k] * clip;
                m[k] = b1 * m[k] + (1.0 - b1) * gk;
                v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
                p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + cfg.epsilon);
            }
        }
    }
}

fn as_training_error(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::Numeric { .. } => Error::Diverged { epoch, batch },
        other => other,
    }
}

/// Mini-batch Adam. Deterministic given `cfg.shuffle_seed` and the model's
/// initial parameters.
pub fn train(model: &Model, train: &[Example], val: &[Example], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config("training and validation sets must be non-empty".into()));
    }
    let mut current = model.clone();
    let mut adam = Adam::new(&current.params);
    let mut history = History::default();
    let mut best: Option<(f64, usize, Model)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let total_steps = cfg.epochs * train.len().div_ceil(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        let mut rng = seed::rng(seed::mix(cfg.shuffle_seed, 0x7A1, epoch as u64));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let xs: Vec<&Tensor> = chunk.iter().map(|&i| &train[i].input).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| train[i].label).collect();
            let (loss, grads, preds) = current
                .batch_gradient(&xs, &ys, cfg.parallel)
                .map_err(|e| as_training_error(e, epoch, b))?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            loss_sum += loss;
            correct += preds.iter().zip(&ys).filter(|(p, y)| p == y).count();
            adam.update(&mut current.params, &grads, cfg, total_steps);
            if !current.params.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
        }
        let (val_loss, val_acc) = loss_accuracy(&current, val).map_err(|e| as_training_error(e, epoch, 0))?;
        history.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
            val_loss,
            val_acc,
        });
        if best.as_ref().is_none_or(|(acc, _, _)| val_acc > *acc) {
            best = Some((val_acc, epoch, current.clone()));
        }
    }
    let (_, best_epoch, best_model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        final_model: current,
        best_model,
        best_epoch,
        history,
    })
}

fn logits_all(model: &Model, examples: &[Example]) -> Result<Vec<Vec<f64>>> {
    examples.par_iter().map(|e| model.forward_one(&e.input)).collect()
}

/// Mean cross-entropy and accuracy.
pub fn loss_accuracy(model: &Model, examples: &[Example]) -> Result<(f64, f64)> {
    let logits = logits_all(model, examples)?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (z, e) in logits.iter().zip(examples) {
        loss -= softmax(z)[e.label].max(f64::MIN_POSITIVE).ln();
        correct += usize::from(argmax(z) == e.label);
    }
    let n = examples.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Predicted class and softmax probabilities for each example.
pub fn predict(model: &Model, examples: &[Example]) -> Result<Vec<(usize, Vec<f64>)>> {
    Ok(logits_all(model, examples)?
        .into_iter()
        .map(|z| (argmax(&z), softmax(&z)))
        .collect())
}

pub fn evaluate(model: &Model, examples: &[Example]) -> Result<Metrics> {
    if examples.is_empty() {
        return Err(Error::Config("evaluation set is empty".into()));
    }
    let preds: Vec<usize> = predict(model, examples)?.into_iter().map(|(p, _)| p).collect();
    let truth: Vec<usize> = examples.iter().map(|e| e.label).collect();
    Ok(Metrics::from_predictions(&truth, &preds))
}

/// Accuracy on the records of classes `a` and `b` when the decision is
/// restricted to those two logits.
pub fn pairwise_accuracy(model: &Model, examples: &[Example], a: usize, b: usize) -> Result<f64> {
    let subset: Vec<Example> = examples
        .iter()
        .filter(|e| e.label == a || e.label == b)
        .cloned()
        .collect();
    if subset.is_empty() {
        return Ok(0.0);
    }
    let logits = logits_all(model, &subset)?;
    let hits = logits
        .iter()
        .zip(&subset)
        .filter(|(z, e)| {
            let pick = if z[a] >= z[b] { a } else { b };
            pick == e.label
        })
        .count();
    Ok(hits as f64 / subset.len() as f64)
}
