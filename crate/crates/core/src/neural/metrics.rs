use serde::{Deserialize, Serialize};

use crate::dielectric::UrineCondition;

const K: usize = UrineCondition::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// 5-class evaluation summary. `confusion[t][p]` counts records of true
/// class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub confusion: [[u64; K]; K],
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Labels outside 0..5 are ignored.
    pub fn from_predictions(truth: &[usize], predicted: &[usize]) -> Self {
        let mut confusion = [[0u64; K]; K];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t < K && p < K {
                confusion[t][p] += 1;
            }
        }
        Self::from_confusion(confusion)
    }

    pub fn from_confusion(confusion: [[u64; K]; K]) -> Self {
        let total: u64 = confusion.iter().flatten().sum();
        let trace: u64 = (0..K).map(|k| confusion[k][k]).sum();
        let per_class: Vec<ClassScores> = (0..K)
            .map(|k| {
                let tp = confusion[k][k];
                let support: u64 = confusion[k].iter().sum();
                let predicted: u64 = (0..K).map(|t| confusion[t][k]).sum();
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassScores {
                    precision,
                    recall,
                    f1,
                    support,
                }
            })
            .collect();
        let mean = |f: fn(&ClassScores) -> f64| per_class.iter().map(f).sum::<f64>() / K as f64;
        Self {
            accuracy: ratio(trace, total),
            macro_precision: mean(|c| c.precision),
            macro_recall: mean(|c| c.recall),
            macro_f1: mean(|c| c.f1),
            per_class,
            confusion,
        }
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    /// Pooled TP / pooled predictions; equals accuracy for single-label data.
    pub fn micro_precision(&self) -> f64 {
        let tp: u64 = (0..K).map(|k| self.confusion[k][k]).sum();
        ratio(tp, self.total())
    }

    pub fn micro_recall(&self) -> f64 {
        self.micro_precision()
    }

    pub fn class(&self, c: UrineCondition) -> &ClassScores {
        &self.per_class[c.code()]
    }

    /// Unordered class pair with the largest combined off-diagonal count.
    pub fn most_confused_pair(&self) -> (UrineCondition, UrineCondition, u64) {
        let mut best = (0, 1, 0);
        for a in 0..K {
            for b in a + 1..K {
                let n = self.confusion[a][b] + self.confusion[b][a];
                if n > best.2 {
                    best = (a, b, n);
                }
            }
        }
        (UrineCondition::ALL[best.0], UrineCondition::ALL[best.1], best.2)
    }
}
