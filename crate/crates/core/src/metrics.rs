//! Support-weighted precision, recall and F1 for binary classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: u8,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// `confusion[true][predicted]`.
    pub confusion: [[u64; 2]; 2],
    pub per_class: Vec<ClassMetrics>,
}

impl WeightedMetrics {
    /// Metrics implied by a confusion matrix (rows = true class). A class
    /// with no predicted members has precision 0.
    pub fn from_confusion(confusion: [[u64; 2]; 2]) -> Result<Self> {
        let total: u64 = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::Usage("metrics need at least one sample".into()));
        }
        let per_class: Vec<ClassMetrics> = (0..2)
            .map(|c| {
                let tp = confusion[c][c] as f64;
                let predicted = (confusion[0][c] + confusion[1][c]) as f64;
                let support = confusion[c][0] + confusion[c][1];
                let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
                let recall = if support > 0 { tp / support as f64 } else { 0.0 };
                let f1 = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                ClassMetrics {
                    class: c as u8,
                    precision,
                    recall,
                    f1,
                    support,
                }
            })
            .collect();
        let weighted = |f: fn(&ClassMetrics) -> f64| {
            per_class
                .iter()
                .map(|m| f(m) * m.support as f64)
                .sum::<f64>()
                / total as f64
        };
        Ok(Self {
            weighted_precision: weighted(|m| m.precision),
            weighted_recall: weighted(|m| m.recall),
            weighted_f1: weighted(|m| m.f1),
            confusion,
            per_class,
        })
    }
}

/// Builds the confusion matrix of `predictions` against `labels` (both in
/// {0, 1}) and derives the weighted metrics from it.
pub fn compute_weighted_metrics(predictions: &[u8], labels: &[u8]) -> Result<WeightedMetrics> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    let mut confusion = [[0u64; 2]; 2];
    for (&p, &y) in predictions.iter().zip(labels) {
        if p > 1 || y > 1 {
            return Err(Error::Usage(format!("non-binary class (pred {p}, label {y})")));
        }
        confusion[y as usize][p as usize] += 1;
    }
    WeightedMetrics::from_confusion(confusion)
}
