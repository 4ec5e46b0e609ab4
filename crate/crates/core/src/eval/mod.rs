//! Cross-validation folds, confusion-based metrics, top-k and confidence
//! threshold adjustment, and empirical CDFs.

pub mod ecdf;
pub mod folds;
pub mod metrics;
pub mod selective;

pub use ecdf::ecdf;
pub use folds::{stratified_kfold, Folds};
pub use metrics::{confusion, weighted_metrics, ClassMetrics, ConfusionMatrix, Summary};
pub use selective::{
    calibrate_threshold, evaluate, threshold_adjusted, topk_adjusted, MetricsReport,
    ThresholdPolicy,
};

use serde::{Deserialize, Serialize};

use crate::corpus::{RoleLabel, NUM_ROLES};
use crate::error::{Error, Result};
use crate::scalar::{argmax, rank_desc};

const SUM_TOLERANCE: f64 = 1e-6;

/// Class probabilities for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    pub probs: [f64; NUM_ROLES],
    pub top1: RoleLabel,
    pub top1_confidence: f64,
}

impl Prediction {
    pub fn new(sample_id: impl Into<String>, probs: [f64; NUM_ROLES]) -> Result<Self> {
        let sample_id = sample_id.into();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Validation(format!(
                "{sample_id}: probabilities must be finite and non-negative"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Validation(format!(
                "{sample_id}: probabilities sum to {sum}"
            )));
        }
        let top = argmax(&probs);
        Ok(Prediction {
            sample_id,
            probs,
            top1: RoleLabel::ALL[top],
            top1_confidence: probs[top],
        })
    }

    /// Builds from a probability row of any length up to five, padding with
    /// zeros and renormalizing.
    pub fn from_row(sample_id: impl Into<String>, row: &[f64]) -> Result<Self> {
        if row.len() > NUM_ROLES {
            return Err(Error::DimensionMismatch {
                expected: NUM_ROLES,
                actual: row.len(),
            });
        }
        let sum: f64 = row.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::Validation("probability row sums to zero".into()));
        }
        let mut probs = [0.0; NUM_ROLES];
        for (p, v) in probs.iter_mut().zip(row) {
            *p = v / sum;
        }
        Self::new(sample_id, probs)
    }

    /// Classes by descending probability, ties to the lower index.
    pub fn ranked(&self) -> Vec<RoleLabel> {
        rank_desc(&self.probs)
            .into_iter()
            .map(|i| RoleLabel::ALL[i])
            .collect()
    }

    pub fn second_choice(&self) -> RoleLabel {
        self.ranked()[1]
    }
}

/// Ground truth for one sample, matched to predictions by position and id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeled {
    pub sample_id: String,
    pub label: RoleLabel,
}

impl Labeled {
    pub fn new(sample_id: impl Into<String>, label: RoleLabel) -> Self {
        Labeled {
            sample_id: sample_id.into(),
            label,
        }
    }
}

pub(crate) fn check_aligned(predictions: &[Prediction], truth: &[Labeled]) -> Result<()> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: predictions.len(),
        });
    }
    for (i, (p, t)) in predictions.iter().zip(truth).enumerate() {
        if p.sample_id != t.sample_id {
            return Err(Error::Validation(format!(
                "row {i}: prediction for {} but label for {}",
                p.sample_id, t.sample_id
            )));
        }
    }
    Ok(())
}
