//! Top-k and confidence-threshold label adjustment.
//!
//! Both adjustments consult the true label, so the adjusted metrics describe
//! how close the model came rather than what a deployed classifier would
//! output.

use serde::{Deserialize, Serialize};

use super::metrics::{weighted_metrics, ConfusionMatrix, Summary};
use super::{check_aligned, Labeled, Prediction};
use crate::corpus::RoleLabel;
use crate::error::{Error, Result};
use crate::stats::percentile;

/// True label if it ranks within the top `k`, else the top-1 label.
pub fn topk_adjusted(predictions: &[Prediction], truth: &[Labeled], k: usize) -> Result<Vec<RoleLabel>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    check_aligned(predictions, truth)?;
    Ok(predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            if p.ranked().iter().take(k).any(|&c| c == t.label) {
                t.label
            } else {
                p.top1
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdPolicy {
    pub class: RoleLabel,
    pub percentile: f64,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy {
            class: RoleLabel::VICTIM,
            percentile: 25.0,
        }
    }
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.percentile > 0.0 && self.percentile < 100.0) {
            return Err(Error::Config(format!(
                "threshold percentile {} outside (0, 100)",
                self.percentile
            )));
        }
        Ok(())
    }
}

/// Percentile of top-1 confidence over correct predictions of the policy
/// class.
pub fn calibrate_threshold(
    predictions: &[Prediction],
    truth: &[Labeled],
    policy: &ThresholdPolicy,
) -> Result<f64> {
    policy.validate()?;
    check_aligned(predictions, truth)?;
    let confidences: Vec<f64> = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p.top1 == t.label && t.label == policy.class)
        .map(|(p, _)| p.top1_confidence)
        .collect();
    if confidences.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no correctly classified {} predictions to calibrate on; \
             choose another threshold class",
            policy.class.name()
        )));
    }
    percentile(&confidences, policy.percentile)
}

/// Replaces an incorrect top-1 below `tau` with the second choice. Returns
/// the adjusted labels and the fraction of predictions below `tau`.
pub fn threshold_adjusted(
    predictions: &[Prediction],
    truth: &[Labeled],
    tau: f64,
) -> Result<(Vec<RoleLabel>, f64)> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("threshold {tau} outside [0, 1]")));
    }
    check_aligned(predictions, truth)?;
    let mut rejected = 0usize;
    let labels = predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            let below = p.top1_confidence < tau;
            if below {
                rejected += 1;
            }
            if !below || p.top1 == t.label {
                p.top1
            } else {
                p.second_choice()
            }
        })
        .collect();
    let rate = if predictions.is_empty() {
        0.0
    } else {
        rejected as f64 / predictions.len() as f64
    };
    Ok((labels, rate))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_samples: usize,
    pub top1: Summary,
    pub top2: Summary,
    pub thresholded: Summary,
    pub threshold: f64,
    pub rejection_rate: f64,
    pub confusion: ConfusionMatrix,
}

fn summarize(truth: &[Labeled], labels: &[RoleLabel]) -> Summary {
    weighted_metrics(&ConfusionMatrix::from_pairs(
        truth.iter().map(|t| t.label).zip(labels.iter().copied()),
    ))
}

/// Top-1, top-2 and thresholded metrics at threshold `tau`.
pub fn evaluate(predictions: &[Prediction], truth: &[Labeled], tau: f64) -> Result<MetricsReport> {
    check_aligned(predictions, truth)?;
    let top1: Vec<RoleLabel> = predictions.iter().map(|p| p.top1).collect();
    let confusion = ConfusionMatrix::from_pairs(truth.iter().map(|t| t.label).zip(top1.iter().copied()));
    let top2 = topk_adjusted(predictions, truth, 2)?;
    let (thresholded, rejection_rate) = threshold_adjusted(predictions, truth, tau)?;
    Ok(MetricsReport {
        n_samples: predictions.len(),
        top1: weighted_metrics(&confusion),
        top2: summarize(truth, &top2),
        thresholded: summarize(truth, &thresholded),
        threshold: tau,
        rejection_rate,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(probs: [f64; 5], label: u8) -> (Vec<Prediction>, Vec<Labeled>) {
        (
            vec![Prediction::new("s", probs).unwrap()],
            vec![Labeled::new("s", RoleLabel::try_from(label).unwrap())],
        )
    }

    const P: [f64; 5] = [0.5, 0.3, 0.1, 0.06, 0.04];

    #[test]
    fn top2_examples() {
        let (p, t) = one(P, 1);
        assert_eq!(topk_adjusted(&p, &t, 2).unwrap(), vec![RoleLabel::VICTIM]);
        let (p, t) = one(P, 0);
        assert_eq!(topk_adjusted(&p, &t, 2).unwrap(), vec![RoleLabel::HARASSER]);
        let (p, t) = one(P, 2);
        assert_eq!(topk_adjusted(&p, &t, 2).unwrap(), vec![RoleLabel::HARASSER]);
    }

    #[test]
    fn threshold_rule_branches() {
        let probs = [0.55, 0.25, 0.1, 0.05, 0.05];
        let (p, t) = one(probs, 3);
        let (adj, rr) = threshold_adjusted(&p, &t, 0.6).unwrap();
        assert_eq!(adj, vec![RoleLabel::VICTIM]);
        assert_eq!(rr, 1.0);
        let (p, t) = one(probs, 0);
        let (adj, _) = threshold_adjusted(&p, &t, 0.6).unwrap();
        assert_eq!(adj, vec![RoleLabel::HARASSER]);
        let (adj, rr) = threshold_adjusted(&p, &t, 0.0).unwrap();
        assert_eq!((adj[0], rr), (RoleLabel::HARASSER, 0.0));
    }

    #[test]
    fn calibration_interpolates() {
        let preds: Vec<Prediction> = [0.5, 0.6, 0.7, 0.8]
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let rest = (1.0 - c) / 4.0;
                Prediction::new(format!("s{i}"), [rest, c, rest, rest, rest]).unwrap()
            })
            .collect();
        let truth: Vec<Labeled> = (0..4).map(|i| Labeled::new(format!("s{i}"), RoleLabel::VICTIM)).collect();
        let tau = calibrate_threshold(&preds, &truth, &ThresholdPolicy::default()).unwrap();
        assert!((tau - 0.575).abs() < 1e-12);
    }

    #[test]
    fn calibration_needs_correct_class_members() {
        let (p, t) = one(P, 1);
        assert!(calibrate_threshold(&p, &t, &ThresholdPolicy::default()).is_err());
    }

    #[test]
    fn policy_bounds() {
        assert!(ThresholdPolicy { percentile: 0.0, ..Default::default() }.validate().is_err());
        assert!(ThresholdPolicy { percentile: 100.0, ..Default::default() }.validate().is_err());
    }
}
