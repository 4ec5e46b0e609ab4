use serde::{Deserialize, Serialize};

use super::{check_aligned, Labeled, Prediction};
use crate::corpus::{RoleLabel, NUM_ROLES};
use crate::error::Result;

/// Rows are true classes, columns predicted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_ROLES]; NUM_ROLES],
}

impl ConfusionMatrix {
    pub fn from_pairs<I: IntoIterator<Item = (RoleLabel, RoleLabel)>>(pairs: I) -> Self {
        let mut m = ConfusionMatrix::default();
        for (truth, pred) in pairs {
            m.counts[truth.index()][pred.index()] += 1;
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().flatten().zip(other.counts.iter().flatten()) {
            *a += b;
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for r in RoleLabel::ALL {
            out.push(',');
            out.push_str(r.name());
        }
        out.push('\n');
        for (r, row) in RoleLabel::ALL.iter().zip(&self.counts) {
            out.push_str(r.name());
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Accuracy and support-weighted precision, recall and F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn weighted_metrics(m: &ConfusionMatrix) -> Summary {
    let total = m.total();
    let per_class: Vec<ClassMetrics> = (0..NUM_ROLES)
        .map(|c| {
            let tp = m.counts[c][c];
            let precision = ratio(tp, m.predicted(c));
            let recall = ratio(tp, m.support(c));
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support: m.support(c),
            }
        })
        .collect();
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            return 0.0;
        }
        per_class
            .iter()
            .map(|c| f(c) * c.support as f64)
            .sum::<f64>()
            / total as f64
    };
    let trace: u64 = (0..NUM_ROLES).map(|c| m.counts[c][c]).sum();
    Summary {
        accuracy: ratio(trace, total),
        precision: weighted(|c| c.precision),
        recall: weighted(|c| c.recall),
        f1: weighted(|c| c.f1),
        per_class,
    }
}

/// Confusion of top-1 predictions against position-aligned labels.
pub fn confusion(predictions: &[Prediction], truth: &[Labeled]) -> Result<ConfusionMatrix> {
    check_aligned(predictions, truth)?;
    Ok(ConfusionMatrix::from_pairs(
        truth.iter().zip(predictions).map(|(t, p)| (t.label, p.top1)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let pairs = RoleLabel::ALL.iter().flat_map(|&r| std::iter::repeat_n((r, r), 3));
        let s = weighted_metrics(&ConfusionMatrix::from_pairs(pairs));
        assert_eq!((s.accuracy, s.precision, s.recall, s.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn all_majority_on_skewed_counts() {
        let counts = [3_574u64, 1_354, 424, 24, 117_126];
        let mut m = ConfusionMatrix::default();
        for (c, &n) in counts.iter().enumerate() {
            m.counts[c][4] = n;
        }
        let s = weighted_metrics(&m);
        assert!((s.accuracy - 117_126.0 / 122_502.0).abs() < 1e-15);
        assert!((s.accuracy - 0.95612).abs() < 1e-5);
        assert_eq!(s.per_class[0].precision, 0.0);
        assert!((s.recall - s.accuracy).abs() < 1e-15);
    }

    #[test]
    fn csv_has_header_and_five_rows() {
        let csv = ConfusionMatrix::default().to_csv();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("true\\predicted,harasser"));
    }
}
