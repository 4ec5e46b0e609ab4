//! Discrete multi-class AdaBoost (SAMME) over shallow Gini trees.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::cart::{fit_tree, CartParams};
use super::tree::Tree;
use super::{class_count, require_two_classes};
use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};
use crate::seed::derive_seed;

pub const ERROR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaBoostConfig {
    pub n_rounds: usize,
    pub stump_depth: usize,
    pub seed: u64,
}

impl Default for AdaBoostConfig {
    fn default() -> Self {
        AdaBoostConfig {
            n_rounds: 50,
            stump_depth: 1,
            seed: 0,
        }
    }
}

/// Stage weight for weighted error `err` over `k` classes, with `err`
/// clamped to `[1e-10, 1 - 1e-10]`.
pub fn samme_alpha(err: f64, k: usize) -> f64 {
    let e = err.clamp(ERROR_FLOOR, 1.0 - ERROR_FLOOR);
    ((1.0 - e) / e).ln() + ((k - 1) as f64).ln()
}

/// Per-round record of the boosting recurrence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoostTrace {
    pub errors: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Sample weights after each kept round's update.
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoost<T> {
    pub(crate) stages: Vec<(Tree<T>, f64)>,
    pub(crate) n_classes: usize,
}

impl<T: Scalar> AdaBoost<T> {
    pub fn fit(x: ArrayView2<T>, y: &[usize], cfg: &AdaBoostConfig) -> Result<Self> {
        Self::fit_traced(x, y, cfg).map(|(m, _)| m)
    }

    pub fn fit_traced(
        x: ArrayView2<T>,
        y: &[usize],
        cfg: &AdaBoostConfig,
    ) -> Result<(Self, BoostTrace)> {
        if cfg.stump_depth == 0 || cfg.n_rounds == 0 {
            return Err(Error::Config(
                "AdaBoost needs stump_depth >= 1 and n_rounds >= 1".into(),
            ));
        }
        require_two_classes(y)?;
        let k = class_count(y);
        let n = x.nrows();
        let mut weights = vec![1.0 / n as f64; n];
        let mut stages = Vec::new();
        let mut trace = BoostTrace::default();
        let rows: Vec<Vec<T>> = x.rows().into_iter().map(|r| r.to_vec()).collect();

        for round in 0..cfg.n_rounds {
            let params = CartParams {
                max_depth: Some(cfg.stump_depth),
                max_features: None,
                min_samples_split: 2,
                seed: derive_seed(cfg.seed, "adaboost-round", round as u64),
            };
            let tree = fit_tree(x, y, &weights, k, &params)?;
            let missed: Vec<bool> = rows
                .iter()
                .zip(y)
                .map(|(r, &label)| argmax(tree.leaf_for(r)) != label)
                .collect();
            let total: f64 = weights.iter().sum();
            let err: f64 = weights
                .iter()
                .zip(&missed)
                .filter(|(_, &m)| m)
                .map(|(w, _)| w)
                .sum::<f64>()
                / total;

            if err >= 1.0 - 1.0 / k as f64 {
                if stages.is_empty() {
                    return Err(Error::InvalidArgument(
                        "first boosting round is no better than chance".into(),
                    ));
                }
                break;
            }

            let alpha = samme_alpha(err, k);
            let boost = alpha.exp();
            for (w, &m) in weights.iter_mut().zip(&missed) {
                if m {
                    *w *= boost;
                }
            }
            let norm: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= norm);

            trace.errors.push(err);
            trace.alphas.push(alpha);
            trace.weights.push(weights.clone());
            stages.push((tree, alpha));

            if err <= 0.0 {
                // perfect fit: later rounds would refit the same tree
                break;
            }
        }
        Ok((AdaBoost { stages, n_classes: k }, trace))
    }

    pub fn stages(&self) -> &[(Tree<T>, f64)] {
        &self.stages
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Summed stage weights per class, normalized by the total weight.
    pub fn predict_proba(&self, x: ArrayView2<T>) -> Array2<f64> {
        let mut scores = Array2::zeros((x.nrows(), self.n_classes));
        let total: f64 = self.stages.iter().map(|(_, a)| a).sum();
        for (i, row) in x.rows().into_iter().enumerate() {
            let row = row.to_vec();
            for (tree, alpha) in &self.stages {
                scores[[i, argmax(tree.leaf_for(&row))]] += alpha;
            }
        }
        scores / total
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Vec<usize> {
        self.predict_proba(x)
            .rows()
            .into_iter()
            .map(|r| argmax(r.as_slice().expect("contiguous")))
            .collect()
    }
}
