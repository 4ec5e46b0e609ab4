use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cart::{fit_tree, CartParams};
use super::tree::Tree;
use super::{class_count, require_two_classes};
use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 300,
            bootstrap: false,
            features_per_split: None,
            max_depth: None,
            seed: 0,
        }
    }
}

/// Majority-vote ensemble of unpruned Gini trees.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest<T> {
    pub(crate) trees: Vec<Tree<T>>,
    pub(crate) n_classes: usize,
}

impl<T: Scalar> RandomForest<T> {
    pub fn fit(x: ArrayView2<T>, y: &[usize], cfg: &ForestConfig) -> Result<Self> {
        if cfg.n_trees == 0 {
            return Err(Error::Config("n_trees must be >= 1".into()));
        }
        require_two_classes(y)?;
        let n_classes = class_count(y);
        let (n, d) = x.dim();
        let m = cfg
            .features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize);

        let trees = (0..cfg.n_trees)
            .map(|t| {
                let tree_seed = derive_seed(cfg.seed, "forest-tree", t as u64);
                let weights = if cfg.bootstrap {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        cfg.seed,
                        "forest-bootstrap",
                        t as u64,
                    ));
                    let mut w = vec![0.0; n];
                    for _ in 0..n {
                        w[rng.gen_range(0..n)] += 1.0;
                    }
                    w
                } else {
                    vec![1.0; n]
                };
                let params = CartParams {
                    max_depth: cfg.max_depth,
                    max_features: Some(m),
                    min_samples_split: 2,
                    seed: tree_seed,
                };
                fit_tree(x, y, &weights, n_classes, &params)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RandomForest { trees, n_classes })
    }

    pub fn trees(&self) -> &[Tree<T>] {
        &self.trees
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Vote shares per class; each entry is a multiple of `1 / n_trees`.
    pub fn predict_proba(&self, x: ArrayView2<T>) -> Array2<f64> {
        let mut votes = Array2::zeros((x.nrows(), self.n_classes));
        for (i, row) in x.rows().into_iter().enumerate() {
            let row = row.to_vec();
            for tree in &self.trees {
                votes[[i, argmax(tree.leaf_for(&row))]] += 1.0;
            }
        }
        votes / self.trees.len() as f64
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Vec<usize> {
        self.predict_proba(x)
            .rows()
            .into_iter()
            .map(|r| argmax(r.as_slice().expect("contiguous")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn blobs() -> (Array2<f64>, Vec<usize>) {
        let mut x = Array2::zeros((60, 3));
        let mut y = Vec::new();
        for i in 0..60 {
            let c = i % 3;
            x[[i, 0]] = c as f64 * 2.0 + (i as f64 * 0.37).sin() * 0.4;
            x[[i, 1]] = (i as f64 * 1.3).cos();
            x[[i, 2]] = (c as f64 - 1.0) * 1.5 + (i as f64 * 0.11).sin() * 0.3;
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn fits_training_set_exactly() {
        let (x, y) = blobs();
        let cfg = ForestConfig { n_trees: 15, ..Default::default() };
        let forest = RandomForest::fit(x.view(), &y, &cfg).unwrap();
        assert_eq!(forest.predict(x.view()), y);
    }

    #[test]
    fn all_features_means_identical_trees() {
        let (x, y) = blobs();
        let cfg = ForestConfig {
            n_trees: 5,
            features_per_split: Some(3),
            ..Default::default()
        };
        let forest = RandomForest::fit(x.view(), &y, &cfg).unwrap();
        assert!(forest.trees().windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn vote_shares_are_multiples_of_tree_count() {
        let (x, y) = blobs();
        let cfg = ForestConfig { n_trees: 7, seed: 3, ..Default::default() };
        let forest = RandomForest::fit(x.view(), &y, &cfg).unwrap();
        let p = forest.predict_proba(x.view());
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            for &v in row {
                let k = v * 7.0;
                assert!((k - k.round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = Array2::<f64>::zeros((3, 2));
        assert!(RandomForest::fit(x.view(), &[1, 1, 1], &ForestConfig::default()).is_err());
    }

    #[test]
    fn bootstrap_changes_trees() {
        let (x, y) = blobs();
        let base = ForestConfig { n_trees: 3, features_per_split: Some(3), ..Default::default() };
        let boot = ForestConfig { bootstrap: true, ..base.clone() };
        let a = RandomForest::fit(x.view(), &y, &base).unwrap();
        let b = RandomForest::fit(x.view(), &y, &boot).unwrap();
        assert_ne!(a.trees()[0], b.trees()[0]);
    }
}
