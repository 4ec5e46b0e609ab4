//! Tree learners: random forest, SAMME AdaBoost and histogram gradient
//! boosting, plus their shared `TRE1` artifact format.

pub mod adaboost;
pub mod cart;
pub mod forest;
pub mod gbt;
pub mod io;
pub mod tree;

pub use adaboost::{samme_alpha, AdaBoost, AdaBoostConfig, BoostTrace};
pub use cart::{fit_tree, CartParams};
pub use forest::{ForestConfig, RandomForest};
pub use gbt::{BinMapper, GbtConfig, GbtTrace, GradientBoosting, SplitMethod};
pub use io::{read_tree_model, write_tree_model, TreeModel};
pub use tree::{Node, Tree};

use crate::error::{Error, Result};

/// One past the largest label.
pub(crate) fn class_count(y: &[usize]) -> usize {
    y.iter().max().map_or(0, |m| m + 1)
}

pub(crate) fn require_two_classes(y: &[usize]) -> Result<()> {
    match y.first() {
        None => Err(Error::InvalidArgument("no training rows".into())),
        Some(&first) if y.iter().all(|&l| l == first) => Err(Error::InvalidArgument(
            format!("training labels contain only class {first}"),
        )),
        _ => Ok(()),
    }
}
