//! Weighted Gini classification trees.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::{Node, Tree};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    /// Features drawn per split; `None` uses all of them.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            max_depth: None,
            max_features: None,
            min_samples_split: 2,
            seed: 0,
        }
    }
}

struct SplitChoice<T> {
    feature: usize,
    threshold: T,
    score: f64,
}

/// `sum_c w_c^2 / W`; larger means purer. Maximizing the sum of this over
/// both children minimizes the weighted Gini impurity of the split.
fn purity(class_weights: &[f64]) -> f64 {
    let total: f64 = class_weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    class_weights.iter().map(|w| w * w).sum::<f64>() / total
}

fn midpoint<T: Scalar>(a: T, b: T) -> T {
    let mid = a + (b - a) / T::of(2.0);
    if mid >= a && mid < b {
        mid
    } else {
        a
    }
}

fn best_split_on_feature<T: Scalar>(
    x: &ArrayView2<T>,
    y: &[usize],
    weights: &[f64],
    rows: &[usize],
    feature: usize,
    n_classes: usize,
    total: &[f64],
) -> Option<SplitChoice<T>> {
    let mut sorted: Vec<(T, usize)> = rows.iter().map(|&r| (x[[r, feature]], r)).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    if sorted.first()?.0 == sorted.last()?.0 {
        return None;
    }
    let mut left = vec![0.0; n_classes];
    let mut right = vec![0.0; n_classes];
    let mut best: Option<SplitChoice<T>> = None;
    for i in 0..sorted.len() - 1 {
        let (v, r) = sorted[i];
        left[y[r]] += weights[r];
        let next = sorted[i + 1].0;
        if v >= next {
            continue;
        }
        for c in 0..n_classes {
            right[c] = total[c] - left[c];
        }
        let score = purity(&left) + purity(&right);
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(SplitChoice {
                feature,
                threshold: midpoint(v, next),
                score,
            });
        }
    }
    best
}

/// Grows a classification tree on the rows with positive weight.
pub fn fit_tree<T: Scalar>(
    x: ArrayView2<T>,
    y: &[usize],
    weights: &[f64],
    n_classes: usize,
    params: &CartParams,
) -> Result<Tree<T>> {
    let (n, d) = x.dim();
    if y.len() != n || weights.len() != n {
        return Err(Error::InvalidArgument(
            "features, labels and weights disagree in length".into(),
        ));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("no features".into()));
    }
    let rows: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no rows with positive weight".into()));
    }
    let m = params.max_features.unwrap_or(d).clamp(1, d);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut features: Vec<usize> = (0..d).collect();

    let mut nodes: Vec<Node<T>> = Vec::new();
    // (arena slot, rows, depth)
    let mut stack = vec![(0usize, rows, 0usize)];
    nodes.push(Node::Leaf { value: Vec::new() });

    while let Some((slot, rows, depth)) = stack.pop() {
        let mut totals = vec![0.0; n_classes];
        for &r in &rows {
            totals[y[r]] += weights[r];
        }
        let make_leaf = |totals: &[f64]| {
            let sum: f64 = totals.iter().sum();
            Node::Leaf {
                value: totals.iter().map(|w| w / sum).collect(),
            }
        };
        let classes_present = totals.iter().filter(|&&w| w > 0.0).count();
        let depth_reached = params.max_depth.is_some_and(|md| depth >= md);
        if classes_present <= 1 || depth_reached || rows.len() < params.min_samples_split {
            nodes[slot] = make_leaf(&totals);
            continue;
        }

        features.shuffle(&mut rng);
        let mut first: Vec<usize> = features[..m].to_vec();
        first.sort_unstable();
        let mut best: Option<SplitChoice<T>> = None;
        for &f in &first {
            if let Some(c) = best_split_on_feature(&x, y, weights, &rows, f, n_classes, &totals) {
                if best.as_ref().is_none_or(|b| c.score > b.score) {
                    best = Some(c);
                }
            }
        }
        if best.is_none() {
            // every drawn feature is constant here; keep drawing
            for &f in &features[m..] {
                best = best_split_on_feature(&x, y, weights, &rows, f, n_classes, &totals);
                if best.is_some() {
                    break;
                }
            }
        }
        let Some(split) = best else {
            nodes[slot] = make_leaf(&totals);
            continue;
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| x[[r, split.feature]] <= split.threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf { value: Vec::new() });
        let right = nodes.len();
        nodes.push(Node::Leaf { value: Vec::new() });
        nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        stack.push((right, right_rows, depth + 1));
        stack.push((left, left_rows, depth + 1));
    }
    Ok(Tree::from_nodes(nodes))
}
