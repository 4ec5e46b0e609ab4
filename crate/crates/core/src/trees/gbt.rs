//! Softmax gradient boosting with histogram split finding.
//!
//! Each round fits one regression tree per class to the first and second
//! derivatives of the cross-entropy at the current scores. Candidate split
//! points come from per-feature quantile bin edges computed once from the
//! training data; with at most `n_bins` distinct values per feature the edges
//! are the distinct values themselves and the histogram search is exact.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{Node, Tree};
use super::{class_count, require_two_classes};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const HESSIAN_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMethod {
    #[default]
    Histogram,
    /// Sort-based search over every distinct value; the reference the
    /// histogram search is checked against.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub row_subsample: f64,
    pub n_bins: usize,
    /// L2 penalty on leaf values.
    pub reg_lambda: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    pub split_method: SplitMethod,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_rounds: 100,
            max_depth: 6,
            learning_rate: 0.3,
            row_subsample: 0.5,
            n_bins: 256,
            reg_lambda: 1.0,
            min_child_weight: 1.0,
            split_method: SplitMethod::Histogram,
            seed: 0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if !(2..=256).contains(&self.n_bins) {
            return Err(Error::Config(format!("n_bins {} outside [2, 256]", self.n_bins)));
        }
        if !(self.row_subsample > 0.0 && self.row_subsample <= 1.0) {
            return Err(Error::Config(format!(
                "row_subsample {} outside (0, 1]",
                self.row_subsample
            )));
        }
        if self.n_rounds == 0 || self.reg_lambda < 0.0 || self.min_child_weight < 0.0 {
            return Err(Error::Config(
                "n_rounds must be >= 1; reg_lambda and min_child_weight >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Per-feature ascending bin upper edges. A value lands in the first bin
/// whose edge is `>=` it.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMapper<T> {
    edges: Vec<Vec<T>>,
}

impl<T: Scalar> BinMapper<T> {
    pub fn fit(x: ArrayView2<T>, n_bins: usize) -> Self {
        let edges = x
            .axis_iter(Axis(1))
            .map(|col| {
                let mut v = col.to_vec();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                let mut distinct = v.clone();
                distinct.dedup();
                if distinct.len() <= n_bins {
                    return distinct;
                }
                let n = v.len();
                let mut e: Vec<T> = (1..=n_bins)
                    .map(|j| v[((j * n) as f64 / n_bins as f64).ceil() as usize - 1])
                    .collect();
                e.dedup();
                e
            })
            .collect();
        BinMapper { edges }
    }

    pub fn edges(&self, feature: usize) -> &[T] {
        &self.edges[feature]
    }

    pub fn bin(&self, feature: usize, value: T) -> usize {
        let e = &self.edges[feature];
        e.partition_point(|&edge| edge < value).min(e.len() - 1)
    }

    fn transform(&self, x: ArrayView2<T>) -> Array2<u8> {
        Array2::from_shape_fn(x.dim(), |(i, f)| self.bin(f, x[[i, f]]) as u8)
    }
}

struct SplitCandidate<T> {
    feature: usize,
    threshold: T,
    gain: f64,
}

struct TreeBuilder<'a, 'x, T> {
    x: ArrayView2<'x, T>,
    bins: &'a Array2<u8>,
    mapper: &'a BinMapper<T>,
    cfg: &'a GbtConfig,
}

impl<T: Scalar> TreeBuilder<'_, '_, T> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.reg_lambda)
    }

    fn consider(
        &self,
        best: &mut Option<SplitCandidate<T>>,
        feature: usize,
        threshold: T,
        (gl, hl): (f64, f64),
        (g, h): (f64, f64),
    ) {
        let (gr, hr) = (g - gl, h - hl);
        if hl < self.cfg.min_child_weight || hr < self.cfg.min_child_weight {
            return;
        }
        let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - self.score(g, h));
        if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
            *best = Some(SplitCandidate {
                feature,
                threshold,
                gain,
            });
        }
    }

    fn histogram_split(
        &self,
        rows: &[usize],
        grad: &[f64],
        hess: &[f64],
        totals: (f64, f64),
    ) -> Option<SplitCandidate<T>> {
        let mut best = None;
        for f in 0..self.x.ncols() {
            let edges = self.mapper.edges(f);
            if edges.len() < 2 {
                continue;
            }
            let mut hg = vec![0.0; edges.len()];
            let mut hh = vec![0.0; edges.len()];
            for &r in rows {
                let b = self.bins[[r, f]] as usize;
                hg[b] += grad[r];
                hh[b] += hess[r];
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for b in 0..edges.len() - 1 {
                gl += hg[b];
                hl += hh[b];
                self.consider(&mut best, f, edges[b], (gl, hl), totals);
            }
        }
        best
    }

    fn exact_split(
        &self,
        rows: &[usize],
        grad: &[f64],
        hess: &[f64],
        totals: (f64, f64),
    ) -> Option<SplitCandidate<T>> {
        let mut best = None;
        for f in 0..self.x.ncols() {
            let mut sorted: Vec<usize> = rows.to_vec();
            sorted.sort_by(|&a, &b| {
                self.x[[a, f]]
                    .partial_cmp(&self.x[[b, f]])
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let (mut gl, mut hl) = (0.0, 0.0);
            let mut i = 0;
            while i < sorted.len() {
                let value = self.x[[sorted[i], f]];
                let (mut gg, mut gh) = (0.0, 0.0);
                while i < sorted.len() && self.x[[sorted[i], f]] == value {
                    gg += grad[sorted[i]];
                    gh += hess[sorted[i]];
                    i += 1;
                }
                if i == sorted.len() {
                    break;
                }
                gl += gg;
                hl += gh;
                self.consider(&mut best, f, value, (gl, hl), totals);
            }
        }
        best
    }

    fn build(&self, rows: Vec<usize>, grad: &[f64], hess: &[f64]) -> Tree<T> {
        let mut nodes = vec![Node::Leaf { value: Vec::new() }];
        let mut stack = vec![(0usize, rows, 0usize)];
        while let Some((slot, rows, depth)) = stack.pop() {
            let g: f64 = rows.iter().map(|&r| grad[r]).sum();
            let h: f64 = rows.iter().map(|&r| hess[r]).sum();
            let split = if depth < self.cfg.max_depth {
                match self.cfg.split_method {
                    SplitMethod::Histogram => self.histogram_split(&rows, grad, hess, (g, h)),
                    SplitMethod::Exact => self.exact_split(&rows, grad, hess, (g, h)),
                }
            } else {
                None
            };
            let Some(split) = split else {
                let weight = -g / (h + self.cfg.reg_lambda) * self.cfg.learning_rate;
                nodes[slot] = Node::Leaf { value: vec![weight] };
                continue;
            };
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&r| self.x[[r, split.feature]] <= split.threshold);
            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf { value: Vec::new() });
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
        Tree::from_nodes(nodes)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GbtTrace {
    /// Mean training cross-entropy before the first round and after each
    /// round.
    pub train_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBoosting<T> {
    /// `rounds[r][k]` is the class-`k` tree of round `r`; leaf values already
    /// include the learning rate.
    pub(crate) rounds: Vec<Vec<Tree<T>>>,
    pub(crate) n_classes: usize,
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    row.iter_mut().for_each(|v| *v = (*v - max).exp());
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= sum);
}

fn mean_cross_entropy(scores: &Array2<f64>, y: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &label) in scores.rows().into_iter().zip(y) {
        let mut p = row.to_vec();
        softmax_in_place(&mut p);
        total -= p[label].max(1e-300).ln();
    }
    total / y.len() as f64
}

impl<T: Scalar> GradientBoosting<T> {
    pub fn fit(x: ArrayView2<T>, y: &[usize], cfg: &GbtConfig) -> Result<Self> {
        Self::fit_traced(x, y, cfg).map(|(m, _)| m)
    }

    pub fn fit_traced(x: ArrayView2<T>, y: &[usize], cfg: &GbtConfig) -> Result<(Self, GbtTrace)> {
        cfg.validate()?;
        require_two_classes(y)?;
        let k = class_count(y);
        let n = x.nrows();
        let mapper = BinMapper::fit(x, cfg.n_bins);
        let bins = mapper.transform(x);
        let builder = TreeBuilder {
            x,
            bins: &bins,
            mapper: &mapper,
            cfg,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut scores = Array2::<f64>::zeros((n, k));
        let mut trace = GbtTrace {
            train_loss: vec![mean_cross_entropy(&scores, y)],
        };
        let mut rounds = Vec::with_capacity(cfg.n_rounds);
        let rows_t: Vec<Vec<T>> = x.rows().into_iter().map(|r| r.to_vec()).collect();

        for _ in 0..cfg.n_rounds {
            let mut grad = Array2::<f64>::zeros((n, k));
            let mut hess = Array2::<f64>::zeros((n, k));
            for i in 0..n {
                let mut p = scores.row(i).to_vec();
                softmax_in_place(&mut p);
                for c in 0..k {
                    let target = if y[i] == c { 1.0 } else { 0.0 };
                    grad[[i, c]] = p[c] - target;
                    hess[[i, c]] = (p[c] * (1.0 - p[c])).max(HESSIAN_FLOOR);
                }
            }
            let rows: Vec<usize> = if cfg.row_subsample < 1.0 {
                let take = ((cfg.row_subsample * n as f64).round() as usize).clamp(1, n);
                let mut picked = rand::seq::index::sample(&mut rng, n, take).into_vec();
                picked.sort_unstable();
                picked
            } else {
                (0..n).collect()
            };

            let trees: Vec<Tree<T>> = (0..k)
                .map(|c| {
                    let g = grad.column(c).to_vec();
                    let h = hess.column(c).to_vec();
                    builder.build(rows.clone(), &g, &h)
                })
                .collect();
            for (i, row) in rows_t.iter().enumerate() {
                for (c, tree) in trees.iter().enumerate() {
                    scores[[i, c]] += tree.leaf_for(row)[0];
                }
            }
            trace.train_loss.push(mean_cross_entropy(&scores, y));
            rounds.push(trees);
        }
        Ok((GradientBoosting { rounds, n_classes: k }, trace))
    }

    pub fn rounds(&self) -> &[Vec<Tree<T>>] {
        &self.rounds
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn raw_scores(&self, x: ArrayView2<T>) -> Array2<f64> {
        let mut scores = Array2::zeros((x.nrows(), self.n_classes));
        for (i, row) in x.rows().into_iter().enumerate() {
            let row = row.to_vec();
            for trees in &self.rounds {
                for (c, tree) in trees.iter().enumerate() {
                    scores[[i, c]] += tree.leaf_for(&row)[0];
                }
            }
        }
        scores
    }

    pub fn predict_proba(&self, x: ArrayView2<T>) -> Array2<f64> {
        let mut scores = self.raw_scores(x);
        for mut row in scores.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("contiguous"));
        }
        scores
    }
}
