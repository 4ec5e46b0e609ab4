//! ADASYN oversampling in embedding space.
//!
//! Each minority class is grown toward the majority count. Points whose
//! neighbourhood is dominated by other classes receive proportionally more
//! synthetic samples; each synthetic sample interpolates between a minority
//! point and one of its same-class nearest neighbours.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdasynConfig {
    pub k: usize,
    pub beta: f64,
    pub seed: u64,
}

impl Default for AdasynConfig {
    fn default() -> Self {
        AdasynConfig {
            k: 15,
            beta: 1.0,
            seed: 0,
        }
    }
}

impl AdasynConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("ADASYN k must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!(
                "ADASYN beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Where a synthetic point came from: `x_seed + u * (x_neighbor - x_seed)`.
/// Indices refer to rows of the original input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed_index: usize,
    pub neighbor_index: usize,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBatch<T> {
    pub vectors: Vec<EmbeddingVector<T>>,
    pub labels: Vec<usize>,
    pub provenance: Vec<Provenance>,
}

impl<T> SyntheticBatch<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Oversampled<T> {
    /// Original rows followed by synthetic rows.
    pub features: Array2<T>,
    pub labels: Vec<usize>,
    pub synthetic: SyntheticBatch<T>,
}

fn squared_distance<T: Scalar>(a: ndarray::ArrayView1<T>, b: ndarray::ArrayView1<T>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(T::zero(), |acc, v| acc + v)
}

fn nearest_among<T: Scalar>(
    points: ArrayView2<T>,
    query: usize,
    candidates: impl Iterator<Item = usize>,
    k: usize,
) -> Vec<usize> {
    let q = points.row(query);
    let mut scored: Vec<(T, usize)> = candidates
        .filter(|&j| j != query)
        .map(|j| (squared_distance(q, points.row(j)), j))
        .collect();
    scored.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    scored.truncate(k);
    scored.into_iter().map(|(_, j)| j).collect()
}

/// Indices of the `k` rows closest to row `query` (Euclidean), excluding the
/// query itself, nearest first; equal distances resolve to the lower index.
pub fn knn<T: Scalar>(points: ArrayView2<T>, query: usize, k: usize) -> Result<Vec<usize>> {
    let n = points.nrows();
    if query >= n {
        return Err(Error::InvalidArgument(format!(
            "query index {query} out of range for {n} points"
        )));
    }
    if k + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} neighbours requested but only {} other points exist",
            n - 1
        )));
    }
    Ok(nearest_among(points, query, 0..n, k))
}

/// Splits `total` across `weights` (summing to 1) with largest-remainder
/// rounding; leftover units go to the largest fractional parts, lowest index
/// first on ties.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = alloc.iter().sum();
    let mut remaining = total.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        alloc[i] += 1;
        remaining -= 1;
    }
    alloc
}

pub fn adasyn<T: Scalar>(
    features: ArrayView2<T>,
    labels: &[usize],
    cfg: &AdasynConfig,
) -> Result<Oversampled<T>> {
    cfg.validate()?;
    let n = features.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("ADASYN on an empty set".into()));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    let majority = counts.iter().copied().max().unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut synthetic = SyntheticBatch {
        vectors: Vec::new(),
        labels: Vec::new(),
        provenance: Vec::new(),
    };

    for class in 0..n_classes {
        let m_s = counts[class];
        if m_s == 0 || m_s == majority {
            continue;
        }
        let needed = (cfg.beta * (majority - m_s) as f64).round() as usize;
        if needed == 0 {
            continue;
        }
        if m_s < 2 {
            return Err(Error::InvalidArgument(format!(
                "class {class} has a single member; exclude it or duplicate it before oversampling"
            )));
        }
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();

        let k_all = cfg.k.min(n - 1);
        let ratios: Vec<f64> = members
            .iter()
            .map(|&i| {
                let hostile = nearest_among(features, i, 0..n, k_all)
                    .into_iter()
                    .filter(|&j| labels[j] != class)
                    .count();
                hostile as f64 / k_all as f64
            })
            .collect();
        let total: f64 = ratios.iter().sum();
        let weights: Vec<f64> = if total > 0.0 {
            ratios.iter().map(|r| r / total).collect()
        } else {
            vec![1.0 / m_s as f64; m_s]
        };
        let allocation = largest_remainder(&weights, needed);

        let k_same = cfg.k.min(m_s - 1);
        for (&i, &g) in members.iter().zip(&allocation) {
            if g == 0 {
                continue;
            }
            let neighbours = nearest_among(features, i, members.iter().copied(), k_same);
            let origin = features.row(i);
            for _ in 0..g {
                let z = neighbours[rng.gen_range(0..neighbours.len())];
                let u: f64 = rng.gen();
                let step = T::of(u);
                let target = features.row(z);
                let point: Vec<T> = origin
                    .iter()
                    .zip(target.iter())
                    .map(|(&a, &b)| a + step * (b - a))
                    .collect();
                synthetic.vectors.push(EmbeddingVector(point));
                synthetic.labels.push(class);
                synthetic.provenance.push(Provenance {
                    seed_index: i,
                    neighbor_index: z,
                    u,
                });
            }
        }
    }

    let d = features.ncols();
    let mut out = Array2::<T>::zeros((n + synthetic.len(), d));
    out.slice_mut(ndarray::s![..n, ..]).assign(&features);
    for (mut row, v) in out
        .axis_iter_mut(Axis(0))
        .skip(n)
        .zip(&synthetic.vectors)
    {
        row.iter_mut().zip(&v.0).for_each(|(dst, &src)| *dst = src);
    }
    let mut all_labels = labels.to_vec();
    all_labels.extend_from_slice(&synthetic.labels);

    Ok(Oversampled {
        features: out,
        labels: all_labels,
        synthetic,
    })
}
