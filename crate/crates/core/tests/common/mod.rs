#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rolesense::corpus::RoleLabel;
use rolesense::eval::{Labeled, Prediction};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// `label,x0,..` CSV into (features, labels).
pub fn load_blobs(name: &str) -> (Array2<f64>, Vec<usize>) {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut dim = 0;
    for line in text.lines().skip(1) {
        let mut fields = line.split(',');
        labels.push(fields.next().unwrap().parse().unwrap());
        let row: Vec<f64> = fields.map(|f| f.parse().unwrap()).collect();
        dim = row.len();
        values.extend(row);
    }
    (Array2::from_shape_vec((labels.len(), dim), values).unwrap(), labels)
}

/// Random probability rows with a random truth per row.
pub fn random_predictions(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Prediction>, Vec<Labeled>) {
    let mut preds = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let raw: Vec<f64> = (0..5).map(|_| rng.gen::<f64>().powi(3)).collect();
        let id = format!("r{i}");
        preds.push(Prediction::from_row(id.clone(), &raw).unwrap());
        truth.push(Labeled::new(id, RoleLabel::ALL[rng.gen_range(0..5)]));
    }
    (preds, truth)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exhaustive nearest neighbours: sort every other point by squared
/// distance, ties by index.
pub fn knn_oracle(points: &Array2<f64>, query: usize, k: usize) -> Vec<usize> {
    let q = points.row(query);
    let mut d: Vec<(f64, usize)> = (0..points.nrows())
        .filter(|&j| j != query)
        .map(|j| {
            let dist = q.iter().zip(points.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            (dist, j)
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Largest relative gap between analytic and central-difference gradients
/// over every parameter. The denominator is floored at 1e-6 so parameters
/// whose gradient is (numerically) zero compare by absolute error.
pub fn max_gradient_error(
    head: &rolesense::neural::MlpHead<f64>,
    x: &Array2<f64>,
    y: &[usize],
    l2: f64,
    h: f64,
) -> f64 {
    use rolesense::neural::Mode;
    let (_, grads) = head.loss_and_grad(x.view(), y, l2, Mode::Eval).unwrap();
    let loss = |m: &rolesense::neural::MlpHead<f64>| m.loss_and_grad(x.view(), y, l2, Mode::Eval).unwrap().0;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
    let mut worst = 0.0f64;
    let mut probe = head.clone();
    for l in 0..head.layers().len() {
        for idx in 0..head.layers()[l].weights.len() {
            let (r, c) = (idx / head.layers()[l].weights.ncols(), idx % head.layers()[l].weights.ncols());
            let orig = probe.layers()[l].weights[[r, c]];
            probe.layers_mut()[l].weights[[r, c]] = orig + h;
            let up = loss(&probe);
            probe.layers_mut()[l].weights[[r, c]] = orig - h;
            let down = loss(&probe);
            probe.layers_mut()[l].weights[[r, c]] = orig;
            worst = worst.max(rel(grads.weights[l][[r, c]], (up - down) / (2.0 * h)));
        }
        for j in 0..head.layers()[l].bias.len() {
            let orig = probe.layers()[l].bias[j];
            probe.layers_mut()[l].bias[j] = orig + h;
            let up = loss(&probe);
            probe.layers_mut()[l].bias[j] = orig - h;
            let down = loss(&probe);
            probe.layers_mut()[l].bias[j] = orig;
            worst = worst.max(rel(grads.bias[l][j], (up - down) / (2.0 * h)));
        }
    }
    worst
}

/// Weighted Gini impurity of the best single split, by trying every
/// midpoint of every feature.
pub fn best_stump_impurity(x: &Array2<f64>, y: &[usize], w: &[f64], k: usize) -> f64 {
    let gini = |rows: &[usize]| {
        let total: f64 = rows.iter().map(|&r| w[r]).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut per = vec![0.0; k];
        for &r in rows {
            per[y[r]] += w[r];
        }
        total * (1.0 - per.iter().map(|p| (p / total) * (p / total)).sum::<f64>())
    };
    let all: Vec<usize> = (0..y.len()).collect();
    let mut best = gini(&all);
    for f in 0..x.ncols() {
        let mut vals: Vec<f64> = x.column(f).to_vec();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for pair in vals.windows(2) {
            let thr = (pair[0] + pair[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[[i, f]] <= thr);
            best = best.min(gini(&l) + gini(&r));
        }
    }
    best
}

/// Weighted Gini impurity of the partition a depth-one tree induces.
pub fn stump_impurity(tree: &rolesense::trees::Tree<f64>, x: &Array2<f64>, y: &[usize], w: &[f64], k: usize) -> f64 {
    use rolesense::trees::Node;
    let rows: Vec<usize> = (0..y.len()).collect();
    let parts: Vec<Vec<usize>> = match &tree.nodes()[0] {
        Node::Leaf { .. } => vec![rows],
        Node::Split { feature, threshold, .. } => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[[i, *feature]] <= *threshold);
            vec![l, r]
        }
    };
    parts
        .iter()
        .map(|p| {
            let total: f64 = p.iter().map(|&r| w[r]).sum();
            if total == 0.0 {
                return 0.0;
            }
            let mut per = vec![0.0; k];
            for &r in p {
                per[y[r]] += w[r];
            }
            total * (1.0 - per.iter().map(|q| (q / total) * (q / total)).sum::<f64>())
        })
        .sum()
}

/// SAMME recurrence replayed from the stumps' predictions:
/// `err = sum(w * miss) / sum(w)`, `alpha = ln((1-err)/err) + ln(K-1)`,
/// `w <- w * exp(alpha * miss)`, renormalized.
pub fn samme_replay(misses: &[Vec<bool>], k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = misses[0].len();
    let mut w = vec![1.0 / n as f64; n];
    let mut alphas = Vec::new();
    let mut weights = Vec::new();
    for miss in misses {
        let err: f64 = w.iter().zip(miss).filter(|(_, &m)| m).map(|(v, _)| v).sum::<f64>() / w.iter().sum::<f64>();
        let e = err.clamp(1e-10, 1.0 - 1e-10);
        let alpha = ((1.0 - e) / e).ln() + ((k - 1) as f64).ln();
        for (v, &m) in w.iter_mut().zip(miss) {
            if m {
                *v *= alpha.exp();
            }
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        alphas.push(alpha);
        weights.push(w.clone());
    }
    (alphas, weights)
}

/// Per-class tally straight from the label pairs.
pub fn tally_weighted_f1(truth: &[usize], pred: &[usize]) -> (f64, f64, f64, f64) {
    let n = truth.len() as f64;
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    let mut correct = 0.0;
    for c in 0..5 {
        let tp = truth.iter().zip(pred).filter(|(&t, &p)| t == c && p == c).count() as f64;
        let fp = truth.iter().zip(pred).filter(|(&t, &p)| t != c && p == c).count() as f64;
        let fn_ = truth.iter().zip(pred).filter(|(&t, &p)| t == c && p != c).count() as f64;
        let support = tp + fn_;
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if support > 0.0 { tp / support } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        wp += p * support / n;
        wr += r * support / n;
        wf += f * support / n;
        correct += tp;
    }
    (correct / n, wp, wr, wf)
}

/// Linear-interpolation percentile on a freshly sorted copy.
pub fn percentile_oracle(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (s.len() as f64 - 1.0);
    let i = pos.floor() as usize;
    if i + 1 >= s.len() {
        return s[s.len() - 1];
    }
    s[i] + (pos - i as f64) * (s[i + 1] - s[i])
}

/// A small head with random weights and random (nonzero) biases, so no
/// pre-activation sits exactly on the ReLU kink.
pub fn random_head(r: &mut ChaCha8Rng, input: usize, hidden: &[usize], seed: u64) -> rolesense::neural::MlpHead<f64> {
    let mut head = rolesense::neural::MlpHead::<f64>::with_shape(input, hidden, 5, seed).unwrap();
    for layer in head.layers_mut() {
        layer.bias.mapv_inplace(|_| r.gen_range(-0.5..0.5));
    }
    head
}
