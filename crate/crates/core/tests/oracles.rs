mod common;

use byteorder::{LittleEndian, WriteBytesExt};
use common::*;
use ndarray::Array2;
use rand::Rng;
use rolesense::corpus::RoleLabel;
use rolesense::embedding::EmbeddingTable;
use rolesense::eval::{
    calibrate_threshold, ecdf, stratified_kfold, threshold_adjusted, topk_adjusted, weighted_metrics,
    ConfusionMatrix, Labeled, Prediction, ThresholdPolicy,
};
use rolesense::oversample::{adasyn, knn, AdasynConfig};
use rolesense::trees::{AdaBoost, AdaBoostConfig, GbtConfig, GradientBoosting, Node, SplitMethod};

#[test]
fn knn_matches_exhaustive_sort() {
    let mut r = rng(1);
    for _ in 0..10 {
        let pts = Array2::from_shape_fn((200, 4), |_| r.gen_range(-1.0..1.0));
        for k in [1, 5, 15] {
            let q = r.gen_range(0..200);
            assert_eq!(knn(pts.view(), q, k).unwrap(), knn_oracle(&pts, q, k));
        }
    }
}

#[test]
fn knn_prefers_lower_index_on_ties() {
    let pts = ndarray::array![[0.0], [1.0], [-1.0], [2.0]];
    assert_eq!(knn(pts.view(), 0, 2).unwrap(), vec![1, 2]);
}

#[test]
fn adasyn_points_lie_on_same_class_segments() {
    let (x, y) = load_blobs("imbalanced_blobs.csv");
    let out = adasyn(x.view(), &y, &AdasynConfig { k: 15, beta: 1.0, seed: 3 }).unwrap();
    let mut counts = [0usize; 5];
    for &l in &out.labels {
        counts[l] += 1;
    }
    assert_eq!(counts, [500; 5]);
    for ((v, &l), p) in out.synthetic.vectors.iter().zip(&out.synthetic.labels).zip(&out.synthetic.provenance) {
        assert_eq!(y[p.seed_index], l);
        assert_eq!(y[p.neighbor_index], l);
        assert!((0.0..1.0).contains(&p.u));
        for j in 0..x.ncols() {
            let expect = x[[p.seed_index, j]] + p.u * (x[[p.neighbor_index, j]] - x[[p.seed_index, j]]);
            assert!((v.0[j] - expect).abs() < 1e-9);
        }
    }
}

#[test]
fn adasyn_with_beta_zero_adds_nothing() {
    let (x, y) = load_blobs("imbalanced_blobs.csv");
    let out = adasyn(x.view(), &y, &AdasynConfig { k: 5, beta: 0.0, seed: 0 }).unwrap();
    assert!(out.synthetic.is_empty());
}

#[test]
fn gradients_match_central_differences() {
    let mut r = rng(2);
    for trial in 0..5 {
        let d = r.gen_range(2..=8);
        let hidden = [r.gen_range(2..6), r.gen_range(2..5)];
        let head = random_head(&mut r, d, &hidden, trial);
        let x = Array2::from_shape_fn((6, d), |_| r.gen_range(-1.0..1.0));
        let y: Vec<usize> = (0..6).map(|_| r.gen_range(0..5)).collect();
        let err = max_gradient_error(&head, &x, &y, 0.01, 1e-5);
        assert!(err < 1e-4, "trial {trial}: {err}");
    }
}

#[test]
fn adaboost_follows_samme_recurrence() {
    let (x, y) = load_blobs("boost30.csv");
    let cfg = AdaBoostConfig { n_rounds: 10, ..Default::default() };
    let (model, trace) = AdaBoost::fit_traced(x.view(), &y, &cfg).unwrap();
    let misses: Vec<Vec<bool>> = model
        .stages()
        .iter()
        .map(|(t, _)| {
            x.rows()
                .into_iter()
                .zip(&y)
                .map(|(r, &l)| rolesense::scalar::argmax(t.leaf_for(r.as_slice().unwrap())) != l)
                .collect()
        })
        .collect();
    let (alphas, weights) = samme_replay(&misses, 3);
    assert_eq!(alphas.len(), trace.alphas.len());
    for (a, b) in alphas.iter().zip(&trace.alphas) {
        assert!((a - b).abs() < 1e-9);
    }
    for (wa, wb) in weights.iter().zip(&trace.weights) {
        for (a, b) in wa.iter().zip(wb) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn gbt_single_leaf_is_one_newton_step() {
    let x = ndarray::array![[0.0], [1.0], [2.0], [3.0]];
    let y = [0, 0, 0, 1];
    let cfg = GbtConfig { n_rounds: 1, max_depth: 0, row_subsample: 1.0, ..Default::default() };
    let model = GradientBoosting::fit(x.view(), &y, &cfg).unwrap();
    // p = 1/2 everywhere: class 1 has g = [0.5, 0.5, 0.5, -0.5], h = 0.25 each
    let expect = -(1.0) / (1.0 + 1.0) * 0.3;
    let Node::Leaf { value } = &model.rounds()[0][1].nodes()[0] else { panic!() };
    assert!((value[0] - expect).abs() < 1e-15);
}

#[test]
fn gbt_histogram_equals_exact_on_few_distinct_values() {
    let (x, y) = load_blobs("gbt.csv");
    let base = GbtConfig { n_rounds: 10, row_subsample: 1.0, ..Default::default() };
    let hist = GradientBoosting::fit(x.view(), &y, &base).unwrap();
    let exact = GradientBoosting::fit(x.view(), &y, &GbtConfig { split_method: SplitMethod::Exact, ..base }).unwrap();
    assert_eq!(hist, exact);
}

#[test]
fn fold_sizes_for_seven_and_five() {
    let labels: Vec<usize> = [vec![0; 7], vec![1; 5]].concat();
    let folds = stratified_kfold(&labels, 3, 4).unwrap();
    for (class, expect) in [(0, vec![3, 2, 2]), (1, vec![2, 2, 1])] {
        let mut sizes: Vec<usize> = folds
            .folds
            .iter()
            .map(|f| f.iter().filter(|&&i| labels[i] == class).count())
            .collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, expect);
    }
}

#[test]
fn metrics_match_a_direct_tally() {
    let mut r = rng(5);
    for _ in 0..20 {
        let (preds, truth) = random_predictions(&mut r, 200);
        let t: Vec<usize> = truth.iter().map(|l| l.label.index()).collect();
        let p: Vec<usize> = preds.iter().map(|p| p.top1.index()).collect();
        let s = weighted_metrics(&ConfusionMatrix::from_pairs(truth.iter().map(|l| l.label).zip(preds.iter().map(|p| p.top1))));
        let (acc, wp, wr, wf) = tally_weighted_f1(&t, &p);
        assert!((s.accuracy - acc).abs() < 1e-12);
        assert!((s.precision - wp).abs() < 1e-12);
        assert!((s.recall - wr).abs() < 1e-12);
        assert!((s.f1 - wf).abs() < 1e-12);
        assert!((s.recall - s.accuracy).abs() < 1e-12);
    }
}

#[test]
fn top2_never_loses_a_correct_prediction() {
    let mut r = rng(6);
    let (preds, truth) = random_predictions(&mut r, 300);
    let adj = topk_adjusted(&preds, &truth, 2).unwrap();
    for ((p, t), a) in preds.iter().zip(&truth).zip(&adj) {
        if p.top1 == t.label {
            assert_eq!(*a, t.label);
        }
    }
}

#[test]
fn rejection_rate_ignores_labels() {
    let mut r = rng(7);
    let (preds, truth) = random_predictions(&mut r, 100);
    let relabeled: Vec<Labeled> = truth
        .iter()
        .map(|t| Labeled::new(t.sample_id.clone(), RoleLabel::ALL[(t.label.index() + 1) % 5]))
        .collect();
    let (_, a) = threshold_adjusted(&preds, &truth, 0.4).unwrap();
    let (_, b) = threshold_adjusted(&preds, &relabeled, 0.4).unwrap();
    assert_eq!(a, b);
}

#[test]
fn calibration_matches_percentile_oracle_and_is_monotone() {
    let mut r = rng(8);
    let n = 40;
    let preds: Vec<Prediction> = (0..n)
        .map(|i| {
            let c = r.gen_range(0.2..1.0);
            let rest = (1.0 - c) / 4.0;
            Prediction::new(format!("s{i}"), [rest, c, rest, rest, rest]).unwrap()
        })
        .collect();
    let truth: Vec<Labeled> = (0..n).map(|i| Labeled::new(format!("s{i}"), RoleLabel::VICTIM)).collect();
    let conf: Vec<f64> = preds.iter().map(|p| p.top1_confidence).collect();
    let mut last = 0.0;
    for q in [5.0, 25.0, 50.0, 75.0, 95.0] {
        let tau = calibrate_threshold(&preds, &truth, &ThresholdPolicy { class: RoleLabel::VICTIM, percentile: q }).unwrap();
        assert!((tau - percentile_oracle(&conf, q)).abs() < 1e-12);
        assert!(tau >= last);
        last = tau;
    }
}

#[test]
fn ecdf_of_uniform_draws_is_within_dkw_bound() {
    let mut r = rng(9);
    let draws: Vec<f64> = (0..1000).map(|_| r.gen::<f64>()).collect();
    let points = ecdf(&draws).unwrap();
    let mut prev = 0.0;
    let mut worst = 0.0f64;
    for &(v, f) in &points {
        worst = worst.max((f - v).abs()).max((v - prev).abs());
        prev = f;
    }
    assert!(worst < 0.06, "{worst}");
    assert_eq!(points.last().unwrap().1, 1.0);
}

/// Builds a `CTE1` file byte by byte, independently of the library writer.
fn handmade_cte(dim: u32, meta: &str, records: &[(&str, Vec<f32>)]) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(b"CTE1");
    b.write_u32::<LittleEndian>(1).unwrap();
    b.write_u32::<LittleEndian>(dim).unwrap();
    b.write_u64::<LittleEndian>(records.len() as u64).unwrap();
    b.write_u32::<LittleEndian>(meta.len() as u32).unwrap();
    b.extend_from_slice(meta.as_bytes());
    for (id, v) in records {
        b.write_u16::<LittleEndian>(id.len() as u16).unwrap();
        b.extend_from_slice(id.as_bytes());
        for &x in v {
            b.write_f32::<LittleEndian>(x).unwrap();
        }
    }
    b
}

#[test]
fn exported_vectors_load_bit_for_bit() {
    let records = vec![
        ("p1:q", vec![0.1f32, -3.5, f32::MIN_POSITIVE]),
        ("p1:a", vec![1e-38f32, 7.25, -0.0]),
        ("p2:q", vec![0.0f32, 1.0, 2.0]),
    ];
    let bytes = handmade_cte(3, "pooling=first-token max_length=12", &records);
    let table = EmbeddingTable::read_from(&bytes[..]).unwrap();
    assert_eq!(table.metadata(), "pooling=first-token max_length=12");
    for (id, v) in &records {
        let got = table.get(id).unwrap();
        assert!(got.iter().zip(v).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    let mut again = Vec::new();
    table.write_to(&mut again).unwrap();
    assert_eq!(again, bytes);
}

#[test]
fn thresholding_can_lower_weighted_f1() {
    // one low-confidence miss whose second choice is also wrong: the false
    // positive moves from a small class to a large one
    let rows: [(usize, usize, usize, f64); 6] = [
        (0, 0, 1, 0.9),
        (0, 1, 2, 0.4),
        (1, 1, 0, 0.9),
        (2, 2, 0, 0.9),
        (2, 2, 0, 0.9),
        (2, 2, 0, 0.9),
    ];
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    for (i, &(t, first, second, c)) in rows.iter().enumerate() {
        let mut p = [(1.0 - c) * 0.4 / 3.0; 5];
        p[first] = c;
        p[second] = (1.0 - c) * 0.6;
        preds.push(Prediction::new(format!("s{i}"), p).unwrap());
        truth.push(Labeled::new(format!("s{i}"), RoleLabel::ALL[t]));
    }
    let m = rolesense::eval::evaluate(&preds, &truth, 0.5).unwrap();
    assert!(m.rejection_rate > 0.0);
    assert!(m.thresholded.f1 < m.top1.f1, "{} vs {}", m.thresholded.f1, m.top1.f1);
}
