//! Regenerates the committed fixtures under `fixtures/` at the workspace
//! root. Output is fully determined by the seeds below.
//!
//!     cargo run -p rolesense --example make_fixtures

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const VOCAB: [&[&str]; 5] = [
    &["loser", "idiot", "pathetic", "stupid", "ugly", "worthless", "freak", "clown", "moron", "trash"],
    &["please", "stop", "hurt", "crying", "scared", "sad", "why", "alone", "afraid", "begging"],
    &["respect", "kind", "support", "unfair", "enough", "defend", "protect", "nice", "wrong", "apologize"],
    &["haha", "lol", "agree", "exactly", "roasted", "savage", "burn", "rekt", "truth", "preach"],
    &["weather", "movie", "music", "pizza", "weekend", "school", "game", "book", "coffee", "travel"],
];
const FILLER: &[&str] = &["the", "a", "you", "is", "so", "really", "just", "that", "this", "and", "i", "it"];

fn comment(rng: &mut ChaCha8Rng, class: usize) -> String {
    let mut words: Vec<&str> = Vec::new();
    for _ in 0..rng.gen_range(3..=5) {
        words.push(VOCAB[class].choose(rng).unwrap());
    }
    for _ in 0..rng.gen_range(2..=6) {
        words.push(FILLER.choose(rng).unwrap());
    }
    words.shuffle(rng);
    words.join(" ")
}

fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn line(id: &str, q: &str, a: &str, qr: usize, ar: usize) -> String {
    serde_json::json!({"pair_id": id, "question": q, "answer": a, "q_role": qr, "a_role": ar}).to_string()
}

/// Every comment uses its own class vocabulary.
fn separable(rng: &mut ChaCha8Rng, pairs: usize) -> String {
    let weights = [0.25, 0.2, 0.12, 0.1, 0.33];
    let mut out = String::new();
    for p in 0..pairs {
        let (qr, ar) = (pick(rng, &weights), pick(rng, &weights));
        writeln!(out, "{}", line(&format!("s{p:04}"), &comment(rng, qr), &comment(rng, ar), qr, ar)).unwrap();
    }
    out
}

/// Harasser and victim comments keep their vocabulary, but 15% of them
/// carry the other of the two labels.
fn noisy(rng: &mut ChaCha8Rng, pairs: usize) -> String {
    let weights = [0.35, 0.35, 0.1, 0.1, 0.1];
    let mut out = String::new();
    let label = |rng: &mut ChaCha8Rng, c: usize| if c < 2 && rng.gen::<f64>() < 0.15 { 1 - c } else { c };
    for p in 0..pairs {
        let (qc, ac) = (pick(rng, &weights), pick(rng, &weights));
        let (q, a) = (comment(rng, qc), comment(rng, ac));
        let (qr, ar) = (label(rng, qc), label(rng, ac));
        writeln!(out, "{}", line(&format!("n{p:04}"), &q, &a, qr, ar)).unwrap();
    }
    out
}

/// `label,x0..x{dim-1}` rows from one Gaussian blob per class.
fn blobs(rng: &mut ChaCha8Rng, counts: &[usize], dim: usize, spread: f64, decimals: Option<i32>) -> String {
    let noise = Normal::new(0.0, spread).unwrap();
    let centers: Vec<Vec<f64>> = (0..counts.len())
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut out = String::from("label");
    for j in 0..dim {
        write!(out, ",x{j}").unwrap();
    }
    out.push('\n');
    for (c, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            write!(out, "{c}").unwrap();
            for j in 0..dim {
                let mut v = centers[c][j] + noise.sample(rng);
                if let Some(d) = decimals {
                    let s = 10f64.powi(d);
                    v = (v * s).round() / s;
                }
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    fs::create_dir_all(&dir).unwrap();
    let write = |name: &str, text: String| fs::write(dir.join(name), text).unwrap();

    write("separable.jsonl", separable(&mut ChaCha8Rng::seed_from_u64(11), 150));
    write("noisy.jsonl", noisy(&mut ChaCha8Rng::seed_from_u64(12), 200));
    write(
        "imbalanced_blobs.csv",
        blobs(&mut ChaCha8Rng::seed_from_u64(13), &[500, 100, 50, 20, 10], 8, 0.4, None),
    );
    write("boost30.csv", blobs(&mut ChaCha8Rng::seed_from_u64(14), &[10, 10, 10], 2, 0.6, Some(2)));
    write("gbt.csv", blobs(&mut ChaCha8Rng::seed_from_u64(15), &[100, 100, 100], 4, 0.5, Some(2)));
}
