use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Folds {
    /// Test indices per fold, ascending.
    pub folds: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

impl Folds {
    /// Complement of fold `i`, ascending.
    pub fn train_indices(&self, i: usize) -> Vec<usize> {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        train.sort_unstable();
        train
    }
}

/// Splits indices into `k` folds with every class spread as evenly as
/// possible. Members of each class are shuffled and dealt round-robin; each
/// class starts dealing where the previous one stopped, which also keeps the
/// fold totals within one of each other.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Folds> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need k >= 2 folds, got {k}")));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no samples to fold".into()));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut folds = vec![Vec::new(); k];
    let mut warnings = Vec::new();
    let mut offset = 0;
    for (class, idx) in members.iter_mut().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            warnings.push(format!(
                "class {class} has {} members for {k} folds; some folds get none",
                idx.len()
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "fold-class", class as u64));
        idx.shuffle(&mut rng);
        for (j, &i) in idx.iter().enumerate() {
            folds[(offset + j) % k].push(i);
        }
        offset = (offset + idx.len()) % k;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(Folds { folds, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class_counts(folds: &Folds, labels: &[usize], class: usize) -> Vec<usize> {
        folds
            .folds
            .iter()
            .map(|f| f.iter().filter(|&&i| labels[i] == class).count())
            .collect()
    }

    #[test]
    fn exact_division() {
        let labels: Vec<usize> = (0..50).map(|i| i % 5).collect();
        let folds = stratified_kfold(&labels, 10, 1).unwrap();
        for c in 0..5 {
            assert_eq!(class_counts(&folds, &labels, c), vec![1; 10]);
        }
        assert!(folds.warnings.is_empty());
    }

    #[test]
    fn small_class_warns() {
        let labels = [0, 0, 0, 1];
        let folds = stratified_kfold(&labels, 3, 0).unwrap();
        assert_eq!(folds.warnings.len(), 1);
        assert_eq!(folds.folds.iter().map(Vec::len).sum::<usize>(), 4);
    }

    #[test]
    fn train_is_complement() {
        let labels: Vec<usize> = (0..17).map(|i| i % 3).collect();
        let folds = stratified_kfold(&labels, 4, 9).unwrap();
        for i in 0..4 {
            let mut all = folds.train_indices(i);
            all.extend(&folds.folds[i]);
            all.sort_unstable();
            assert_eq!(all, (0..17).collect::<Vec<_>>());
        }
    }

    #[test]
    fn k_below_two_rejected() {
        assert!(stratified_kfold(&[0, 1], 1, 0).is_err());
    }
}
