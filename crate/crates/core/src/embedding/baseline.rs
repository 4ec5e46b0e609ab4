//! Deterministic hashing embedder used when no precomputed table is given.

use std::hash::Hasher;

use twox_hash::XxHash64;

use super::EmbeddingVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MIN_DIM: usize = 8;

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize_baseline(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn hash_feature(kind: u8, feature: &str, seed: u64) -> u64 {
    let mut h = XxHash64::with_seed(seed);
    h.write_u8(kind);
    h.write(feature.as_bytes());
    h.finish()
}

/// Signed feature hashing of word unigrams and character 3-5-grams of each
/// `<word>`, L2-normalized. Empty text maps to the zero vector.
pub fn hash_embed<T: Scalar>(text: &str, dim: usize, seed: u64) -> Result<EmbeddingVector<T>> {
    if dim < MIN_DIM {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension {dim} below minimum {MIN_DIM}"
        )));
    }
    let mut acc = vec![0.0f64; dim];
    let mut add = |kind: u8, feature: &str| {
        let h = hash_feature(kind, feature, seed);
        let bucket = ((h >> 1) % dim as u64) as usize;
        if h & 1 == 0 {
            acc[bucket] += 1.0;
        } else {
            acc[bucket] -= 1.0;
        }
    };

    for token in tokenize_baseline(text) {
        add(b'w', &token);
        let padded: Vec<char> = std::iter::once('<')
            .chain(token.chars())
            .chain(std::iter::once('>'))
            .collect();
        for n in 3..=5 {
            for gram in padded.windows(n) {
                let gram: String = gram.iter().collect();
                add(b'c', &gram);
            }
        }
    }

    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        acc.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(EmbeddingVector(acc.into_iter().map(T::of).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize_baseline("Hi there!"), vec!["hi", "there"]);
        assert!(tokenize_baseline("").is_empty());
        assert_eq!(tokenize_baseline("a  b"), vec!["a", "b"]);
        assert_eq!(tokenize_baseline("...?!"), Vec::<String>::new());
    }

    #[test]
    fn embedding_is_deterministic_and_unit_norm() {
        let a: EmbeddingVector<f64> = hash_embed("you are so brave", 64, 3).unwrap();
        let b: EmbeddingVector<f64> = hash_embed("you are so brave", 64, 3).unwrap();
        assert_eq!(a, b);
        let norm = a.0.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn seed_changes_embedding() {
        let a: EmbeddingVector<f64> = hash_embed("leave me alone", 64, 1).unwrap();
        let b: EmbeddingVector<f64> = hash_embed("leave me alone", 64, 2).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let v: EmbeddingVector<f32> = hash_embed("", 16, 0).unwrap();
        assert!(v.0.iter().all(|&x| x == 0.0));
        assert_eq!(v.dim(), 16);
    }

    #[test]
    fn small_dimension_rejected() {
        assert!(hash_embed::<f64>("x", 4, 0).is_err());
    }
}
