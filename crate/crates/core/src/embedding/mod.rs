//! Comment embeddings and target/context fusion.

mod baseline;
mod table;

pub use baseline::{hash_embed, tokenize_baseline, MIN_DIM};
pub use table::{EmbeddingTable, MAGIC, VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<T>(pub Vec<T>);

impl<T: Scalar> EmbeddingVector<T> {
    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

impl<T> From<Vec<T>> for EmbeddingVector<T> {
    fn from(v: Vec<T>) -> Self {
        EmbeddingVector(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub lambda: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { lambda: 0.5 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "fusion lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// `target + lambda * context`, elementwise.
pub fn fuse<T: Scalar>(target: &[T], context: &[T], cfg: FusionConfig) -> Result<EmbeddingVector<T>> {
    if target.len() != context.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            actual: context.len(),
        });
    }
    let lambda = T::of(cfg.lambda);
    Ok(EmbeddingVector(
        target
            .iter()
            .zip(context)
            .map(|(&t, &c)| t + lambda * c)
            .collect(),
    ))
}
