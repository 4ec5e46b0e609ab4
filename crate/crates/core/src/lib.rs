//! Role detection in question-answer threads: directed context-target
//! samples, fused comment embeddings, latent-space ADASYN, dense and tree
//! classifiers, and selective-prediction metrics.
//!
//! The numeric code is generic over [`Scalar`]; the aliases below fix the
//! scalar the pipeline runs in.

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod model;
pub mod neural;
pub mod oversample;
pub mod pipeline;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod trees;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

/// Scalar used by the pipeline.
pub type Real = f32;

pub type Model = model::Model<Real>;
pub type MlpHead = neural::MlpHead<Real>;
pub type SnapshotEnsemble = neural::SnapshotEnsemble<Real>;
pub type RandomForest = trees::RandomForest<Real>;
pub type AdaBoost = trees::AdaBoost<Real>;
pub type GradientBoosting = trees::GradientBoosting<Real>;
