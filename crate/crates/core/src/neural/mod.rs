//! Dense classification head, its training loop, and epoch-snapshot
//! ensembles.

mod ensemble;
pub mod io;
mod mlp;
mod train;

pub use ensemble::{combine_outputs, Combine, Snapshot, SnapshotEnsemble};
pub use mlp::{DenseLayer, Gradients, MlpHead, Mode, DEFAULT_HIDDEN, PROB_FLOOR};
pub use train::{
    evaluate_loss, one_hot, stratified_tail_split, train, EarlyStopping, TrainConfig, TrainLog,
    TrainOutcome,
};
