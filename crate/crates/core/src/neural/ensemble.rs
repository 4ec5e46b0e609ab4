use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::mlp::MlpHead;
use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};

/// How member outputs are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combine {
    /// Mean of member softmax rows.
    #[default]
    Mean,
    /// Share of members voting for each class (argmax, ties low).
    Vote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub epoch: usize,
    pub head: MlpHead<T>,
}

/// Checkpoints of one training run, taken every `interval` epochs from
/// `min_epoch` on.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEnsemble<T> {
    members: Vec<Snapshot<T>>,
    min_epoch: usize,
    interval: usize,
    combine: Combine,
}

impl<T: Scalar> SnapshotEnsemble<T> {
    pub fn new(
        members: Vec<Snapshot<T>>,
        min_epoch: usize,
        interval: usize,
        combine: Combine,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("ensemble has no members".into()));
        }
        if members
            .windows(2)
            .any(|w| w[1].epoch <= w[0].epoch)
        {
            return Err(Error::InvalidArgument(
                "snapshot epochs must be strictly increasing".into(),
            ));
        }
        let dim = members[0].head.input_dim();
        if members.iter().any(|m| m.head.input_dim() != dim) {
            return Err(Error::InvalidArgument(
                "ensemble members disagree on input dimension".into(),
            ));
        }
        Ok(SnapshotEnsemble {
            members,
            min_epoch,
            interval,
            combine,
        })
    }

    /// Wraps a single head.
    pub fn single(head: MlpHead<T>, epoch: usize) -> Self {
        SnapshotEnsemble {
            members: vec![Snapshot { epoch, head }],
            min_epoch: epoch,
            interval: 1,
            combine: Combine::Mean,
        }
    }

    pub fn members(&self) -> &[Snapshot<T>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn min_epoch(&self) -> usize {
        self.min_epoch
    }

    pub fn interval(&self) -> usize {
        self.interval
    }

    pub fn combine(&self) -> Combine {
        self.combine
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].head.input_dim()
    }

    pub fn predict_proba(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        let outputs = self
            .members
            .iter()
            .map(|m| m.head.predict_proba(x))
            .collect::<Result<Vec<_>>>()?;
        combine_outputs(&outputs, self.combine)
    }
}

/// Combines per-member probability matrices of identical shape.
pub fn combine_outputs<T: Scalar>(outputs: &[Array2<T>], combine: Combine) -> Result<Array2<T>> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::InvalidArgument("ensemble has no members".into()))?;
    let n = T::of(outputs.len() as f64);
    let mut acc = Array2::<T>::zeros(first.raw_dim());
    for out in outputs {
        if out.dim() != first.dim() {
            return Err(Error::InvalidArgument(
                "member outputs differ in shape".into(),
            ));
        }
        match combine {
            Combine::Mean => acc += out,
            Combine::Vote => {
                for (i, row) in out.rows().into_iter().enumerate() {
                    let winner = argmax(row.as_slice().unwrap_or(&row.to_vec()));
                    acc[[i, winner]] += T::one();
                }
            }
        }
    }
    acc.mapv_inplace(|v| v / n);
    Ok(acc)
}
