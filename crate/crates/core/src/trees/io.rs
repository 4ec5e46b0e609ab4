//! `TRE1` artifact. Little-endian; thresholds and leaf values stored as f64.
//!
//! ```text
//! b"TRE1" | u32 version | u8 kind (0 forest, 1 adaboost, 2 gbt) | u32 n_classes | u32 groups
//! groups x { f64 weight | u32 n_trees | n_trees x tree }
//! tree = u32 n_nodes | nodes x (u8 0 | u32 feature | f64 threshold | u32 left | u32 right
//!                            | u8 1 | u32 len | len x f64)
//! ```
//!
//! A forest is one group of all trees; AdaBoost is one single-tree group per
//! stage with the stage weight; GBT is one group of `n_classes` trees per round.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::adaboost::AdaBoost;
use super::forest::RandomForest;
use super::gbt::GradientBoosting;
use super::tree::{Node, Tree};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"TRE1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeModel<T> {
    Forest(RandomForest<T>),
    AdaBoost(AdaBoost<T>),
    Gbt(GradientBoosting<T>),
}

fn fmt_err(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated TRE1 artifact".into())
    } else {
        Error::Format(e.to_string())
    }
}

fn write_tree<T: Scalar, W: Write>(tree: &Tree<T>, w: &mut W) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(tree.nodes.len() as u32)?;
    for node in &tree.nodes {
        match node {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                w.write_u8(0)?;
                w.write_u32::<LittleEndian>(*feature as u32)?;
                w.write_f64::<LittleEndian>(threshold.as_f64())?;
                w.write_u32::<LittleEndian>(*left as u32)?;
                w.write_u32::<LittleEndian>(*right as u32)?;
            }
            Node::Leaf { value } => {
                w.write_u8(1)?;
                w.write_u32::<LittleEndian>(value.len() as u32)?;
                for &v in value {
                    w.write_f64::<LittleEndian>(v)?;
                }
            }
        }
    }
    Ok(())
}

fn read_tree<T: Scalar, R: Read>(r: &mut R) -> Result<Tree<T>> {
    let n = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
    let mut nodes = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let node = match r.read_u8().map_err(fmt_err)? {
            0 => Node::Split {
                feature: r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize,
                threshold: T::of(r.read_f64::<LittleEndian>().map_err(fmt_err)?),
                left: r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize,
                right: r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize,
            },
            1 => {
                let len = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
                let value = (0..len)
                    .map(|_| r.read_f64::<LittleEndian>().map_err(fmt_err))
                    .collect::<Result<Vec<_>>>()?;
                Node::Leaf { value }
            }
            tag => return Err(Error::Format(format!("unknown node tag {tag}"))),
        };
        nodes.push(node);
    }
    // children must point forward so traversal terminates
    for (i, node) in nodes.iter().enumerate() {
        if let Node::Split { left, right, .. } = node {
            if *left <= i || *right <= i || *left >= n || *right >= n {
                return Err(Error::Format(format!("node {i} has invalid children")));
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::Format("empty tree".into()));
    }
    Ok(Tree::from_nodes(nodes))
}

pub fn write_tree_model<T: Scalar, W: Write>(model: &TreeModel<T>, mut w: W) -> std::io::Result<()> {
    let (kind, n_classes, groups): (u8, usize, Vec<(f64, Vec<&Tree<T>>)>) = match model {
        TreeModel::Forest(f) => (0, f.n_classes, vec![(1.0, f.trees.iter().collect())]),
        TreeModel::AdaBoost(a) => (
            1,
            a.n_classes,
            a.stages.iter().map(|(t, alpha)| (*alpha, vec![t])).collect(),
        ),
        TreeModel::Gbt(g) => (
            2,
            g.n_classes,
            g.rounds.iter().map(|r| (1.0, r.iter().collect())).collect(),
        ),
    };
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u8(kind)?;
    w.write_u32::<LittleEndian>(n_classes as u32)?;
    w.write_u32::<LittleEndian>(groups.len() as u32)?;
    for (weight, trees) in groups {
        w.write_f64::<LittleEndian>(weight)?;
        w.write_u32::<LittleEndian>(trees.len() as u32)?;
        for t in trees {
            write_tree(t, &mut w)?;
        }
    }
    w.flush()
}

pub fn read_tree_model<T: Scalar, R: Read>(mut r: R) -> Result<TreeModel<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(fmt_err)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a TRE1 artifact".into()));
    }
    read_tree_model_body(r)
}

pub(crate) fn read_tree_model_body<T: Scalar, R: Read>(mut r: R) -> Result<TreeModel<T>> {
    let version = r.read_u32::<LittleEndian>().map_err(fmt_err)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported TRE1 version {version}")));
    }
    let kind = r.read_u8().map_err(fmt_err)?;
    let n_classes = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
    let n_groups = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
    let mut groups = Vec::with_capacity(n_groups.min(1 << 16));
    for _ in 0..n_groups {
        let weight = r.read_f64::<LittleEndian>().map_err(fmt_err)?;
        let n_trees = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
        let trees = (0..n_trees)
            .map(|_| read_tree(&mut r))
            .collect::<Result<Vec<_>>>()?;
        groups.push((weight, trees));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(fmt_err)?;
    if !rest.is_empty() {
        return Err(Error::Format("trailing bytes after TRE1 artifact".into()));
    }
    match kind {
        0 => {
            let trees = groups.into_iter().next().map(|g| g.1).unwrap_or_default();
            if trees.is_empty() {
                return Err(Error::Format("forest has no trees".into()));
            }
            Ok(TreeModel::Forest(RandomForest { trees, n_classes }))
        }
        1 => {
            let mut stages = Vec::with_capacity(groups.len());
            for (alpha, mut trees) in groups {
                if trees.len() != 1 {
                    return Err(Error::Format("AdaBoost stage must hold one tree".into()));
                }
                stages.push((trees.pop().expect("one tree"), alpha));
            }
            Ok(TreeModel::AdaBoost(AdaBoost { stages, n_classes }))
        }
        2 => {
            let rounds: Vec<Vec<Tree<T>>> = groups.into_iter().map(|g| g.1).collect();
            if rounds.iter().any(|r| r.len() != n_classes) {
                return Err(Error::Format("GBT round must hold one tree per class".into()));
            }
            Ok(TreeModel::Gbt(GradientBoosting { rounds, n_classes }))
        }
        other => Err(Error::Format(format!("unknown tree model kind {other}"))),
    }
}

impl<T: Scalar> TreeModel<T> {
    pub fn n_classes(&self) -> usize {
        match self {
            TreeModel::Forest(m) => m.n_classes(),
            TreeModel::AdaBoost(m) => m.n_classes(),
            TreeModel::Gbt(m) => m.n_classes(),
        }
    }

    pub fn predict_proba(&self, x: ndarray::ArrayView2<T>) -> ndarray::Array2<f64> {
        match self {
            TreeModel::Forest(m) => m.predict_proba(x),
            TreeModel::AdaBoost(m) => m.predict_proba(x),
            TreeModel::Gbt(m) => m.predict_proba(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::{AdaBoostConfig, ForestConfig, GbtConfig};
    use ndarray::Array2;

    fn data() -> (Array2<f64>, Vec<usize>) {
        let x = Array2::from_shape_fn((30, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 3.0);
        let y = (0..30).map(|i| i % 3).collect();
        (x, y)
    }

    fn round_trip(model: TreeModel<f64>) {
        let mut buf = Vec::new();
        write_tree_model(&model, &mut buf).unwrap();
        let back: TreeModel<f64> = read_tree_model(&buf[..]).unwrap();
        assert_eq!(back, model);
        assert!(matches!(
            read_tree_model::<f64, _>(&buf[..buf.len() - 3]),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn all_kinds_round_trip() {
        let (x, y) = data();
        round_trip(TreeModel::Forest(
            RandomForest::fit(x.view(), &y, &ForestConfig { n_trees: 4, ..Default::default() }).unwrap(),
        ));
        round_trip(TreeModel::AdaBoost(
            AdaBoost::fit(x.view(), &y, &AdaBoostConfig { n_rounds: 5, ..Default::default() }).unwrap(),
        ));
        round_trip(TreeModel::Gbt(
            GradientBoosting::fit(x.view(), &y, &GbtConfig { n_rounds: 3, ..Default::default() }).unwrap(),
        ));
    }

    #[test]
    fn rejects_backward_child_pointer() {
        let tree = Tree::from_nodes(vec![
            Node::Split { feature: 0, threshold: 0.0f64, left: 0, right: 1 },
            Node::Leaf { value: vec![1.0, 0.0] },
        ]);
        let model = TreeModel::Forest(RandomForest { trees: vec![tree], n_classes: 2 });
        let mut buf = Vec::new();
        write_tree_model(&model, &mut buf).unwrap();
        assert!(read_tree_model::<f64, _>(&buf[..]).is_err());
    }
}
