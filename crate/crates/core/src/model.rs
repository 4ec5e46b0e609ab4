//! Classifier configurations behind one fit/predict/save interface.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{self, MlpHead, SnapshotEnsemble, TrainConfig, TrainLog, DEFAULT_HIDDEN};
use crate::scalar::Scalar;
use crate::trees::{
    self, AdaBoost, AdaBoostConfig, ForestConfig, GbtConfig, GradientBoosting, RandomForest,
    TreeModel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: DEFAULT_HIDDEN.to_vec(),
            train: TrainConfig::default(),
        }
    }
}

/// Model choice with its parameters. `seed` fields inside are replaced by
/// the pipeline's derived seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    /// Dense head, parameters from the best validation epoch.
    Mlp(MlpConfig),
    /// Dense head, combined late-training snapshots.
    SnapshotEnsemble(MlpConfig),
    Forest(ForestConfig),
    #[serde(rename = "adaboost")]
    AdaBoost(AdaBoostConfig),
    Gbt(GbtConfig),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Mlp(MlpConfig::default())
    }
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::Mlp(_) => "mlp",
            ModelConfig::SnapshotEnsemble(_) => "snapshot-ensemble",
            ModelConfig::Forest(_) => "forest",
            ModelConfig::AdaBoost(_) => "adaboost",
            ModelConfig::Gbt(_) => "gbt",
        }
    }

    pub fn needs_validation_split(&self) -> bool {
        matches!(self, ModelConfig::Mlp(_) | ModelConfig::SnapshotEnsemble(_))
    }

    pub fn validation_fraction(&self) -> f64 {
        match self {
            ModelConfig::Mlp(c) | ModelConfig::SnapshotEnsemble(c) => c.train.validation_fraction,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Mlp(c) | ModelConfig::SnapshotEnsemble(c) => {
                if c.hidden.contains(&0) {
                    return Err(Error::Config("hidden layer widths must be >= 1".into()));
                }
                if c.train.validation_fraction <= 0.0 {
                    return Err(Error::Config(
                        "dense heads need validation_fraction > 0 for early stopping".into(),
                    ));
                }
                c.train.validate()
            }
            ModelConfig::Forest(c) if c.n_trees == 0 => {
                Err(Error::Config("n_trees must be >= 1".into()))
            }
            ModelConfig::AdaBoost(c) if c.n_rounds == 0 || c.stump_depth == 0 => Err(
                Error::Config("AdaBoost needs n_rounds >= 1 and stump_depth >= 1".into()),
            ),
            ModelConfig::Gbt(c) => c.validate(),
            _ => Ok(()),
        }
    }

    pub fn with_seed(&self, seed: u64) -> ModelConfig {
        let mut c = self.clone();
        match &mut c {
            ModelConfig::Mlp(m) | ModelConfig::SnapshotEnsemble(m) => m.train.seed = seed,
            ModelConfig::Forest(f) => f.seed = seed,
            ModelConfig::AdaBoost(a) => a.seed = seed,
            ModelConfig::Gbt(g) => g.seed = seed,
        }
        c
    }
}

/// A fitted classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Dense(SnapshotEnsemble<T>),
    Trees(TreeModel<T>),
}

/// Training rows; `val_*` is used only by the dense heads.
pub struct TrainingSet<'a, T> {
    pub x: ArrayView2<'a, T>,
    pub y: &'a [usize],
    pub val_x: ArrayView2<'a, T>,
    pub val_y: &'a [usize],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FitInfo {
    pub train_log: Option<TrainLog>,
    pub members: usize,
}

impl<T: Scalar> Model<T> {
    pub fn fit(cfg: &ModelConfig, data: &TrainingSet<'_, T>, n_classes: usize) -> Result<(Self, FitInfo)> {
        cfg.validate()?;
        match cfg {
            ModelConfig::Mlp(c) | ModelConfig::SnapshotEnsemble(c) => {
                let head = MlpHead::with_shape(data.x.ncols(), &c.hidden, n_classes, c.train.seed)?;
                let out = neural::train(head, data.x, data.y, data.val_x, data.val_y, &c.train)?;
                let ensemble = if matches!(cfg, ModelConfig::Mlp(_)) {
                    SnapshotEnsemble::single(out.best, out.log.best_epoch)
                } else {
                    out.ensemble
                };
                let info = FitInfo {
                    members: ensemble.len(),
                    train_log: Some(out.log),
                };
                Ok((Model::Dense(ensemble), info))
            }
            ModelConfig::Forest(c) => {
                let m = RandomForest::fit(data.x, data.y, c)?;
                let members = m.trees().len();
                Ok((Model::Trees(TreeModel::Forest(m)), FitInfo { train_log: None, members }))
            }
            ModelConfig::AdaBoost(c) => {
                let m = AdaBoost::fit(data.x, data.y, c)?;
                let members = m.stages().len();
                Ok((Model::Trees(TreeModel::AdaBoost(m)), FitInfo { train_log: None, members }))
            }
            ModelConfig::Gbt(c) => {
                let m = GradientBoosting::fit(data.x, data.y, c)?;
                let members = m.rounds().len();
                Ok((Model::Trees(TreeModel::Gbt(m)), FitInfo { train_log: None, members }))
            }
        }
    }

    /// Class probabilities in f64, one row per input row.
    pub fn predict_proba(&self, x: ArrayView2<T>) -> Result<Array2<f64>> {
        match self {
            Model::Dense(e) => Ok(e.predict_proba(x)?.mapv(|v| v.as_f64())),
            Model::Trees(t) => Ok(t.predict_proba(x)),
        }
    }

    pub fn write_to<W: Write>(&self, w: W) -> std::io::Result<()> {
        match self {
            Model::Dense(e) => neural::io::write_ensemble(e, w),
            Model::Trees(t) => trees::write_tree_model(t, w),
        }
    }

    /// Reads either artifact kind, told apart by the magic bytes.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("model artifact too short".into()))?;
        match &magic {
            m if m == neural::io::MAGIC => Ok(Model::Dense(neural::io::read_ensemble_body(r)?)),
            m if m == trees::io::MAGIC => Ok(Model::Trees(trees::io::read_tree_model_body(r)?)),
            _ => Err(Error::Format(format!("unknown model magic {magic:?}"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}
