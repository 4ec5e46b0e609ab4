use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{CapUnit, RoleLabel};
use crate::embedding::{FusionConfig, MIN_DIM};
use crate::error::{Error, Result};
use crate::eval::ThresholdPolicy;
use crate::model::ModelConfig;
use crate::oversample::AdasynConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdasynSettings {
    pub enabled: bool,
    pub k: usize,
    pub beta: f64,
}

impl Default for AdasynSettings {
    fn default() -> Self {
        AdasynSettings {
            enabled: true,
            k: 15,
            beta: 1.0,
        }
    }
}

impl AdasynSettings {
    pub fn with_seed(&self, seed: u64) -> AdasynConfig {
        AdasynConfig {
            k: self.k,
            beta: self.beta,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provider {
    /// Feature-hashed word and character n-grams.
    #[default]
    Baseline,
    /// Precomputed vectors in a `CTE1` file.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub provider: Provider,
    /// Required size for the baseline; checked against the file otherwise.
    pub dim: Option<usize>,
    pub path: Option<PathBuf>,
    pub hash_seed: u64,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        EmbeddingSettings {
            provider: Provider::Baseline,
            dim: Some(256),
            path: None,
            hash_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub folds: usize,
    pub threshold_class: RoleLabel,
    pub threshold_percentile: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            folds: 10,
            threshold_class: RoleLabel::VICTIM,
            threshold_percentile: 25.0,
        }
    }
}

impl EvalSettings {
    pub fn policy(&self) -> ThresholdPolicy {
        ThresholdPolicy {
            class: self.threshold_class,
            percentile: self.threshold_percentile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: PathBuf,
    pub bystander_other_cap: usize,
    pub cap_unit: CapUnit,
    pub lambda: f64,
    pub adasyn: AdasynSettings,
    pub embedding: EmbeddingSettings,
    pub model: ModelConfig,
    pub eval: EvalSettings,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset: PathBuf::new(),
            bystander_other_cap: 5000,
            cap_unit: CapUnit::Samples,
            lambda: 0.5,
            adasyn: AdasynSettings::default(),
            embedding: EmbeddingSettings::default(),
            model: ModelConfig::default(),
            eval: EvalSettings::default(),
            seed: 0,
            output: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset);
        fix(&mut self.output);
        if let Some(p) = self.embedding.path.as_mut() {
            fix(p);
        }
    }

    pub fn fusion(&self) -> FusionConfig {
        FusionConfig { lambda: self.lambda }
    }

    /// Every failure is reported as a configuration error.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    fn check(&self) -> Result<()> {
        if self.dataset.as_os_str().is_empty() {
            return Err(Error::Config("`dataset` is required".into()));
        }
        if self.eval.folds < 2 {
            return Err(Error::Config(format!("eval.folds must be >= 2, got {}", self.eval.folds)));
        }
        self.eval.policy().validate()?;
        self.fusion().validate()?;
        self.adasyn.with_seed(0).validate()?;
        self.model.validate()?;
        match self.embedding.provider {
            Provider::Baseline => match self.embedding.dim {
                Some(d) if d >= MIN_DIM => {}
                other => {
                    return Err(Error::Config(format!(
                        "baseline embedding needs dim >= {MIN_DIM}, got {other:?}"
                    )))
                }
            },
            Provider::File => {
                if self.embedding.path.is_none() {
                    return Err(Error::Config("file embeddings need `embedding.path`".into()));
                }
            }
        }
        Ok(())
    }
}
