//! Run configuration shared by every pipeline command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cascade_ac::AcStrategy;
use crate::error::{Error, Result};
use crate::rid::RidConfig;
use crate::textclf::{Featurizer, Hyperparams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let hp = Hyperparams::default();
        ClassifierConfig {
            learning_rate: hp.learning_rate,
            epochs: hp.epochs,
            l2: hp.l2,
            batch_size: hp.batch_size,
        }
    }
}

impl ClassifierConfig {
    pub fn hyperparams(&self, seed: u64) -> Hyperparams {
        Hyperparams {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            l2: self.l2,
            batch_size: self.batch_size,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Hashed character n-grams (see `featurizer`).
    #[default]
    Hashed,
    /// Externally computed vectors: propositions keyed by expression id,
    /// budget items keyed by budget id.
    Embeddings {
        propositions: PathBuf,
        budget: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidSection {
    pub threshold: f64,
    pub negatives: usize,
    pub region_filter: bool,
    /// Width of the hashed vectors used for cosine reranking when no
    /// embedding files are configured.
    pub embedding_dim: usize,
    /// Also train and score relation detection inside cross-validation.
    pub in_cv: bool,
}

impl Default for RidSection {
    fn default() -> Self {
        let r = RidConfig::default();
        RidSection {
            threshold: r.threshold,
            negatives: r.negatives,
            region_filter: r.region_filter,
            embedding_dim: 4096,
            in_cv: false,
        }
    }
}

impl RidSection {
    pub fn rid_config(&self) -> RidConfig {
        RidConfig {
            threshold: self.threshold,
            negatives: self.negatives,
            region_filter: self.region_filter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub folds: usize,
    /// Strategies compared by `cv`, all on the same folds.
    pub strategies: Vec<AcStrategy>,
}

impl Default for CvSection {
    fn default() -> Self {
        CvSection {
            folds: 10,
            strategies: AcStrategy::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub budget: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Gate rule file; the built-in rule list when absent.
    pub gate_rules: Option<PathBuf>,
    pub segment_context: usize,
    pub strategy: AcStrategy,
    pub balanced: bool,
    pub backend: BackendConfig,
    pub featurizer: Featurizer,
    pub classifier: ClassifierConfig,
    pub rid: RidSection,
    pub cv: CvSection,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Model paths; default to `<output_dir>/ac_model.json` and `rid_model.json`.
    pub ac_model: Option<PathBuf>,
    pub rid_model: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            budget: None,
            train: None,
            test: None,
            gate_rules: None,
            segment_context: 0,
            strategy: AcStrategy::Cascade,
            balanced: false,
            backend: BackendConfig::Hashed,
            featurizer: Featurizer::default(),
            classifier: ClassifierConfig::default(),
            rid: RidSection::default(),
            cv: CvSection::default(),
            seed: 42,
            output_dir: PathBuf::from("out"),
            ac_model: None,
            rid_model: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&raw, &path.display().to_string())
    }

    pub fn from_json(raw: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(raw).map_err(|e| Error::InvalidConfig(format!("{origin}: {e}")))
    }

    /// Sets a (possibly dotted) key, e.g. `seed` or `rid.threshold`. The
    /// value is parsed as JSON, falling back to a plain string.
    pub fn set(&mut self, key: &str, raw_value: &str) -> Result<()> {
        let mut doc = serde_json::to_value(&*self).expect("config serializes");
        let value: Value = serde_json::from_str(raw_value)
            .unwrap_or_else(|_| Value::String(raw_value.to_string()));
        let mut slot = &mut doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = slot.as_object_mut().ok_or_else(|| {
                Error::InvalidConfig(format!("`{key}`: `{part}` is not inside an object"))
            })?;
            if !obj.contains_key(*part) && !(i == parts.len() - 1 && obj.contains_key("kind")) {
                return Err(Error::InvalidConfig(format!("unknown config key `{key}`")));
            }
            slot = obj.entry(part.to_string()).or_insert(Value::Null);
        }
        *slot = value;
        *self = serde_json::from_value(doc)
            .map_err(|e| Error::InvalidConfig(format!("`{key}`: {e}")))?;
        Ok(())
    }

    pub fn ac_model_path(&self) -> PathBuf {
        self.ac_model
            .clone()
            .unwrap_or_else(|| self.output_dir.join("ac_model.json"))
    }

    pub fn rid_model_path(&self) -> PathBuf {
        self.rid_model
            .clone()
            .unwrap_or_else(|| self.output_dir.join("rid_model.json"))
    }

    pub fn require<'a>(&self, name: &str, path: &'a Option<PathBuf>) -> Result<&'a Path> {
        let p = path.as_deref().ok_or_else(|| {
            Error::InvalidConfig(format!("`{name}` path is required for this command"))
        })?;
        if !p.exists() {
            return Err(Error::InvalidConfig(format!(
                "`{name}` file {} does not exist",
                p.display()
            )));
        }
        Ok(p)
    }

    /// Structural checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        self.featurizer.validate()?;
        self.classifier.hyperparams(self.seed).validate()?;
        if !(0.0..=1.0).contains(&self.rid.threshold) {
            return Err(Error::InvalidConfig(
                "rid.threshold must lie in [0, 1]".into(),
            ));
        }
        if self.rid.embedding_dim == 0 {
            return Err(Error::InvalidConfig(
                "rid.embedding_dim must be positive".into(),
            ));
        }
        if self.cv.folds < 2 {
            return Err(Error::InvalidConfig("cv.folds must be at least 2".into()));
        }
        if self.cv.strategies.is_empty() {
            return Err(Error::InvalidConfig("cv.strategies is empty".into()));
        }
        Ok(())
    }
}
