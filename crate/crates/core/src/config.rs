//! Flat `key=value` pipeline configuration with dotted section prefixes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::fairness::{FairnessConfig, ForestParams, DEFAULT_PROTECTED};
use crate::linkpred::{Hyperparams, ModelKind};
use crate::sketch::SketchConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected key=value, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("{key}={value:?}: {message}")]
    Invalid { key: String, value: String, message: String },
    #[error("missing required key {0:?}")]
    Missing(&'static str),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

pub const KEYS: [&str; 29] = [
    "seed",
    "paths.records",
    "paths.rules",
    "paths.output",
    "paths.queries",
    "paths.protected_gold",
    "annotate.use_rules",
    "sketch.sketch_rows",
    "sketch.theta",
    "sketch.target_dim",
    "sketch.k_max",
    "linkpred.hidden",
    "linkpred.out",
    "linkpred.learning_rate",
    "linkpred.epochs",
    "linkpred.test_fraction",
    "linkpred.runs",
    "linkpred.threshold",
    "linkpred.features",
    "linkpred.top_features",
    "linkpred.augment_model",
    "fairness.n_trees",
    "fairness.max_depth",
    "fairness.feature_subsample",
    "fairness.explain_rows",
    "fairness.lime_samples",
    "fairness.shap_background",
    "fairness.shap_permutations",
    "fairness.protected",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFeatures {
    Attributes,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkpredConfig {
    pub hyperparams: Hyperparams,
    pub test_fraction: f64,
    pub runs: usize,
    pub threshold: f64,
    pub features: LinkFeatures,
    pub top_features: usize,
    pub augment_model: ModelKind,
}

impl Default for LinkpredConfig {
    fn default() -> Self {
        LinkpredConfig {
            hyperparams: Hyperparams::default(),
            test_fraction: 0.2,
            runs: 5,
            threshold: 0.9,
            features: LinkFeatures::Attributes,
            top_features: 32,
            augment_model: ModelKind::Pgnn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub records: Vec<PathBuf>,
    /// `None` selects the bundled rule pack.
    pub rules: Option<PathBuf>,
    pub use_rules: bool,
    pub output: PathBuf,
    pub queries: Option<PathBuf>,
    pub protected_gold: Option<PathBuf>,
    pub sketch: SketchConfig,
    pub linkpred: LinkpredConfig,
    pub fairness: FairnessConfig,
}

/// Raw key/value pairs in file order, later assignments winning.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut raw = RawConfig {
            values: BTreeMap::new(),
            base_dir: base_dir.into(),
        };
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (k, v) = t.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: t.to_string(),
            })?;
            raw.set(k.trim(), v.trim())?;
        }
        Ok(raw)
    }

    /// Reads a file; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, dir)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            text: assignment.to_string(),
        })?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| ConfigError::Invalid {
                key: key.into(),
                value: v.into(),
                message: e.to_string(),
            }),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| self.base_dir.join(v))
    }

    pub fn seed(&self) -> Result<u64> {
        match self.get("seed") {
            None => Err(ConfigError::Missing("seed")),
            Some(_) => self.parsed("seed", 0),
        }
    }

    pub fn sketch(&self, seed: u64) -> Result<SketchConfig> {
        let d = SketchConfig::default();
        let cfg = SketchConfig {
            sketch_rows: self.parsed("sketch.sketch_rows", d.sketch_rows)?,
            theta: self.parsed("sketch.theta", d.theta)?,
            target_dim: self.parsed("sketch.target_dim", d.target_dim)?,
            k_max: self.parsed("sketch.k_max", d.k_max)?,
            seed,
        };
        cfg.validate().map_err(|e| invalid("sketch", e))?;
        Ok(cfg)
    }

    pub fn linkpred(&self, seed: u64) -> Result<LinkpredConfig> {
        let d = LinkpredConfig::default();
        let features = match self.get("linkpred.features").unwrap_or("attributes") {
            "attributes" => LinkFeatures::Attributes,
            "constant" => LinkFeatures::Constant,
            other => return Err(choice("linkpred.features", other, "attributes or constant")),
        };
        let augment_model = match self.get("linkpred.augment_model").unwrap_or("pgnn") {
            "pgnn" => ModelKind::Pgnn,
            "gcn" => ModelKind::Gcn,
            other => return Err(choice("linkpred.augment_model", other, "pgnn or gcn")),
        };
        let cfg = LinkpredConfig {
            hyperparams: Hyperparams {
                hidden: self.parsed("linkpred.hidden", d.hyperparams.hidden)?,
                out: self.parsed("linkpred.out", d.hyperparams.out)?,
                learning_rate: self.parsed("linkpred.learning_rate", d.hyperparams.learning_rate)?,
                epochs: self.parsed("linkpred.epochs", d.hyperparams.epochs)?,
                seed,
            },
            test_fraction: self.parsed("linkpred.test_fraction", d.test_fraction)?,
            runs: self.parsed("linkpred.runs", d.runs)?,
            threshold: self.parsed("linkpred.threshold", d.threshold)?,
            features,
            top_features: self.parsed("linkpred.top_features", d.top_features)?,
            augment_model,
        };
        if cfg.runs == 0 {
            return Err(choice("linkpred.runs", "0", "a positive count"));
        }
        if !(cfg.threshold > 0.0 && cfg.threshold <= 1.0) {
            return Err(choice("linkpred.threshold", &cfg.threshold.to_string(), "a value in (0,1]"));
        }
        if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
            return Err(choice("linkpred.test_fraction", &cfg.test_fraction.to_string(), "a value in (0,1)"));
        }
        Ok(cfg)
    }

    pub fn fairness(&self, seed: u64) -> Result<FairnessConfig> {
        let d = FairnessConfig::default();
        let subsample = match self.get("fairness.feature_subsample") {
            None | Some("auto") => None,
            Some(_) => Some(self.parsed("fairness.feature_subsample", 1usize)?),
        };
        let protected = match self.get("fairness.protected") {
            None => DEFAULT_PROTECTED.iter().map(|s| s.to_string()).collect(),
            Some(v) => v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
        };
        Ok(FairnessConfig {
            forest: ForestParams {
                n_trees: self.parsed("fairness.n_trees", d.forest.n_trees)?,
                max_depth: self.parsed("fairness.max_depth", d.forest.max_depth)?,
                feature_subsample: subsample,
                bootstrap: true,
            },
            explain_rows: self.parsed("fairness.explain_rows", d.explain_rows)?,
            lime_samples: self.parsed("fairness.lime_samples", d.lime_samples)?,
            shap_background: self.parsed("fairness.shap_background", d.shap_background)?,
            shap_permutations: self.parsed("fairness.shap_permutations", d.shap_permutations)?,
            protected,
            seed,
        })
    }

    pub fn use_rules(&self) -> Result<bool> {
        self.parsed("annotate.use_rules", true)
    }

    pub fn rules_dir(&self) -> Option<PathBuf> {
        self.path("paths.rules")
    }

    pub fn records(&self) -> Vec<PathBuf> {
        self.get("paths.records")
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| self.base_dir.join(s))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn queries(&self) -> Option<PathBuf> {
        self.path("paths.queries")
    }

    pub fn protected_gold(&self) -> Option<PathBuf> {
        self.path("paths.protected_gold")
    }

    pub fn output(&self) -> PathBuf {
        self.path("paths.output").unwrap_or_else(|| self.base_dir.join("out"))
    }

    /// Full pipeline configuration. Paths are not checked here.
    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let seed = self.seed()?;
        let records = self.records();
        if records.is_empty() {
            return Err(ConfigError::Missing("paths.records"));
        }
        Ok(PipelineConfig {
            seed,
            records,
            rules: self.rules_dir(),
            use_rules: self.use_rules()?,
            output: self.output(),
            queries: self.queries(),
            protected_gold: self.protected_gold(),
            sketch: self.sketch(seed)?,
            linkpred: self.linkpred(seed)?,
            fairness: self.fairness(seed)?,
        })
    }
}

fn invalid(key: &str, e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        value: String::new(),
        message: e.to_string(),
    }
}

fn choice(key: &str, value: &str, expected: &str) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        value: value.into(),
        message: format!("expected {expected}"),
    }
}
