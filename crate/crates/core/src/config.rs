//! One JSON file configuring every stage. Missing keys take their defaults;
//! unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graph::GraphConfig;
use crate::nav::NavConfig;
use crate::nn::{ModelConfig, TrainConfig};
use crate::scenario::GeneratorParams;
use crate::scoring::SocialParams;

/// Environment variable naming a config file used when none is given.
pub const CONFIG_ENV: &str = "SOCMAP_CONFIG";
/// File name of the effective config written into output directories.
pub const ECHO_FILE: &str = "effective_config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalConfig {
    pub generator: GeneratorParams,
    pub graph: GraphConfig,
    pub social: SocialParams,
    /// Side of bootstrapped and inferred maps, cells.
    pub map_side: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub nav: NavConfig,
    pub paths: PathsConfig,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorParams::default(),
            graph: GraphConfig::default(),
            social: SocialParams::default(),
            map_side: 73,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            nav: NavConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

/// Default locations used when a subcommand is not given a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub data: PathBuf,
    pub checkpoint: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { data: PathBuf::from("data"), checkpoint: PathBuf::from("model.ckpt") }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl GlobalConfig {
    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
        let cfg = Self::from_json(&text).map_err(|e| ConfigError::Parse { path: path.display().to_string(), source: e })?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Loads `explicit`, else the file named by [`CONFIG_ENV`], else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let bad = |e: String| ConfigError::Invalid(e);
        self.graph.check().map_err(|e| bad(e.to_string()))?;
        self.social.check().map_err(bad)?;
        self.model.validate().map_err(|e| bad(e.to_string()))?;
        self.train.validate().map_err(|e| bad(e.to_string()))?;
        self.nav.check().map_err(|e| bad(e.to_string()))?;
        if self.model.grid_side != self.graph.grid_side {
            return Err(bad(format!("model grid side {} differs from graph grid side {}", self.model.grid_side, self.graph.grid_side)));
        }
        if self.model.output_side != self.map_side {
            return Err(bad(format!("model output side {} differs from map side {}", self.model.output_side, self.map_side)));
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Writes the effective config into `dir`.
    pub fn echo_into(&self, dir: &Path) -> std::io::Result<()> {
        fs::write(dir.join(ECHO_FILE), self.to_json_pretty() + "\n")
    }
}
