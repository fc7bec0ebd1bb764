//! Declarative run configuration: one TOML file per run, overridable by CLI
//! flags, archived verbatim into the output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use inflacast_core::attribution::ExplainConfig;
use inflacast_core::baselines::{ForestConfig, GbmConfig, LogRegConfig, TreeConfig};
use inflacast_core::corpus::FilterConfig;
use inflacast_core::encoder::{EncoderConfig, TrainConfig};
use inflacast_core::labeler::ExtremaConfig;
use inflacast_core::vectorizer::TfidfConfig;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PathsConfig {
    pub groups: Option<PathBuf>,
    pub posts: Option<PathBuf>,
    pub series: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FixturesConfig {
    /// "small" or "medium"
    pub scale: String,
    pub ambiguous_fraction: f64,
}

impl Default for FixturesConfig {
    fn default() -> Self {
        FixturesConfig {
            scale: "small".into(),
            ambiguous_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub filter: FilterConfig,
    pub extrema: ExtremaConfig,
    pub tfidf: TfidfConfig,
    pub logreg: LogRegConfig,
    pub tree: TreeConfig,
    pub forest: ForestConfig,
    pub gbm: GbmConfig,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub explain: ExplainConfig,
    pub fixtures: FixturesConfig,
    /// seed for splits, fixtures, forests and encoder init; --seed overrides
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: PathsConfig::default(),
            filter: FilterConfig::default(),
            extrema: ExtremaConfig::default(),
            tfidf: TfidfConfig::default(),
            logreg: LogRegConfig::default(),
            tree: TreeConfig::default(),
            forest: ForestConfig::default(),
            gbm: GbmConfig::default(),
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            explain: ExplainConfig::default(),
            fixtures: FixturesConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
        match path {
            None => Ok(PipelineConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| CliError::usage(format!("bad config {}: {e}", p.display())))
            }
        }
    }

    /// Archive the fully-resolved configuration into the output directory so
    /// each run has a single source of truth.
    pub fn archive(&self, out_dir: &Path) -> Result<(), CliError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::runtime(format!("config serialization failed: {e}")))?;
        std::fs::write(out_dir.join("config_used.toml"), text)
            .map_err(|e| CliError::runtime(format!("cannot archive config: {e}")))?;
        Ok(())
    }

    pub fn require_path(&self, which: &str) -> Result<&Path, CliError> {
        let p = match which {
            "groups" => self.paths.groups.as_deref(),
            "posts" => self.paths.posts.as_deref(),
            "series" => self.paths.series.as_deref(),
            _ => None,
        };
        let p = p.ok_or_else(|| CliError::usage(format!("config is missing paths.{which}")))?;
        if !p.exists() {
            return Err(CliError::usage(format!(
                "paths.{which} does not exist: {}",
                p.display()
            )));
        }
        Ok(p)
    }
}
