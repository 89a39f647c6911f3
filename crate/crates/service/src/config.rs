//! Service configuration: a TOML file plus environment overrides.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clearline_core::backend::{BackendConfig, ENV_API_KEY, ENV_BASE_URL};
use serde::Deserialize;
use thiserror::Error;

pub const ENV_ENSEMBLE: &str = "CLEARLINE_ENSEMBLE";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    #[serde(default)]
    pub base_url: String,
    #[serde(default = "default_model")]
    pub model_name: String,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub api_key: Option<String>,
    /// Extra request fields such as `temperature`. Absent means server defaults.
    #[serde(default)]
    pub sampling_overrides: Option<serde_json::Map<String, serde_json::Value>>,
}

fn default_model() -> String {
    "default".into()
}

fn default_timeout() -> f64 {
    120.0
}

fn default_max_retries() -> u32 {
    2
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            model_name: default_model(),
            request_timeout_secs: default_timeout(),
            max_retries: default_max_retries(),
            api_key: None,
            sampling_overrides: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind_address: String,
    pub corpus_path: PathBuf,
    /// Interaction log (one record per answered question).
    #[serde(default = "default_log")]
    pub log_path: PathBuf,
    #[serde(default = "default_annotation_log")]
    pub annotation_log_path: PathBuf,
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    #[serde(default = "default_step_retries")]
    pub max_retries_per_step: usize,
    /// Few-shot file; the bundled exemplars are used when absent.
    #[serde(default)]
    pub shots_path: Option<PathBuf>,
    /// Serve from a response script instead of a live model.
    #[serde(default)]
    pub script_path: Option<PathBuf>,
    #[serde(default)]
    pub backend: BackendSection,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

fn default_log() -> PathBuf {
    "logs/interactions.jsonl".into()
}

fn default_annotation_log() -> PathBuf {
    "logs/annotations.jsonl".into()
}

fn default_ensemble() -> usize {
    1
}

fn default_step_retries() -> usize {
    1
}

impl ServiceConfig {
    pub fn new(corpus_path: impl Into<PathBuf>) -> Self {
        Self {
            bind_address: default_bind(),
            corpus_path: corpus_path.into(),
            log_path: default_log(),
            annotation_log_path: default_annotation_log(),
            ensemble_size: default_ensemble(),
            max_retries_per_step: default_step_retries(),
            shots_path: None,
            script_path: None,
            backend: BackendSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads the file, applies environment overrides, validates. Relative
    /// paths in the file are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: Self = toml::from_str(&text)?;
        if let Some(dir) = path.parent() {
            config.resolve_relative(dir);
        }
        config.apply_env(|k| std::env::var(k).ok())?;
        config.validate()?;
        Ok(config)
    }

    fn resolve_relative(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.corpus_path);
        fix(&mut self.log_path);
        fix(&mut self.annotation_log_path);
        if let Some(p) = self.shots_path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.script_path.as_mut() {
            fix(p);
        }
    }

    /// Environment values win over the file when set and non-empty.
    pub fn apply_env(
        &mut self,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<(), ConfigError> {
        let get = |k: &str| lookup(k).filter(|v| !v.trim().is_empty());
        if let Some(url) = get(ENV_BASE_URL) {
            self.backend.base_url = url;
        }
        if let Some(key) = get(ENV_API_KEY) {
            self.backend.api_key = Some(key);
        }
        if let Some(k) = get(ENV_ENSEMBLE) {
            self.ensemble_size = k.trim().parse().map_err(|_| {
                ConfigError::Invalid(format!(
                    "{ENV_ENSEMBLE} must be a positive integer, got '{k}'"
                ))
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ensemble_size == 0 {
            return Err(ConfigError::Invalid(
                "ensemble_size must be at least 1".into(),
            ));
        }
        if !self.backend.request_timeout_secs.is_finite()
            || self.backend.request_timeout_secs <= 0.0
        {
            return Err(ConfigError::Invalid(
                "request_timeout_secs must be positive".into(),
            ));
        }
        if self.script_path.is_none() && self.backend.base_url.trim().is_empty() {
            return Err(ConfigError::Invalid(format!(
                "no backend: set backend.base_url, {ENV_BASE_URL} or script_path"
            )));
        }
        Ok(())
    }

    pub fn backend_config(&self) -> BackendConfig {
        let mut c = BackendConfig::new(&self.backend.base_url, &self.backend.model_name);
        c.request_timeout = Duration::from_secs_f64(self.backend.request_timeout_secs);
        c.max_retries = self.backend.max_retries;
        c.api_key = self.backend.api_key.clone();
        c.sampling_overrides = self.backend.sampling_overrides.clone();
        c
    }
}
