//! Layered runtime settings: flags over environment over config file over
//! built-in defaults.
//!
//! Flags and environment variables are merged by the argument parser into a
//! single top layer; this module only stacks layers and fills defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::typo_corrections;
use crate::eval::ReplayConfig;
use crate::lexicon::{Lexicon, LexiconError};
use crate::normalizer::{EchoBackend, NormalizerBackend, RuleNormalizer};
use crate::segmenter::{Millis, SegmenterConfig, LEGACY_DEFAULT_WINDOW_MS, SHIM_DEFAULT_WINDOW_MS};
use crate::session::SessionConfig;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_PORT: u16 = 8787;
pub const DEFAULT_BIND: &str = "127.0.0.1";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Lexicon-driven rules.
    #[default]
    Rule,
    /// Relays text verbatim; a floor for comparisons.
    Stub,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Rule => "rule",
            BackendKind::Stub => "stub",
        })
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rule" => Ok(BackendKind::Rule),
            "stub" => Ok(BackendKind::Stub),
            other => Err(format!("unknown backend {other:?}; expected rule or stub")),
        }
    }
}

/// One layer of optional settings. A config file deserializes into this.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigLayer {
    pub lexicon: Option<PathBuf>,
    pub threshold: Option<u32>,
    pub seed: Option<u64>,
    pub backend: Option<BackendKind>,
    pub legacy_window_ms: Option<Millis>,
    pub shim_window_ms: Option<Millis>,
    pub jitter_min_ms: Option<Millis>,
    pub jitter_max_ms: Option<Millis>,
    pub bind: Option<String>,
    pub port: Option<u16>,
}

impl ConfigLayer {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<ConfigLayer, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<ConfigLayer, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ConfigLayer::from_toml_str(&text, path)
    }

    /// Fields set in `self` win over `lower`.
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            lexicon: self.lexicon.or(lower.lexicon),
            threshold: self.threshold.or(lower.threshold),
            seed: self.seed.or(lower.seed),
            backend: self.backend.or(lower.backend),
            legacy_window_ms: self.legacy_window_ms.or(lower.legacy_window_ms),
            shim_window_ms: self.shim_window_ms.or(lower.shim_window_ms),
            jitter_min_ms: self.jitter_min_ms.or(lower.jitter_min_ms),
            jitter_max_ms: self.jitter_max_ms.or(lower.jitter_max_ms),
            bind: self.bind.or(lower.bind),
            port: self.port.or(lower.port),
        }
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub lexicon: Option<PathBuf>,
    /// `None` keeps the lexicon's own threshold.
    pub threshold: Option<u32>,
    pub seed: u64,
    pub backend: BackendKind,
    pub legacy_window_ms: Millis,
    pub shim_window_ms: Millis,
    pub jitter_min_ms: Millis,
    pub jitter_max_ms: Millis,
    pub bind: String,
    pub port: u16,
}

impl Settings {
    pub fn resolve(layer: ConfigLayer) -> Result<Settings, ConfigError> {
        let replay = ReplayConfig::default();
        let s = Settings {
            lexicon: layer.lexicon,
            threshold: layer.threshold,
            seed: layer.seed.unwrap_or(DEFAULT_SEED),
            backend: layer.backend.unwrap_or_default(),
            legacy_window_ms: layer.legacy_window_ms.unwrap_or(LEGACY_DEFAULT_WINDOW_MS),
            shim_window_ms: layer.shim_window_ms.unwrap_or(SHIM_DEFAULT_WINDOW_MS),
            jitter_min_ms: layer.jitter_min_ms.unwrap_or(replay.jitter_min_ms),
            jitter_max_ms: layer.jitter_max_ms.unwrap_or(replay.jitter_max_ms),
            bind: layer.bind.unwrap_or_else(|| DEFAULT_BIND.into()),
            port: layer.port.unwrap_or(DEFAULT_PORT),
        };
        if s.threshold.is_some_and(|t| t > 100) {
            return Err(ConfigError::Invalid(
                "threshold must be between 0 and 100".into(),
            ));
        }
        if s.jitter_min_ms > s.jitter_max_ms {
            return Err(ConfigError::Invalid(
                "jitter minimum exceeds maximum".into(),
            ));
        }
        s.session_config()
            .segmenter
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        s.legacy_segmenter()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(s)
    }

    pub fn load_lexicon(&self) -> Result<Lexicon, ConfigError> {
        Ok(match &self.lexicon {
            Some(path) => Lexicon::from_path(path)?,
            None => Lexicon::default(),
        })
    }

    pub fn rule_normalizer(&self) -> Result<RuleNormalizer, ConfigError> {
        let n = RuleNormalizer::new(self.load_lexicon()?);
        Ok(match self.threshold {
            Some(t) => n.with_threshold(t),
            None => n,
        })
    }

    pub fn backend(&self) -> Result<Arc<dyn NormalizerBackend>, ConfigError> {
        Ok(match self.backend {
            BackendKind::Rule => Arc::new(self.rule_normalizer()?),
            BackendKind::Stub => Arc::new(EchoBackend),
        })
    }

    pub fn legacy_segmenter(&self) -> SegmenterConfig {
        SegmenterConfig::legacy().with_window(self.legacy_window_ms)
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            segmenter: SegmenterConfig::shim().with_window(self.shim_window_ms),
            corrections: typo_corrections(),
        }
    }

    pub fn replay_config(&self) -> ReplayConfig {
        ReplayConfig {
            seed: self.seed,
            jitter_min_ms: self.jitter_min_ms,
            jitter_max_ms: self.jitter_max_ms,
            legacy: self.legacy_segmenter(),
            shim: self.session_config().segmenter,
            ..ReplayConfig::default()
        }
    }
}
