use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_to_string, IoError};
use crate::geometry::GeometryConfig;
use crate::graphs::GraphConfig;
use crate::metrics::DEFAULT_MATCH_RADIUS_UM;
use crate::synth::SynthConfig;
use crate::tracking::TrackConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Centroid matching radius (μm).
    pub radius_um: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            radius_um: DEFAULT_MATCH_RADIUS_UM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// Directory for session logs; sessions live in memory only when unset.
    pub data_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: None,
        }
    }
}

/// Everything a config file can set. Graph settings may be given either as a
/// top-level `[graph]` table or as `[tracking.graph]`, not both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub tracking: TrackConfig,
    pub graph: Option<GraphConfig>,
    pub geometry: GeometryConfig,
    pub metrics: MetricsConfig,
    pub service: ServiceConfig,
    pub synth: SynthConfig,
}

impl Config {
    /// Parses and validates config text; `source` names it in errors.
    pub fn parse(text: &str, source: &str) -> Result<Self, IoError> {
        let err = |path: String, message: String| IoError::Config {
            source_name: source.to_string(),
            path,
            message,
        };
        let de = toml::Deserializer::parse(text).map_err(|e| err("<document>".into(), e.to_string()))?;
        let mut cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            err(path, e.into_inner().message().to_string())
        })?;
        if let Some(g) = cfg.graph.take() {
            if cfg.tracking.graph != GraphConfig::default() {
                return Err(err("graph".into(), "graph settings given both at top level and under tracking".into()));
            }
            cfg.tracking.graph = g;
        }
        cfg.validate().map_err(|(path, m)| err(path, m))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    fn validate(&self) -> Result<(), (String, String)> {
        self.tracking
            .validate()
            .map_err(|m| ("tracking".to_string(), m))?;
        self.geometry
            .validate()
            .map_err(|e| ("geometry".to_string(), e.to_string()))?;
        if !(self.metrics.radius_um > 0.0 && self.metrics.radius_um.is_finite()) {
            return Err((
                "metrics.radius_um".into(),
                format!("must be positive, got {}", self.metrics.radius_um),
            ));
        }
        self.synth
            .validate()
            .map_err(|e| ("synth".to_string(), e.to_string()))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
