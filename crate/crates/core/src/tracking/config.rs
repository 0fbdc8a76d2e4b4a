use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::graphs::GraphConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateSpace {
    Raw,
    #[default]
    Straightened,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Gnn,
    #[serde(alias = "murty")]
    MurtyRescore,
}

/// Gate values cross JSON as numbers, with `"inf"` (or null) for no gate.
pub mod gate_serde {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
        Null(()),
    }

    pub fn serialize<S: Serializer>(gate: &f64, s: S) -> Result<S::Ok, S::Error> {
        if gate.is_finite() {
            s.serialize_f64(*gate)
        } else {
            s.serialize_str("inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(x),
            Repr::Null(()) => Ok(f64::INFINITY),
            Repr::Text(t) => parse(&t).map_err(serde::de::Error::custom),
        }
    }

    /// A gate in μm, or one of `inf`, `infinity`, `none`, `ungated`.
    pub fn parse(text: &str) -> Result<f64, String> {
        match text.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "none" | "ungated" => Ok(f64::INFINITY),
            other => other.parse().map_err(|_| format!("invalid gate {text:?}")),
        }
    }
}

fn default_gate() -> f64 {
    f64::INFINITY
}

fn default_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackConfig {
    /// Cost of leaving a track unmatched (μm); infinite means ungated.
    #[serde(default = "default_gate", with = "gate_serde")]
    pub gate_um: f64,
    #[serde(default)]
    pub coordinate_space: CoordinateSpace,
    #[serde(default)]
    pub method: Method,
    /// Hypotheses ranked before quadratic rescoring.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub graph: GraphConfig,
    /// Frames a dimmed track stays matchable; unlimited when absent.
    #[serde(default)]
    pub reappearance_window: Option<usize>,
    /// Give unmatched detections fresh track names instead of leaving them
    /// for the user.
    #[serde(default)]
    pub auto_name: bool,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            gate_um: default_gate(),
            coordinate_space: CoordinateSpace::default(),
            method: Method::default(),
            k: default_k(),
            graph: GraphConfig::default(),
            reappearance_window: None,
            auto_name: false,
        }
    }
}

impl TrackConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gate_um > 0.0) {
            return Err(format!("gate_um must be positive, got {}", self.gate_um));
        }
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        self.graph.validate()
    }
}
