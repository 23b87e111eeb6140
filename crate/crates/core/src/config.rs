//! Flat JSON run configuration. Values resolve as CLI flag, then config
//! file, then built-in default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::detection::{Architecture, DetectionConfig, ExtractiveMode, Strategy, DEFAULT_EXTRACTIVE_SENTENCES};
use crate::corpus::EvidencePairing;
use crate::gateway::CassetteMode;
use crate::gateway::{RetryPolicy, DEFAULT_MAX_TOKENS};
use crate::generation::GenerationConfig;
use crate::retrieval::Bm25Params;
use crate::text_metrics::{RougeVariant, DEFAULT_GATE_THRESHOLD};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Model for the current stage; `None` picks the stage default.
    pub model_name: Option<String>,
    pub endpoint: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: u32,
    pub parallelism: usize,
    pub max_retries: u32,
    pub retry_base_ms: u64,
    pub architecture: Architecture,
    pub strategy: Strategy,
    pub gate_threshold: f64,
    pub rouge_variant: RougeVariant,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub top_k: usize,
    pub m: usize,
    pub extractive_mode: ExtractiveMode,
    pub templates_dir: Option<PathBuf>,
    pub cassette: Option<PathBuf>,
    pub cassette_mode: CassetteMode,
    pub audit_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let bm25 = Bm25Params::default();
        Self {
            model_name: None,
            endpoint: None,
            temperature: None,
            max_tokens: DEFAULT_MAX_TOKENS,
            parallelism: 4,
            max_retries: RetryPolicy::default().max_retries,
            retry_base_ms: RetryPolicy::default().base_delay_ms,
            architecture: Architecture::Serif,
            strategy: Strategy::ZeroShot,
            gate_threshold: DEFAULT_GATE_THRESHOLD,
            rouge_variant: RougeVariant::F1,
            bm25_k1: bm25.k1,
            bm25_b: bm25.b,
            top_k: EvidencePairing::MAX_EVIDENCE,
            m: DEFAULT_EXTRACTIVE_SENTENCES,
            extractive_mode: ExtractiveMode::Llm,
            templates_dir: None,
            cassette: None,
            cassette_mode: CassetteMode::Replay,
            audit_dir: None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl RunConfig {
    /// Layers `overrides` on top of the file (if any) on top of the defaults.
    /// Override values that are `null` are ignored.
    pub fn resolve(file: Option<&Path>, overrides: Map<String, Value>) -> Result<Self, ConfigError> {
        let mut merged = match serde_json::to_value(Self::default()).expect("config serializes") {
            Value::Object(m) => m,
            _ => unreachable!("config is an object"),
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let parsed: Value =
                serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            let Value::Object(obj) = parsed else {
                return Err(invalid(format!("{}: expected a JSON object", path.display())));
            };
            for (k, v) in obj {
                if v.is_object() || v.is_array() {
                    return Err(invalid(format!("key {k:?} must be a scalar")));
                }
                merged.insert(k, v);
            }
        }
        for (k, v) in overrides {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
        let cfg: Self = serde_json::from_value(Value::Object(merged)).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(t) = self.temperature {
            if !(0.0..=2.0).contains(&t) {
                return Err(invalid(format!("temperature {t} outside [0, 2]")));
            }
        }
        if self.max_tokens == 0 {
            return Err(invalid("max_tokens must be positive"));
        }
        if self.parallelism == 0 {
            return Err(invalid("parallelism must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.gate_threshold) {
            return Err(invalid(format!("gate_threshold {} outside [0, 1]", self.gate_threshold)));
        }
        if !(self.bm25_k1.is_finite() && self.bm25_k1 >= 0.0) {
            return Err(invalid("bm25_k1 must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.bm25_b) {
            return Err(invalid("bm25_b outside [0, 1]"));
        }
        if !(1..=EvidencePairing::MAX_EVIDENCE).contains(&self.top_k) {
            return Err(invalid(format!("top_k must be in 1..={}", EvidencePairing::MAX_EVIDENCE)));
        }
        if self.m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        Ok(())
    }

    /// Checks that configured input paths exist. Call at run start.
    pub fn check_paths(&self) -> Result<(), ConfigError> {
        if let Some(dir) = &self.templates_dir {
            if !dir.is_dir() {
                return Err(invalid(format!("templates_dir {} is not a directory", dir.display())));
            }
        }
        if let Some(c) = &self.cassette {
            if self.cassette_mode == CassetteMode::Replay && !c.is_file() {
                return Err(invalid(format!("cassette {} does not exist", c.display())));
            }
        }
        Ok(())
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay_ms: self.retry_base_ms,
            ..RetryPolicy::default()
        }
    }

    pub fn bm25_params(&self) -> Bm25Params {
        Bm25Params {
            k1: self.bm25_k1,
            b: self.bm25_b,
        }
    }

    pub fn detection_config(&self) -> DetectionConfig {
        let d = DetectionConfig::default();
        DetectionConfig {
            model_name: self.model_name.clone().unwrap_or(d.model_name),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            m: self.m,
            extractive_mode: self.extractive_mode,
            parallelism: self.parallelism,
        }
    }

    pub fn generation_config(&self) -> GenerationConfig {
        let g = GenerationConfig::default();
        GenerationConfig {
            model_name: self.model_name.clone().unwrap_or(g.model_name),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            threshold: self.gate_threshold,
            variant: self.rouge_variant,
            parallelism: self.parallelism,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn obj(v: Value) -> Map<String, Value> {
        match v {
            Value::Object(m) => m,
            _ => panic!(),
        }
    }

    #[test]
    fn precedence_cli_over_file_over_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"m": 7, "parallelism": 2, "strategy": "dov-cot"}"#).unwrap();
        let cfg = RunConfig::resolve(Some(&path), obj(json!({"m": 3, "top_k": null}))).unwrap();
        assert_eq!(cfg.m, 3);
        assert_eq!(cfg.parallelism, 2);
        assert_eq!(cfg.strategy, Strategy::DovCot);
        assert_eq!(cfg.top_k, 3);
        assert_eq!(cfg.gate_threshold, 0.4);
    }

    #[test]
    fn rejects_bad_values_and_unknown_keys() {
        assert!(RunConfig::resolve(None, obj(json!({"temperature": 3.0}))).is_err());
        assert!(RunConfig::resolve(None, obj(json!({"top_k": 4}))).is_err());
        assert!(RunConfig::resolve(None, obj(json!({"bm25_b": 1.5}))).is_err());
        assert!(RunConfig::resolve(None, obj(json!({"no_such_key": 1}))).is_err());
    }

    #[test]
    fn nested_file_values_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"bm25": {"k1": 1.0}}"#).unwrap();
        assert!(RunConfig::resolve(Some(&path), Map::new()).is_err());
    }

    #[test]
    fn missing_cassette_fails_path_check() {
        let cfg = RunConfig {
            cassette: Some("/nonexistent/cassette.jsonl".into()),
            ..RunConfig::default()
        };
        assert!(cfg.check_paths().is_err());
    }

    #[test]
    fn stage_defaults_apply() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.detection_config().model_name, "gpt-4");
        assert_eq!(cfg.generation_config().model_name, "llama-2-7b-chat");
    }
}
