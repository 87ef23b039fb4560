use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::ModelConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub steps: u64,
    pub batch_size: usize,
    pub p_start: f64,
    pub p_end: f64,
    pub learning_rate: f64,
    /// Global gradient-norm limit; no clipping when absent.
    pub grad_clip: Option<f64>,
    pub velocity_weight: f64,
    /// Standard deviation of the noise added to teacher-forced decoder
    /// inputs, relative to the model's frame scale.
    pub input_noise: f64,
    pub seed: u64,
    /// Validation every this many steps (0 disables).
    pub val_every: u64,
    pub checkpoint_every: u64,
    pub manifest: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            steps: 2000,
            batch_size: 128,
            p_start: 0.0,
            p_end: 1.0,
            learning_rate: 1e-3,
            grad_clip: None,
            velocity_weight: 0.0,
            input_noise: 1.0,
            seed: 0,
            val_every: 100,
            checkpoint_every: 0,
            manifest: None,
            output_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.steps == 0 || self.batch_size == 0 {
            return Err(ConfigError::Invalid("steps and batch_size must be positive".into()));
        }
        if !(self.input_noise >= 0.0) || !(self.velocity_weight >= 0.0) {
            return Err(ConfigError::Invalid("input_noise and velocity_weight must be non-negative".into()));
        }
        if !(self.learning_rate > 0.0) || self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return Err(ConfigError::Invalid("learning_rate and grad_clip must be positive".into()));
        }
        Ok(())
    }

    /// Parses JSON (when the text starts with `{`) or `key=value` lines,
    /// where keys may be dotted (`model.d_model=64`) and `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?
        } else {
            key_values(text)?
        };
        serde_json::from_value(value).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}

fn key_values(text: &str) -> Result<Value, ConfigError> {
    let mut root = Value::Object(Default::default());
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, raw) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let raw = raw.trim();
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut node = &mut root;
        let parts: Vec<&str> = key.trim().split('.').collect();
        for part in &parts[..parts.len() - 1] {
            node = node
                .as_object_mut()
                .ok_or(ConfigError::Syntax { line: i + 1 })?
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default()));
        }
        node.as_object_mut()
            .ok_or(ConfigError::Syntax { line: i + 1 })?
            .insert(parts[parts.len() - 1].to_string(), value);
    }
    Ok(root)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_and_json_agree() {
        let kv = "steps = 50\nmodel.d_model=64 # small\nmodel.heads=4\nmanifest=data/manifest.json\ngrad_clip=5.0\n";
        let json = r#"{"steps":50,"model":{"d_model":64,"heads":4},"manifest":"data/manifest.json","grad_clip":5.0}"#;
        let a = TrainConfig::parse(kv).unwrap();
        assert_eq!(a, TrainConfig::parse(json).unwrap());
        assert_eq!(a.model.d_model, 64);
        assert_eq!(a.model.layers, 2);
        assert_eq!(a.batch_size, 128);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!(TrainConfig::parse("stepz=3"), Err(ConfigError::Invalid(_))));
        assert!(matches!(TrainConfig::parse("steps"), Err(ConfigError::Syntax { line: 1 })));
        assert!(TrainConfig::parse("steps=0").unwrap().validate().is_err());
    }
}
