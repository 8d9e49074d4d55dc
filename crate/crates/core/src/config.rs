//! Declarative run configuration.
//!
//! A config file is `key = value` lines (`#` comments allowed); keys mirror
//! [`ModelConfig`] fields. An empty file yields the full defaults. Unknown
//! keys and type mismatches are fatal, and command-line overrides apply
//! last.

use crate::models::ModelConfig;
use crate::partition::LabelSource;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected 'key = value', got {text:?}")]
    BadLine { line: usize, text: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("key '{key}': {detail}")]
    BadValue { key: String, detail: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn apply(cfg: &mut ModelConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        value.parse().map_err(|e: T::Err| ConfigError::BadValue {
            key: key.to_string(),
            detail: e.to_string(),
        })
    }

    match key {
        "model_name" => cfg.model_name = value.to_string(),
        "dropout_p" => cfg.dropout_p = parse(key, value)?,
        "trials" => cfg.trials = parse(key, value)?,
        "cross_val_folds" => cfg.cross_val_folds = parse(key, value)?,
        "learning_rate" => cfg.learning_rate = parse(key, value)?,
        "max_epochs" => cfg.max_epochs = parse(key, value)?,
        "accumulate_grad_batches" => cfg.accumulate_grad_batches = parse(key, value)?,
        "stopping_patience" => cfg.stopping_patience = parse(key, value)?,
        "batch_size" => cfg.batch_size = parse(key, value)?,
        "global_seed" => cfg.global_seed = parse(key, value)?,
        "weight_decay" => cfg.weight_decay = parse(key, value)?,
        "label_source" => {
            cfg.label_source = parse::<LabelSource>(key, value)?;
        }
        "class_weighting" => cfg.class_weighting = parse(key, value)?,
        "strip_urls" => cfg.strip_urls = parse(key, value)?,
        "models_dir" => cfg.models_dir = value.to_string(),
        other => return Err(ConfigError::UnknownKey(other.to_string())),
    }
    Ok(())
}

/// Parse config text over the defaults.
pub fn parse_config_str(text: &str) -> Result<ModelConfig, ConfigError> {
    let mut cfg = ModelConfig::default();
    for (i, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::BadLine { line: i + 1, text: raw_line.to_string() })?;
        apply(&mut cfg, key.trim(), value.trim())?;
    }
    Ok(cfg)
}

/// Load a config file and apply `key=value` overrides last. A missing path
/// of `None` starts from pure defaults.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ModelConfig, ConfigError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Unreadable {
                path: p.display().to_string(),
                source,
            })?;
            parse_config_str(&text)?
        }
        None => ModelConfig::default(),
    };
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| ConfigError::BadLine { line: 0, text: item.clone() })?;
        apply(&mut cfg, key.trim(), value.trim())?;
    }
    cfg.validate().map_err(ConfigError::Invalid)?;
    Ok(cfg)
}
