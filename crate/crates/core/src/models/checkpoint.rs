//! Encoder checkpoint persistence.
//!
//! A checkpoint is a directory holding `config.json` (architecture plus
//! tokenizer settings) and `weights.bin` (all parameter tensors as
//! little-endian f64, prefixed by name and length). Training consumes a
//! pretrained checkpoint; it never produces one from scratch except through
//! [`init_checkpoint`], which writes randomly initialized weights for
//! desk-scale runs.

use super::encoder::{Encoder, EncoderConfig, EncoderParams};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

const WEIGHTS_MAGIC: &[u8; 8] = b"FRMENC01";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint missing at {path}: {detail}")]
    Missing { path: String, detail: String },
    #[error("checkpoint at {path} is corrupt: {detail}")]
    Corrupt { path: String, detail: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> CheckpointError {
    CheckpointError::Io { path: path.display().to_string(), source }
}

/// Resolve a model name to a checkpoint directory.
///
/// A name that is an existing directory is used as-is; otherwise it is
/// looked up under `models_dir` with path separators sanitized
/// (`vinai/bertweet-base` becomes `<models_dir>/vinai__bertweet-base`).
pub fn resolve_model_dir(model_name: &str, models_dir: &Path) -> PathBuf {
    let direct = PathBuf::from(model_name);
    if direct.is_dir() {
        return direct;
    }
    models_dir.join(model_name.replace(['/', '\\'], "__"))
}

/// Load a checkpoint directory into an encoder.
pub fn load_checkpoint(dir: &Path) -> Result<Encoder, CheckpointError> {
    let config_path = dir.join("config.json");
    let weights_path = dir.join("weights.bin");
    if !config_path.is_file() || !weights_path.is_file() {
        return Err(CheckpointError::Missing {
            path: dir.display().to_string(),
            detail: "expected config.json and weights.bin; run `framing init-checkpoint` \
                     or point model_name at a prepared checkpoint directory"
                .into(),
        });
    }

    let config_text =
        std::fs::read_to_string(&config_path).map_err(|e| io_err(&config_path, e))?;
    let cfg: EncoderConfig =
        serde_json::from_str(&config_text).map_err(|e| CheckpointError::Corrupt {
            path: config_path.display().to_string(),
            detail: e.to_string(),
        })?;
    cfg.validate().map_err(|detail| CheckpointError::Corrupt {
        path: config_path.display().to_string(),
        detail,
    })?;

    let mut params = EncoderParams::zeros(&cfg);
    let mut file =
        std::io::BufReader::new(std::fs::File::open(&weights_path).map_err(|e| io_err(&weights_path, e))?);

    let mut magic = [0u8; 8];
    file.read_exact(&mut magic).map_err(|e| io_err(&weights_path, e))?;
    if &magic != WEIGHTS_MAGIC {
        return Err(CheckpointError::Corrupt {
            path: weights_path.display().to_string(),
            detail: "bad magic".into(),
        });
    }

    for (name, tensor) in params.tensors_mut() {
        let mut len_buf = [0u8; 2];
        file.read_exact(&mut len_buf).map_err(|e| io_err(&weights_path, e))?;
        let name_len = u16::from_le_bytes(len_buf) as usize;
        let mut name_buf = vec![0u8; name_len];
        file.read_exact(&mut name_buf).map_err(|e| io_err(&weights_path, e))?;
        let stored_name = String::from_utf8_lossy(&name_buf).to_string();
        let mut count_buf = [0u8; 8];
        file.read_exact(&mut count_buf).map_err(|e| io_err(&weights_path, e))?;
        let count = u64::from_le_bytes(count_buf) as usize;
        if stored_name != name || count != tensor.len() {
            return Err(CheckpointError::Corrupt {
                path: weights_path.display().to_string(),
                detail: format!(
                    "tensor mismatch: expected {name}[{}], found {stored_name}[{count}]",
                    tensor.len()
                ),
            });
        }
        let mut bytes = vec![0u8; count * 8];
        file.read_exact(&mut bytes).map_err(|e| io_err(&weights_path, e))?;
        for (i, chunk) in bytes.chunks_exact(8).enumerate() {
            tensor[i] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }

    Ok(Encoder::new(cfg, params))
}

/// Write an encoder to a checkpoint directory (created if needed).
pub fn save_checkpoint(encoder: &Encoder, dir: &Path) -> Result<(), CheckpointError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let config_path = dir.join("config.json");
    let json = serde_json::to_string_pretty(&encoder.cfg).expect("config serializes");
    std::fs::write(&config_path, json).map_err(|e| io_err(&config_path, e))?;

    let weights_path = dir.join("weights.bin");
    let mut file = std::io::BufWriter::new(
        std::fs::File::create(&weights_path).map_err(|e| io_err(&weights_path, e))?,
    );
    file.write_all(WEIGHTS_MAGIC).map_err(|e| io_err(&weights_path, e))?;
    for (name, tensor) in encoder.params.tensors() {
        file.write_all(&(name.len() as u16).to_le_bytes())
            .map_err(|e| io_err(&weights_path, e))?;
        file.write_all(name.as_bytes()).map_err(|e| io_err(&weights_path, e))?;
        file.write_all(&(tensor.len() as u64).to_le_bytes())
            .map_err(|e| io_err(&weights_path, e))?;
        for &v in tensor {
            file.write_all(&v.to_le_bytes()).map_err(|e| io_err(&weights_path, e))?;
        }
    }
    file.flush().map_err(|e| io_err(&weights_path, e))
}

/// Create a randomly initialized checkpoint at `dir`.
pub fn init_checkpoint(cfg: EncoderConfig, seed: u64, dir: &Path) -> Result<Encoder, CheckpointError> {
    cfg.validate().map_err(|detail| CheckpointError::Corrupt {
        path: dir.display().to_string(),
        detail,
    })?;
    let encoder = Encoder::init_random(cfg, seed);
    save_checkpoint(&encoder, dir)?;
    Ok(encoder)
}

/// Persist a trained model: the encoder checkpoint plus `head.bin`
/// (dimension, then weight and bias tensors as little-endian f64, exact).
pub fn save_model(
    model: &super::trainer::TrainedModel,
    dir: &Path,
) -> Result<(), CheckpointError> {
    save_checkpoint(&model.encoder, dir)?;
    let head_path = dir.join("head.bin");
    let mut bytes = Vec::with_capacity(8 * (1 + model.head.w.len() + model.head.b.len()));
    bytes.extend_from_slice(&(model.head.dim as u64).to_le_bytes());
    for &v in model.head.w.iter().chain(model.head.b.iter()) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&head_path, bytes).map_err(|e| io_err(&head_path, e))
}

/// Load a trained model written by [`save_model`].
pub fn load_model(dir: &Path, batch_size: usize) -> Result<super::trainer::TrainedModel, CheckpointError> {
    let encoder = load_checkpoint(dir)?;
    let head_path = dir.join("head.bin");
    let bytes = std::fs::read(&head_path).map_err(|e| io_err(&head_path, e))?;
    let corrupt = |detail: &str| CheckpointError::Corrupt {
        path: head_path.display().to_string(),
        detail: detail.to_string(),
    };
    if bytes.len() < 8 {
        return Err(corrupt("truncated header"));
    }
    let dim = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    if dim != encoder.cfg.dim || bytes.len() != 8 * (1 + 3 * dim + 3) {
        return Err(corrupt("head dimensions do not match the encoder"));
    }
    let values: Vec<f64> = bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let (w, b) = values.split_at(3 * dim);
    Ok(super::trainer::TrainedModel {
        encoder,
        head: super::trainer::ClassifierHead { w: w.to_vec(), b: b.to_vec(), dim },
        batch_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt");
        let enc = init_checkpoint(EncoderConfig::tiny(64, 8), 42, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.cfg, enc.cfg);
        assert_eq!(loaded.params, enc.params);
    }

    #[test]
    fn missing_checkpoint_is_fatal_with_instruction() {
        let err = load_checkpoint(Path::new("/nonexistent/ckpt")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("init-checkpoint"), "message was: {msg}");
    }

    #[test]
    fn truncated_weights_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt");
        init_checkpoint(EncoderConfig::tiny(64, 8), 1, &path).unwrap();
        let weights = path.join("weights.bin");
        let bytes = std::fs::read(&weights).unwrap();
        std::fs::write(&weights, &bytes[..bytes.len() / 2]).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn model_save_load_round_trip() {
        use crate::models::trainer::ClassifierHead;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model");
        let encoder = crate::models::Encoder::init_random(EncoderConfig::tiny(64, 8), 9);
        let dim = encoder.cfg.dim;
        let model = crate::models::TrainedModel {
            encoder,
            head: ClassifierHead {
                w: (0..3 * dim).map(|i| i as f64 * 0.01).collect(),
                b: vec![0.1, -0.2, 0.3],
                dim,
            },
            batch_size: 16,
        };
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path, 16).unwrap();
        assert_eq!(loaded.head, model.head);
        assert_eq!(loaded.encoder.params, model.encoder.params);
    }

    #[test]
    fn resolve_prefers_existing_directory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("here");
        std::fs::create_dir(&path).unwrap();
        assert_eq!(
            resolve_model_dir(path.to_str().unwrap(), Path::new("/models")),
            path
        );
        assert_eq!(
            resolve_model_dir("vinai/bertweet-base", Path::new("/models")),
            PathBuf::from("/models/vinai__bertweet-base")
        );
    }
}
