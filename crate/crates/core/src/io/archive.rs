//! Model archive: a JSON envelope with a CRC-32 over the exact body bytes.
//!
//! ```json
//! {"format":"sbn-model","version":1,"crc32":"89abcdef","body":{ ... }}
//! ```
//!
//! The body carries the model configuration, normalizer, optional training
//! configuration and every dense layer with weights and biases as base64
//! little-endian `f64`, so a reloaded model is bit-identical.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::features::Normalizer;
use crate::model::{ModelConfig, ModelError, SbnModel};
use crate::nn::{Activation, DenseNet};
use crate::trainer::TrainConfig;

pub const ARCHIVE_FORMAT: &str = "sbn-model";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checksum: {0}")]
    Checksum(String),
    #[error("unsupported archive version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("malformed archive: {0}")]
    Format(String),
    #[error("{field}: {message}")]
    Shape { field: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Serialize, Deserialize)]
struct Envelope<'a> {
    format: String,
    version: u32,
    crc32: String,
    #[serde(borrow)]
    body: &'a RawValue,
}

#[derive(Serialize, Deserialize)]
struct EnvelopeOut {
    format: &'static str,
    version: u32,
    crc32: String,
    body: Box<RawValue>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerRecord {
    name: String,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    dropout: f64,
    weights: String,
    bias: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Body {
    config: ModelConfig,
    normalizer: Normalizer,
    #[serde(default)]
    training: Option<TrainConfig>,
    parameter_count: usize,
    layers: Vec<LayerRecord>,
}

fn encode(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

fn decode(s: &str, field: &str) -> Result<Vec<f64>, ArchiveError> {
    let bytes = STANDARD.decode(s).map_err(|e| ArchiveError::Shape {
        field: field.to_string(),
        message: format!("invalid base64: {e}"),
    })?;
    if bytes.len() % 8 != 0 {
        return Err(ArchiveError::Shape {
            field: field.to_string(),
            message: format!("{} bytes is not a whole number of f64 values", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn named_nets(model: &SbnModel) -> Vec<(String, &DenseNet)> {
    let mut nets = vec![
        ("instant.reducer".to_string(), &model.instant.reducer),
        ("instant.head".to_string(), &model.instant.head),
    ];
    for stage in &model.stages {
        nets.push((format!("booster.{}", stage.kind), &stage.net));
    }
    nets
}

fn named_nets_mut(model: &mut SbnModel) -> Vec<(String, &mut DenseNet)> {
    let mut nets = vec![
        ("instant.reducer".to_string(), &mut model.instant.reducer),
        ("instant.head".to_string(), &mut model.instant.head),
    ];
    for stage in &mut model.stages {
        nets.push((format!("booster.{}", stage.kind), &mut stage.net));
    }
    nets
}

/// Serializes a model to archive text.
pub fn to_archive_string(model: &SbnModel, training: Option<&TrainConfig>) -> Result<String, ArchiveError> {
    let mut layers = Vec::new();
    for (name, net) in named_nets(model) {
        for (i, layer) in net.layers().iter().enumerate() {
            layers.push(LayerRecord {
                name: format!("{name}.{i}"),
                in_dim: layer.in_dim(),
                out_dim: layer.out_dim(),
                activation: layer.activation(),
                dropout: layer.dropout(),
                weights: encode(layer.weights()),
                bias: encode(layer.bias()),
            });
        }
    }
    let body = Body {
        config: model.config().clone(),
        normalizer: model.normalizer,
        training: training.cloned(),
        parameter_count: model.parameter_count(),
        layers,
    };
    let body_text = serde_json::to_string_pretty(&body).map_err(|e| ArchiveError::Format(e.to_string()))?;
    let crc = crc32fast::hash(body_text.as_bytes());
    let envelope = EnvelopeOut {
        format: ARCHIVE_FORMAT,
        version: ARCHIVE_VERSION,
        crc32: format!("{crc:08x}"),
        body: RawValue::from_string(body_text).map_err(|e| ArchiveError::Format(e.to_string()))?,
    };
    let mut text = serde_json::to_string(&envelope).map_err(|e| ArchiveError::Format(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Parses archive text, verifying the checksum and every layer shape.
pub fn from_archive_str(text: &str) -> Result<(SbnModel, Option<TrainConfig>), ArchiveError> {
    let envelope: Envelope = serde_json::from_str(text).map_err(|e| {
        if e.is_eof() {
            ArchiveError::Checksum(format!("archive is truncated ({e})"))
        } else {
            ArchiveError::Format(e.to_string())
        }
    })?;
    if envelope.format != ARCHIVE_FORMAT {
        return Err(ArchiveError::Format(format!("unknown format `{}`", envelope.format)));
    }
    if envelope.version != ARCHIVE_VERSION {
        return Err(ArchiveError::Version {
            found: envelope.version,
            expected: ARCHIVE_VERSION,
        });
    }
    let actual = format!("{:08x}", crc32fast::hash(envelope.body.get().as_bytes()));
    if actual != envelope.crc32.to_ascii_lowercase() {
        return Err(ArchiveError::Checksum(format!(
            "stored {} but body hashes to {actual}",
            envelope.crc32
        )));
    }
    let body: Body = serde_json::from_str(envelope.body.get()).map_err(|e| ArchiveError::Format(e.to_string()))?;
    let mut model = SbnModel::zeros(body.config, body.normalizer)?;
    if body.parameter_count != model.parameter_count() {
        return Err(ArchiveError::Shape {
            field: "parameter_count".into(),
            message: format!("expected {}, found {}", model.parameter_count(), body.parameter_count),
        });
    }
    let mut records = body.layers.into_iter();
    let mut index = 0;
    for (name, net) in named_nets_mut(&mut model) {
        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            let field = format!("layers[{index}]");
            let rec = records.next().ok_or_else(|| ArchiveError::Shape {
                field: field.clone(),
                message: format!("missing layer {name}.{i}"),
            })?;
            let shape = |what: &str, message: String| ArchiveError::Shape {
                field: format!("{field}.{what}"),
                message,
            };
            if rec.name != format!("{name}.{i}") {
                return Err(shape("name", format!("expected {name}.{i}, found {}", rec.name)));
            }
            if (rec.in_dim, rec.out_dim) != (layer.in_dim(), layer.out_dim()) {
                return Err(shape(
                    "in_dim",
                    format!("expected {}→{}, found {}→{}", layer.in_dim(), layer.out_dim(), rec.in_dim, rec.out_dim),
                ));
            }
            if rec.activation != layer.activation() {
                return Err(shape("activation", format!("expected {:?}, found {:?}", layer.activation(), rec.activation)));
            }
            let weights = decode(&rec.weights, &format!("{field}.weights"))?;
            let bias = decode(&rec.bias, &format!("{field}.bias"))?;
            if weights.len() != layer.weights().len() {
                return Err(shape("weights", format!("expected {} values, found {}", layer.weights().len(), weights.len())));
            }
            if bias.len() != layer.bias().len() {
                return Err(shape("bias", format!("expected {} values, found {}", layer.bias().len(), bias.len())));
            }
            if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
                return Err(shape("weights", "non-finite parameter".into()));
            }
            layer.weights_mut().copy_from_slice(&weights);
            layer.bias_mut().copy_from_slice(&bias);
            layer
                .set_dropout(rec.dropout)
                .map_err(|e| shape("dropout", e.to_string()))?;
            index += 1;
        }
    }
    if records.next().is_some() {
        return Err(ArchiveError::Shape {
            field: "layers".into(),
            message: format!("more than the {index} layers the configuration defines"),
        });
    }
    Ok((model, body.training))
}

pub fn save_model(model: &SbnModel, training: Option<&TrainConfig>, path: impl AsRef<Path>) -> Result<(), ArchiveError> {
    fs::write(path, to_archive_string(model, training)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(SbnModel, Option<TrainConfig>), ArchiveError> {
    from_archive_str(&fs::read_to_string(path)?)
}
