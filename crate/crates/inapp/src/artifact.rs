//! Model artifact file: one JSON document holding the configuration, label
//! map, scaler, layer weights and rejection threshold.
//!
//! ```text
//! {"version":1,"config":{..},"label_map":[["app","activity"],..],
//!  "scaler":{"mean":[..48],"std":[..48]},
//!  "layers":[{"w":[[..fan_in]..fan_out],"b":[..fan_out]},..],"threshold":0.97}
//! ```
//!
//! Numbers are written in shortest round-trip form; loading reproduces the
//! artifact exactly, and saving the same artifact twice yields identical bytes.

use std::path::Path;

use inapp_core::dnn::{Layer, Matrix, ModelArtifact, ModelConfig, ModelParams};
use inapp_core::{ActivityLabel, Scaler};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArtifactFile {
    version: u32,
    config: ConfigDoc,
    label_map: Vec<(String, String)>,
    scaler: ScalerDoc,
    layers: Vec<LayerDoc>,
    threshold: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    input_dim: usize,
    hidden_dims: Vec<usize>,
    output_dim: usize,
    hidden_activation: String,
    output_activation: String,
    dropout_rate: f64,
    learning_rate: f64,
    adam_beta1: f64,
    adam_beta2: f64,
    adam_epsilon: f64,
    batch_size: usize,
    epochs: usize,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalerDoc {
    mean: Vec<f64>,
    std: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

fn to_doc(a: &ModelArtifact) -> ArtifactFile {
    let c = &a.config;
    ArtifactFile {
        version: FORMAT_VERSION,
        config: ConfigDoc {
            input_dim: c.input_dim,
            hidden_dims: c.hidden_dims.clone(),
            output_dim: c.output_dim,
            hidden_activation: "tanh".into(),
            output_activation: "softmax".into(),
            dropout_rate: c.dropout_rate,
            learning_rate: c.learning_rate,
            adam_beta1: c.adam_beta1,
            adam_beta2: c.adam_beta2,
            adam_epsilon: c.adam_epsilon,
            batch_size: c.batch_size,
            epochs: c.epochs,
            seed: c.seed,
        },
        label_map: a
            .label_map
            .iter()
            .map(|l| (l.app().to_string(), l.activity().to_string()))
            .collect(),
        scaler: ScalerDoc { mean: a.scaler.mean.clone(), std: a.scaler.std.clone() },
        layers: a
            .params
            .layers
            .iter()
            .map(|l| LayerDoc { w: l.w.iter_rows().map(<[f64]>::to_vec).collect(), b: l.b.clone() })
            .collect(),
        threshold: a.threshold,
    }
}

fn from_doc(d: ArtifactFile) -> std::result::Result<ModelArtifact, String> {
    if d.version != FORMAT_VERSION {
        return Err(format!("unsupported artifact version {}", d.version));
    }
    if d.config.hidden_activation != "tanh" || d.config.output_activation != "softmax" {
        return Err("only tanh hidden layers with a softmax output are supported".into());
    }
    let c = d.config;
    let config = ModelConfig {
        input_dim: c.input_dim,
        hidden_dims: c.hidden_dims,
        output_dim: c.output_dim,
        dropout_rate: c.dropout_rate,
        learning_rate: c.learning_rate,
        adam_beta1: c.adam_beta1,
        adam_beta2: c.adam_beta2,
        adam_epsilon: c.adam_epsilon,
        batch_size: c.batch_size,
        epochs: c.epochs,
        seed: c.seed,
    };
    config.validate().map_err(|e| e.to_string())?;
    let label_map = d
        .label_map
        .into_iter()
        .map(|(a, b)| ActivityLabel::new(a, b))
        .collect::<inapp_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let layers = d
        .layers
        .into_iter()
        .map(|l| Ok(Layer { w: Matrix::from_rows(&l.w)?, b: l.b }))
        .collect::<inapp_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let artifact = ModelArtifact {
        params: ModelParams { layers },
        scaler: Scaler { mean: d.scaler.mean, std: d.scaler.std },
        label_map,
        threshold: d.threshold,
        config,
    };
    artifact.validate().map_err(|e| e.to_string())?;
    if artifact.config.layer_dims() != layer_widths(&artifact.params) {
        return Err("layer shapes disagree with config".into());
    }
    Ok(artifact)
}

fn layer_widths(p: &ModelParams) -> Vec<usize> {
    let mut dims = vec![p.input_dim()];
    dims.extend(p.layers.iter().map(Layer::fan_out));
    dims
}

pub fn to_json(a: &ModelArtifact) -> Vec<u8> {
    let mut out = serde_json::to_vec(&to_doc(a)).expect("artifact serializes");
    out.push(b'\n');
    out
}

pub fn from_json(bytes: &[u8], path: &Path) -> Result<ModelArtifact> {
    let doc: ArtifactFile = serde_json::from_slice(bytes).map_err(|e| Error::format(path, e))?;
    from_doc(doc).map_err(|m| Error::format(path, m))
}

pub fn load(path: &Path) -> Result<ModelArtifact> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_json(&bytes, path)
}
