//! Model file: one self-describing JSON document holding the scaler, every
//! parameter, the class list and the training configuration.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{Scaler, FEATURE_SCHEMA_ID};
use crate::knn::{KnnConfig, KnnModel};
use crate::mlp::{EpochStats, MlpConfig, MlpModel};
use crate::model::Model;

pub const MODEL_FORMAT: &str = "clientprint-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Params {
    Knn {
        config: KnnConfig,
        labels: Vec<usize>,
        rows: Vec<Vec<f64>>,
    },
    Mlp {
        config: MlpConfig,
        layers: Vec<Layer>,
        #[serde(default)]
        history: Vec<EpochStats>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    /// `fan_in` rows of `fan_out` values.
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    feature_schema: String,
    input_dim: usize,
    n_train: usize,
    #[serde(default)]
    seed: Option<u64>,
    class_names: Vec<String>,
    scaler: Scaler,
    params: Params,
}

fn to_document(model: &Model) -> Document {
    match model {
        Model::Knn(m) => Document {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            feature_schema: FEATURE_SCHEMA_ID.into(),
            input_dim: m.dim(),
            n_train: m.n_train(),
            seed: None,
            class_names: m.class_names.clone(),
            scaler: m.scaler.clone(),
            params: Params::Knn {
                config: m.config.clone(),
                labels: m.train_labels.clone(),
                rows: m.train_rows.chunks_exact(m.dim()).map(<[f64]>::to_vec).collect(),
            },
        },
        Model::Mlp(m) => Document {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            feature_schema: FEATURE_SCHEMA_ID.into(),
            input_dim: m.input_dim(),
            n_train: m.n_train,
            seed: Some(m.config.seed),
            class_names: m.class_names.clone(),
            scaler: m.scaler.clone(),
            params: Params::Mlp {
                config: m.config.clone(),
                layers: m
                    .weights
                    .iter()
                    .zip(&m.biases)
                    .map(|(w, b)| Layer {
                        weights: w.rows().into_iter().map(|r| r.to_vec()).collect(),
                        biases: b.to_vec(),
                    })
                    .collect(),
                history: m.train_history.clone(),
            },
        },
    }
}

fn from_document(doc: Document) -> Result<Model> {
    if doc.format != MODEL_FORMAT {
        return Err(Error::Incompatible(format!(
            "not a model file (format `{}`)",
            doc.format
        )));
    }
    if doc.version != MODEL_VERSION {
        return Err(Error::Incompatible(format!(
            "model version {} unsupported (expected {MODEL_VERSION})",
            doc.version
        )));
    }
    if doc.feature_schema != FEATURE_SCHEMA_ID {
        return Err(Error::Incompatible(format!(
            "feature schema `{}` does not match `{FEATURE_SCHEMA_ID}`",
            doc.feature_schema
        )));
    }
    if doc.scaler.dim() != doc.input_dim {
        return Err(Error::DimMismatch {
            expected: doc.input_dim,
            got: doc.scaler.dim(),
        });
    }
    let model = match doc.params {
        Params::Knn { config, labels, rows } => {
            if rows.len() != doc.n_train || labels.len() != doc.n_train {
                return Err(Error::DimMismatch {
                    expected: doc.n_train,
                    got: rows.len(),
                });
            }
            if let Some(r) = rows.iter().find(|r| r.len() != doc.input_dim) {
                return Err(Error::DimMismatch {
                    expected: doc.input_dim,
                    got: r.len(),
                });
            }
            Model::Knn(KnnModel {
                config,
                scaler: doc.scaler,
                train_rows: rows.concat(),
                train_labels: labels,
                class_names: doc.class_names,
            })
        }
        Params::Mlp {
            config,
            layers,
            history,
        } => {
            let mut weights = Vec::with_capacity(layers.len());
            let mut biases = Vec::with_capacity(layers.len());
            for layer in layers {
                let fan_in = layer.weights.len();
                let fan_out = layer.weights.first().map_or(0, Vec::len);
                if let Some(r) = layer.weights.iter().find(|r| r.len() != fan_out) {
                    return Err(Error::DimMismatch {
                        expected: fan_out,
                        got: r.len(),
                    });
                }
                let w = Array2::from_shape_vec((fan_in, fan_out), layer.weights.concat())
                    .map_err(|e| Error::Incompatible(e.to_string()))?;
                weights.push(w);
                biases.push(Array1::from(layer.biases));
            }
            if weights.first().map(|w| w.nrows()) != Some(doc.input_dim) {
                return Err(Error::DimMismatch {
                    expected: doc.input_dim,
                    got: weights.first().map_or(0, |w| w.nrows()),
                });
            }
            Model::Mlp(MlpModel {
                config,
                scaler: doc.scaler,
                weights,
                biases,
                class_names: doc.class_names,
                train_history: history,
                n_train: doc.n_train,
            })
        }
    };
    model.validate()?;
    Ok(model)
}

fn canonical_bytes(model: &Model) -> Vec<u8> {
    serde_json::to_vec(&to_document(model)).expect("models serialize")
}

/// First 16 hex digits of the SHA-256 of the model file contents.
pub fn model_id(model: &Model) -> String {
    id_of_bytes(&canonical_bytes(model))
}

fn id_of_bytes(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

pub fn write_model<W: Write>(model: &Model, mut w: W) -> Result<()> {
    w.write_all(&canonical_bytes(model))?;
    w.flush()?;
    Ok(())
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, canonical_bytes(model))?;
    Ok(())
}

pub fn read_model(bytes: &[u8]) -> Result<Model> {
    let doc: Document = serde_json::from_slice(bytes).map_err(|e| Error::Malformed {
        line: e.line(),
        offset: 0,
        reason: e.to_string(),
    })?;
    from_document(doc)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let doc: Document = serde_json::from_reader(BufReader::new(File::open(path)?)).map_err(|e| Error::Malformed {
        line: e.line(),
        offset: 0,
        reason: e.to_string(),
    })?;
    from_document(doc)
}

/// Metadata served alongside a loaded model.
pub fn describe_model(model: &Model) -> serde_json::Value {
    let doc = to_document(model);
    let config = match &doc.params {
        Params::Knn { config, .. } => serde_json::to_value(config),
        Params::Mlp { config, .. } => serde_json::to_value(config),
    }
    .expect("configs serialize");
    serde_json::json!({
        "model_id": model_id(model),
        "format": doc.format,
        "version": doc.version,
        "kind": model.kind(),
        "feature_schema": doc.feature_schema,
        "input_dim": doc.input_dim,
        "n_train": doc.n_train,
        "seed": doc.seed,
        "class_names": doc.class_names,
        "config": config,
    })
}
