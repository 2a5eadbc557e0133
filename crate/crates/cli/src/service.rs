//! HTTP classification service over one immutable model.
//!
//! Requests carry raw reward records; feature extraction and scaling happen
//! here, so the feature schema never leaves the server.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clientprint::features::{extract_features, Gwei, SlotRewardsRecord, FEATURE_SCHEMA_ID};
use clientprint::ingest::model_file::{describe_model, model_id};
use clientprint::{Error, Model};
use serde::{Deserialize, Serialize};

/// Tolerance on the probability sum before a response counts as a numeric failure.
const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub model_id: String,
    pub predicted: String,
    pub probabilities: BTreeMap<String, f64>,
    pub schema_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifyError {
    /// Not JSON, or not shaped like a reward record.
    Malformed {
        field: Option<String>,
        message: String,
    },
    /// Well-formed but built for another feature schema or violating it.
    Schema {
        field: Option<String>,
        message: String,
    },
    Numeric(String),
}

impl ClassifyError {
    pub fn status(&self) -> StatusCode {
        match self {
            ClassifyError::Malformed { .. } => StatusCode::BAD_REQUEST,
            ClassifyError::Schema { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ClassifyError::Numeric(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn body(&self) -> ErrorBody {
        let (error, field, message) = match self {
            ClassifyError::Malformed { field, message } => ("malformed_request", field.clone(), message.clone()),
            ClassifyError::Schema { field, message } => ("schema_mismatch", field.clone(), message.clone()),
            ClassifyError::Numeric(m) => ("numeric_failure", None, m.clone()),
        };
        ErrorBody {
            error: error.into(),
            field,
            message,
        }
    }

    fn at_index(self, i: usize) -> Self {
        let prefix = |f: Option<String>| Some(f.map_or_else(|| format!("[{i}]"), |f| format!("[{i}].{f}")));
        match self {
            ClassifyError::Malformed { field, message } => ClassifyError::Malformed {
                field: prefix(field),
                message,
            },
            ClassifyError::Schema { field, message } => ClassifyError::Schema {
                field: prefix(field),
                message,
            },
            ClassifyError::Numeric(m) => ClassifyError::Numeric(format!("item {i}: {m}")),
        }
    }
}

impl IntoResponse for ClassifyError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}

/// Loaded model plus everything derived from it once at startup.
pub struct Classifier {
    model: Model,
    model_id: String,
    metadata: serde_json::Value,
    ideal_reward: Gwei,
}

impl Classifier {
    pub fn new(model: Model, ideal_reward: Gwei) -> Self {
        let model_id = model_id(&model);
        let mut metadata = describe_model(&model);
        metadata["ideal_reward"] = ideal_reward.0.to_string().into();
        Classifier {
            model,
            model_id,
            metadata,
            ideal_reward,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn metadata(&self) -> &serde_json::Value {
        &self.metadata
    }

    pub fn classify_record(&self, record: &SlotRewardsRecord) -> Result<ClassifyResponse, ClassifyError> {
        let v = extract_features(record, self.ideal_reward).map_err(core_error)?;
        let (best, probs) = self.model.predict(&v).map_err(core_error)?;
        let names = self.model.class_names();
        if probs.len() != names.len() || probs.iter().any(|p| !p.is_finite()) {
            return Err(ClassifyError::Numeric("model produced non-finite probabilities".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(ClassifyError::Numeric(format!("probabilities sum to {sum}")));
        }
        Ok(ClassifyResponse {
            model_id: self.model_id.clone(),
            predicted: names[best].clone(),
            probabilities: names.iter().cloned().zip(probs).collect(),
            schema_version: FEATURE_SCHEMA_ID.into(),
        })
    }

    /// One request item. A `schema_version` or `feature_schema` member, when
    /// present, must name this server's schema.
    pub fn classify_value(&self, value: serde_json::Value) -> Result<ClassifyResponse, ClassifyError> {
        if !value.is_object() {
            return Err(ClassifyError::Malformed {
                field: None,
                message: "expected a reward record object".into(),
            });
        }
        for key in ["schema_version", "feature_schema"] {
            if let Some(s) = value.get(key) {
                if s.as_str() != Some(FEATURE_SCHEMA_ID) {
                    return Err(ClassifyError::Schema {
                        field: Some(key.into()),
                        message: format!("request targets schema {s}, server speaks `{FEATURE_SCHEMA_ID}`"),
                    });
                }
            }
        }
        let record: SlotRewardsRecord = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            ClassifyError::Malformed {
                field: (path != ".").then_some(path),
                message: e.into_inner().to_string(),
            }
        })?;
        self.classify_record(&record)
    }
}

fn core_error(e: Error) -> ClassifyError {
    match e {
        Error::Schema { field, reason } => ClassifyError::Schema {
            field: Some(field),
            message: reason,
        },
        e if e.is_numeric() => ClassifyError::Numeric(e.to_string()),
        Error::DimMismatch { .. } => ClassifyError::Schema {
            field: None,
            message: e.to_string(),
        },
        e => ClassifyError::Numeric(e.to_string()),
    }
}

fn parse_json(body: &[u8]) -> Result<serde_json::Value, ClassifyError> {
    serde_json::from_slice(body).map_err(|e| ClassifyError::Malformed {
        field: None,
        message: format!("invalid JSON at line {} column {}: {e}", e.line(), e.column()),
    })
}

type Shared = Arc<Classifier>;

async fn healthz(State(c): State<Shared>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "model_id": c.model_id }))
}

async fn model_info(State(c): State<Shared>) -> Json<serde_json::Value> {
    Json(c.metadata.clone())
}

async fn classify(State(c): State<Shared>, body: Bytes) -> Result<Json<ClassifyResponse>, ClassifyError> {
    let value = parse_json(&body)?;
    c.classify_value(value).map(Json)
}

async fn classify_batch(State(c): State<Shared>, body: Bytes) -> Result<Json<Vec<ClassifyResponse>>, ClassifyError> {
    let serde_json::Value::Array(items) = parse_json(&body)? else {
        return Err(ClassifyError::Malformed {
            field: None,
            message: "expected an array of reward records".into(),
        });
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, v)| c.classify_value(v).map_err(|e| e.at_index(i)))
        .collect::<Result<Vec<_>, _>>()
        .map(Json)
}

pub fn router(classifier: Arc<Classifier>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/model", get(model_info))
        .route("/classify", post(classify))
        .route("/classify/batch", post(classify_batch))
        .with_state(classifier)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    classifier: Arc<Classifier>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(classifier))
        .with_graceful_shutdown(shutdown)
        .await
}

pub struct ServiceHandle {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    task: Option<tokio::task::JoinHandle<std::io::Result<()>>>,
}

impl ServiceHandle {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn stop(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.task.take() {
            Some(t) => t.await.map_err(std::io::Error::other)?,
            None => Ok(()),
        }
    }
}

/// Binds `addr` (port 0 picks a free port) and serves in the background.
pub async fn spawn(classifier: Arc<Classifier>, addr: SocketAddr) -> std::io::Result<ServiceHandle> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let task = tokio::spawn(serve(classifier, listener, async {
        let _ = rx.await;
    }));
    Ok(ServiceHandle {
        addr,
        shutdown: Some(tx),
        task: Some(task),
    })
}
