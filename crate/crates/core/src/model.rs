//! Classifier-agnostic configuration and trained-model wrapper.

use serde::{Deserialize, Serialize};

use crate::dataset::{train_test_split, LabeledDataset};
use crate::error::Result;
use crate::features::FeatureVector;
use crate::knn::{knn_fit, KnnConfig, KnnModel};
use crate::mlp::{mlp_train, MlpConfig, MlpModel};
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSetup {
    pub network: MlpConfig,
    /// Share of each training set held back for early stopping; 0 disables it.
    pub validation_fraction: f64,
}

impl Default for MlpSetup {
    fn default() -> Self {
        MlpSetup {
            network: MlpConfig::default(),
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierConfig {
    Knn(KnnConfig),
    Mlp(MlpSetup),
}

impl ClassifierConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ClassifierConfig::Knn(_) => "knn",
            ClassifierConfig::Mlp(_) => "mlp",
        }
    }

    pub fn fit(&self, train: &LabeledDataset) -> Result<Model> {
        match self {
            ClassifierConfig::Knn(cfg) => Ok(Model::Knn(knn_fit(train, cfg)?)),
            ClassifierConfig::Mlp(setup) => {
                let (fit, val) = if setup.validation_fraction > 0.0 {
                    let seed = crate::rng::derive_seed(setup.network.seed, crate::rng::tags::VALIDATION);
                    train_test_split(train, setup.validation_fraction, seed)?
                } else {
                    (
                        train.clone(),
                        LabeledDataset::empty(train.scheme, train.class_names.clone()),
                    )
                };
                Ok(Model::Mlp(mlp_train(&fit, &val, &setup.network)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Knn(KnnModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Knn(_) => "knn",
            Model::Mlp(_) => "mlp",
        }
    }

    pub fn class_names(&self) -> &[String] {
        match self {
            Model::Knn(m) => &m.class_names,
            Model::Mlp(m) => &m.class_names,
        }
    }

    /// Predicted class index and per-class scores (vote fractions for KNN,
    /// softmax probabilities for MLP).
    pub fn predict(&self, v: &FeatureVector) -> Result<(usize, Vec<f64>)> {
        match self {
            Model::Knn(m) => m.predict(v),
            Model::Mlp(m) => m.predict(v),
        }
    }

    pub fn predict_batch(&self, vs: &[FeatureVector]) -> Result<Vec<(usize, Vec<f64>)>> {
        self.predict_batch_with(vs, Exec::default())
    }

    pub fn predict_batch_with(&self, vs: &[FeatureVector], exec: Exec) -> Result<Vec<(usize, Vec<f64>)>> {
        match self {
            Model::Knn(m) => m.predict_batch_with(vs, exec),
            Model::Mlp(m) => m.predict_batch(vs),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Knn(m) => m.validate(),
            Model::Mlp(m) => m.validate(),
        }
    }
}

/// Anything that maps a feature vector onto a class of a fixed class list.
pub trait Classifier: Sync {
    fn class_names(&self) -> &[String];
    fn predict(&self, v: &FeatureVector) -> Result<(usize, Vec<f64>)>;

    fn predict_batch_with(&self, vs: &[FeatureVector], exec: Exec) -> Result<Vec<(usize, Vec<f64>)>> {
        crate::par::try_map(exec, vs, |v| self.predict(v))
    }

    /// Self-description recorded in reports.
    fn describe(&self) -> serde_json::Value;
}

/// Produces a fresh classifier from a training set.
pub trait Trainer: Sync {
    type Output: Classifier + Send;

    fn fit(&self, train: &LabeledDataset) -> Result<Self::Output>;
    fn describe(&self) -> serde_json::Value;
}

impl Classifier for Model {
    fn class_names(&self) -> &[String] {
        Model::class_names(self)
    }

    fn predict(&self, v: &FeatureVector) -> Result<(usize, Vec<f64>)> {
        Model::predict(self, v)
    }

    fn predict_batch_with(&self, vs: &[FeatureVector], exec: Exec) -> Result<Vec<(usize, Vec<f64>)>> {
        Model::predict_batch_with(self, vs, exec)
    }

    fn describe(&self) -> serde_json::Value {
        match self {
            Model::Knn(m) => serde_json::json!({ "kind": "knn", "k": m.config.k, "metric": m.config.metric }),
            Model::Mlp(m) => serde_json::json!({ "kind": "mlp", "network": m.config }),
        }
    }
}

impl Trainer for ClassifierConfig {
    type Output = Model;

    fn fit(&self, train: &LabeledDataset) -> Result<Model> {
        ClassifierConfig::fit(self, train)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("configs serialize")
    }
}
