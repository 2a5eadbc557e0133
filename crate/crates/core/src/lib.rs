//! Consensus client fingerprinting.
//!
//! Blocks are mapped from their reward records onto a fixed feature schema
//! ([`features`]), then classified by client with a k-nearest-neighbors
//! ([`knn`]) or multi-layer perceptron ([`mlp`]) model. [`experiments`]
//! implements the evaluation protocols: cross-validation, K and training-size
//! sweeps, mode transfer, equal-parts merged training and client-by-mode
//! classification. [`synth`] fabricates labeled data for desk-scale runs and
//! [`ingest`] owns every on-disk format.

pub mod dataset;
pub mod error;
pub mod experiments;
pub mod features;
pub mod ingest;
pub mod knn;
pub mod mlp;
pub mod model;
pub mod par;
pub mod rng;
pub mod synth;
pub mod tuning;

pub use dataset::{LabelScheme, LabeledDataset};
pub use error::{Error, Result};
pub use features::{extract_features, FeatureVector, Gwei, ModeTag, Scaler, SlotRewardsRecord};
pub use knn::{KnnConfig, KnnModel};
pub use mlp::{MlpConfig, MlpModel};
pub use model::{ClassifierConfig, Model};
