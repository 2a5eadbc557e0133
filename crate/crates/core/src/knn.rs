//! Exhaustive k-nearest-neighbors over standardized features.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Scaler};
use crate::par::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    #[serde(default)]
    pub metric: Metric,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig {
            k: 9,
            metric: Metric::Euclidean,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub config: KnnConfig,
    pub scaler: Scaler,
    /// Row-major scaled training matrix.
    pub train_rows: Vec<f64>,
    pub train_labels: Vec<usize>,
    pub class_names: Vec<String>,
}

/// Fits the scaler on `train` and stores every scaled row.
pub fn knn_fit(train: &LabeledDataset, config: &KnnConfig) -> Result<KnnModel> {
    if config.k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if train.len() < config.k {
        return Err(Error::invalid(format!(
            "k = {} exceeds training size {}",
            config.k,
            train.len()
        )));
    }
    let scaler = Scaler::fit(&train.vectors)?;
    let dim = scaler.dim();
    let mut train_rows = vec![0.0; train.len() * dim];
    for (v, out) in train.vectors.iter().zip(train_rows.chunks_exact_mut(dim)) {
        scaler.transform_into(v.as_slice(), out)?;
    }
    Ok(KnnModel {
        config: config.clone(),
        scaler,
        train_rows,
        train_labels: train.labels.clone(),
        class_names: train.class_names.clone(),
    })
}

fn cmp_neighbor(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.scaler.dim()
    }

    pub fn n_train(&self) -> usize {
        self.train_labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.scaler.validate()?;
        if self.config.k == 0 || self.n_train() < self.config.k {
            return Err(Error::invalid("k outside [1, training size]"));
        }
        if self.train_rows.len() != self.n_train() * self.dim() {
            return Err(Error::DimMismatch {
                expected: self.n_train() * self.dim(),
                got: self.train_rows.len(),
            });
        }
        if self.train_labels.iter().any(|&l| l >= self.class_names.len()) {
            return Err(Error::invalid("training label out of range"));
        }
        Ok(())
    }

    /// The `k` nearest training rows as `(squared distance, index)`, sorted;
    /// equal distances resolve to the lower training index.
    pub fn neighbors(&self, scaled: &[f64]) -> Vec<(f64, usize)> {
        let dim = self.dim();
        let mut all: Vec<(f64, usize)> = self
            .train_rows
            .chunks_exact(dim)
            .enumerate()
            .map(|(i, row)| {
                let d: f64 = row.iter().zip(scaled).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let k = self.config.k;
        if k < all.len() {
            all.select_nth_unstable_by(k - 1, cmp_neighbor);
            all.truncate(k);
        }
        all.sort_unstable_by(cmp_neighbor);
        all
    }

    /// Majority vote among the k nearest rows. Class ties go to the class
    /// whose closest member is nearer, then to the lower class index.
    pub fn predict(&self, v: &FeatureVector) -> Result<(usize, Vec<f64>)> {
        let scaled = self.scaler.transform(v.as_slice())?;
        Ok(self.vote(&self.neighbors(&scaled)))
    }

    fn vote(&self, neighbors: &[(f64, usize)]) -> (usize, Vec<f64>) {
        let n_classes = self.class_names.len();
        let mut counts = vec![0usize; n_classes];
        let mut nearest = vec![f64::INFINITY; n_classes];
        for &(d, i) in neighbors {
            let c = self.train_labels[i];
            counts[c] += 1;
            if d < nearest[c] {
                nearest[c] = d;
            }
        }
        let best = (0..n_classes)
            .min_by(|&a, &b| {
                counts[b]
                    .cmp(&counts[a])
                    .then(nearest[a].total_cmp(&nearest[b]))
                    .then(a.cmp(&b))
            })
            .expect("at least one class");
        let k = neighbors.len() as f64;
        (best, counts.iter().map(|&c| c as f64 / k).collect())
    }

    pub fn predict_batch(&self, vs: &[FeatureVector]) -> Result<Vec<(usize, Vec<f64>)>> {
        self.predict_batch_with(vs, Exec::default())
    }

    pub fn predict_batch_with(&self, vs: &[FeatureVector], exec: Exec) -> Result<Vec<(usize, Vec<f64>)>> {
        par::try_map(exec, vs, |v| self.predict(v))
    }
}
