//! Confusion matrix and per-class recall.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let n = class_names.len();
        ConfusionMatrix {
            class_names,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_pairs(class_names: Vec<String>, truth: &[usize], predicted: &[usize]) -> Self {
        let mut cm = ConfusionMatrix::new(class_names);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.record(t, p);
        }
        cm
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_total(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// `trace / total`, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    /// Recall per class; `None` where the class has no true samples.
    pub fn recall(&self) -> Vec<Option<f64>> {
        (0..self.n_classes())
            .map(|c| match self.row_total(c) {
                0 => None,
                t => Some(self.counts[c][c] as f64 / t as f64),
            })
            .collect()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.class_names != other.class_names {
            return Err(Error::ClassMismatch(
                "cannot add confusion matrices over different classes".into(),
            ));
        }
        for (r, o) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in r.iter_mut().zip(o) {
                *x += y;
            }
        }
        Ok(())
    }

    /// Sums rows and columns that `map` sends to the same coarse class.
    pub fn collapse(&self, map: &[usize], coarse_names: Vec<String>) -> Result<ConfusionMatrix> {
        if map.len() != self.n_classes() || map.iter().any(|&m| m >= coarse_names.len()) {
            return Err(Error::invalid("collapse map does not fit the matrix"));
        }
        let mut out = ConfusionMatrix::new(coarse_names);
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                out.counts[map[i]][map[j]] += c;
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_classes();
        if self.counts.len() != n || self.counts.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("confusion matrix is not square over its classes"));
        }
        Ok(())
    }
}
