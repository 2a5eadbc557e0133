//! Experiment reports: a JSON document plus a plain-text rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::ConfusionMatrix;
use crate::dataset::{LabelScheme, LabeledDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Evaluation,
    CrossValidation,
    KSweep,
    SizeSweep,
    RandomSearch,
    GridSearch,
    ModeTransferSame,
    ModeTransferOther,
    MergedCrossValidation,
    MergedDefaultTest,
    MergedAllSubnetsTest,
    TwelveClass,
}

/// How the headline accuracy was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Protocol {
    HeldOut,
    /// Pooled confusion over all folds; `accuracy` is trace/total of that pool.
    CrossValidation {
        folds: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub size: usize,
    pub scheme: LabelScheme,
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
    pub mode_counts: BTreeMap<String, usize>,
}

impl DatasetSummary {
    pub fn of(ds: &LabeledDataset) -> Self {
        DatasetSummary {
            size: ds.len(),
            scheme: ds.scheme,
            class_names: ds.class_names.clone(),
            class_counts: ds.class_counts(),
            mode_counts: ds.mode_counts().into_iter().map(|(m, c)| (m.to_string(), c)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub folds: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the fold accuracies.
    pub std: f64,
}

impl CvSummary {
    pub fn from_folds(fold_accuracies: Vec<f64>) -> Self {
        let n = fold_accuracies.len() as f64;
        let mean = fold_accuracies.iter().sum::<f64>() / n;
        let var = fold_accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        CvSummary {
            folds: fold_accuracies.len(),
            fold_accuracies,
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
}

/// Client-level view of a client-by-mode result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapsedSummary {
    pub accuracy: f64,
    pub per_class_recall: Vec<f64>,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub protocol: Protocol,
    pub dataset: DatasetSummary,
    pub classifier: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    pub accuracy: f64,
    /// Zero for classes without test samples; those are listed in `absent_classes`.
    pub per_class_recall: Vec<f64>,
    pub absent_classes: Vec<String>,
    pub confusion: ConfusionMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<Vec<CurvePoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapsed: Option<CollapsedSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
}

pub(crate) fn recall_with_absent(cm: &ConfusionMatrix) -> (Vec<f64>, Vec<String>) {
    let mut absent = Vec::new();
    let recall = cm
        .recall()
        .into_iter()
        .enumerate()
        .map(|(c, r)| {
            r.unwrap_or_else(|| {
                absent.push(cm.class_names[c].clone());
                0.0
            })
        })
        .collect();
    (recall, absent)
}

impl ExperimentReport {
    pub fn from_confusion(
        kind: ExperimentKind,
        protocol: Protocol,
        dataset: DatasetSummary,
        classifier: serde_json::Value,
        confusion: ConfusionMatrix,
    ) -> Self {
        let (per_class_recall, absent_classes) = recall_with_absent(&confusion);
        ExperimentReport {
            kind,
            protocol,
            dataset,
            classifier,
            model_id: None,
            accuracy: confusion.accuracy(),
            per_class_recall,
            absent_classes,
            confusion,
            cv: None,
            curve: None,
            collapsed: None,
            seed: None,
            timestamp_unix: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "experiment : {}",
            serde_json::to_value(self.kind).unwrap().as_str().unwrap_or("?")
        );
        let protocol = match self.protocol {
            Protocol::HeldOut => "held-out test set".to_string(),
            Protocol::CrossValidation { folds } => format!("{folds}-fold stratified cross-validation (pooled)"),
        };
        let _ = writeln!(out, "protocol   : {protocol}");
        let _ = writeln!(
            out,
            "dataset    : {} samples, {}, {} classes",
            self.dataset.size,
            self.dataset.scheme,
            self.dataset.class_names.len()
        );
        let kind = self.classifier.get("kind").and_then(|k| k.as_str()).unwrap_or("?");
        let _ = writeln!(out, "classifier : {kind}");
        if let Some(id) = &self.model_id {
            let _ = writeln!(out, "model id   : {id}");
        }
        let _ = writeln!(out, "accuracy   : {:.4}", self.accuracy);
        if let Some(cv) = &self.cv {
            let _ = writeln!(
                out,
                "cv mean    : {:.4} +/- {:.4} over {} folds",
                cv.mean, cv.std, cv.folds
            );
        }
        if let Some(c) = &self.collapsed {
            let _ = writeln!(out, "collapsed  : {:.4} (client level)", c.accuracy);
        }
        let _ = writeln!(out);

        let width = self
            .confusion
            .class_names
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(5)
            .max(5);
        let _ = writeln!(out, "{:<width$}  {:>7}  {:>7}", "class", "recall", "support");
        for (c, name) in self.confusion.class_names.iter().enumerate() {
            let flag = if self.absent_classes.contains(name) {
                "  (absent)"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "{:<width$}  {:>7.4}  {:>7}{flag}",
                name,
                self.per_class_recall[c],
                self.confusion.row_total(c)
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "confusion (rows = true, columns = predicted)");
        let cell = self
            .confusion
            .counts
            .iter()
            .flatten()
            .map(|c| c.to_string().len())
            .max()
            .unwrap_or(1)
            .max(4);
        let _ = write!(out, "{:<width$}", "");
        for c in 0..self.confusion.n_classes() {
            let _ = write!(out, " {:>cell$}", format!("#{c}"));
        }
        let _ = writeln!(out);
        for (c, row) in self.confusion.counts.iter().enumerate() {
            let _ = write!(out, "{:<width$}", format!("#{c} {}", self.confusion.class_names[c]));
            for v in row {
                let _ = write!(out, " {v:>cell$}");
            }
            let _ = writeln!(out);
        }
        if let Some(curve) = &self.curve {
            let _ = writeln!(out);
            let _ = writeln!(out, "{:>10}  {:>8}  {:>8}", "x", "mean", "std");
            for p in curve {
                let _ = writeln!(out, "{:>10}  {:>8.4}  {:>8.4}", p.x, p.mean, p.std);
            }
        }
        out
    }
}
