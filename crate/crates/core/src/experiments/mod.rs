//! Evaluation protocols.
//!
//! Every protocol refits its scaler inside the training portion it is given,
//! so no test row ever influences standardization. Cross-validated reports
//! pool the confusion matrices of all folds: `accuracy` is the pooled
//! trace/total, while the per-fold mean and standard deviation are kept in
//! [`CvSummary`].

pub mod metrics;
pub mod plot;
pub mod report;

use std::collections::BTreeSet;

pub use metrics::ConfusionMatrix;
pub use report::{CollapsedSummary, CurvePoint, CvSummary, DatasetSummary, ExperimentKind, ExperimentReport, Protocol};

use crate::dataset::{
    client_collapse_map, merge_equal_parts, relabel_twelve_class, stratified_kfold, subsample_balanced,
    train_test_split, Fold, LabeledDataset,
};
use crate::error::{Error, Result};
use crate::knn::KnnConfig;
use crate::model::{Classifier, ClassifierConfig, Trainer};
use crate::par::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolOptions {
    pub cv_folds: usize,
    /// Held-out share used by the protocols that need a test split.
    pub test_fraction: f64,
    pub exec: Exec,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        ProtocolOptions {
            cv_folds: 5,
            test_fraction: 0.2,
            exec: Exec::default(),
        }
    }
}

/// Scores `model` on `test`.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, test: &LabeledDataset) -> Result<ExperimentReport> {
    evaluate_with(model, test, Exec::default())
}

pub fn evaluate_with<C: Classifier + ?Sized>(model: &C, test: &LabeledDataset, exec: Exec) -> Result<ExperimentReport> {
    if model.class_names() != test.class_names.as_slice() {
        return Err(Error::ClassMismatch(format!(
            "model classes {:?} vs test classes {:?}",
            model.class_names(),
            test.class_names
        )));
    }
    let predicted: Vec<usize> = model
        .predict_batch_with(&test.vectors, exec)?
        .into_iter()
        .map(|(c, _)| c)
        .collect();
    let confusion = ConfusionMatrix::from_pairs(test.class_names.clone(), &test.labels, &predicted);
    Ok(ExperimentReport::from_confusion(
        ExperimentKind::Evaluation,
        Protocol::HeldOut,
        DatasetSummary::of(test),
        model.describe(),
        confusion,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    /// Mean of the per-fold accuracies.
    pub mean: f64,
    pub std: f64,
    pub folds: Vec<FoldOutcome>,
    /// Pooled report over all folds.
    pub report: ExperimentReport,
}

/// Stratified k-fold cross-validation with a fresh model per fold.
pub fn cross_validate<T: Trainer>(ds: &LabeledDataset, trainer: &T, k: usize, seed: u64) -> Result<CvOutcome> {
    cross_validate_with(ds, trainer, k, seed, Exec::default())
}

pub fn cross_validate_with<T: Trainer>(
    ds: &LabeledDataset,
    trainer: &T,
    k: usize,
    seed: u64,
    exec: Exec,
) -> Result<CvOutcome> {
    let folds = stratified_kfold(ds, k, seed)?;
    let mut out = cross_validate_on_folds(ds, trainer, &folds, exec)?;
    out.report.seed = Some(seed);
    Ok(out)
}

/// Cross-validation over caller-supplied folds; folds run through `exec`
/// and are assembled in fold order.
pub fn cross_validate_on_folds<T: Trainer>(
    ds: &LabeledDataset,
    trainer: &T,
    folds: &[Fold],
    exec: Exec,
) -> Result<CvOutcome> {
    if folds.is_empty() {
        return Err(Error::invalid("no folds"));
    }
    let outcomes = par::try_map(exec, folds, |fold| {
        let model = trainer.fit(&ds.subset(&fold.train))?;
        let report = evaluate_with(&model, &ds.subset(&fold.test), Exec::Sequential)?;
        Ok::<_, Error>(FoldOutcome {
            train: fold.train.clone(),
            test: fold.test.clone(),
            report,
        })
    })?;

    let mut pooled = ConfusionMatrix::new(ds.class_names.clone());
    for o in &outcomes {
        pooled.add(&o.report.confusion)?;
    }
    let cv = CvSummary::from_folds(outcomes.iter().map(|o| o.report.accuracy).collect());
    let mut report = ExperimentReport::from_confusion(
        ExperimentKind::CrossValidation,
        Protocol::CrossValidation { folds: folds.len() },
        DatasetSummary::of(ds),
        trainer.describe(),
        pooled,
    );
    let (mean, std) = (cv.mean, cv.std);
    report.cv = Some(cv);
    Ok(CvOutcome {
        mean,
        std,
        folds: outcomes,
        report,
    })
}

fn check_unique<T: Ord + Copy + std::fmt::Debug>(xs: &[T], what: &str) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::invalid(format!("{what} list is empty")));
    }
    let set: BTreeSet<T> = xs.iter().copied().collect();
    if set.len() != xs.len() {
        return Err(Error::invalid(format!("{what} list has duplicates: {xs:?}")));
    }
    Ok(())
}

/// Picks the point with the highest mean (earliest on ties) as headline.
fn sweep_report(
    kind: ExperimentKind,
    points: Vec<(f64, CvOutcome)>,
    ds: &LabeledDataset,
    seed: u64,
) -> ExperimentReport {
    let curve: Vec<CurvePoint> = points
        .iter()
        .map(|(x, o)| CurvePoint {
            x: *x,
            mean: o.mean,
            std: o.std,
        })
        .collect();
    let best = points
        .iter()
        .enumerate()
        .fold(0, |b, (i, (_, o))| if o.mean > points[b].1.mean { i } else { b });
    let mut report = points[best].1.report.clone();
    report.kind = kind;
    report.dataset = DatasetSummary::of(ds);
    report.curve = Some(curve);
    report.seed = Some(seed);
    report
}

/// Cross-validated KNN accuracy for every `k` on shared folds. The headline
/// fields describe the best `k`.
pub fn k_sweep(ds: &LabeledDataset, ks: &[usize], cv_k: usize, seed: u64) -> Result<ExperimentReport> {
    k_sweep_with(ds, ks, cv_k, seed, Exec::default())
}

pub fn k_sweep_with(ds: &LabeledDataset, ks: &[usize], cv_k: usize, seed: u64, exec: Exec) -> Result<ExperimentReport> {
    check_unique(ks, "k")?;
    let folds = stratified_kfold(ds, cv_k, seed)?;
    let points = par::try_map(exec, ks, |&k| {
        let cfg = ClassifierConfig::Knn(KnnConfig {
            k,
            ..Default::default()
        });
        let mut o = cross_validate_on_folds(ds, &cfg, &folds, exec)?;
        o.report.seed = Some(seed);
        Ok::<_, Error>((k as f64, o))
    })?;
    Ok(sweep_report(ExperimentKind::KSweep, points, ds, seed))
}

/// Learning curve: for each per-class size, balanced subsample then CV. The
/// curve's x axis is the total dataset size.
pub fn size_sweep<T: Trainer>(
    ds: &LabeledDataset,
    per_class_sizes: &[usize],
    trainer: &T,
    cv_k: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    size_sweep_with(ds, per_class_sizes, trainer, cv_k, seed, Exec::default())
}

pub fn size_sweep_with<T: Trainer>(
    ds: &LabeledDataset,
    per_class_sizes: &[usize],
    trainer: &T,
    cv_k: usize,
    seed: u64,
    exec: Exec,
) -> Result<ExperimentReport> {
    check_unique(per_class_sizes, "size")?;
    let points = par::try_map(exec, per_class_sizes, |&size| {
        let sub = subsample_balanced(ds, size, seed)?;
        let o = cross_validate_with(&sub, trainer, cv_k, seed, exec)?;
        Ok::<_, Error>(((size * ds.n_classes()) as f64, o))
    })?;
    Ok(sweep_report(ExperimentKind::SizeSweep, points, ds, seed))
}

/// One model trained on `train`, scored on a same-mode and an other-mode
/// test set.
pub fn mode_transfer(
    train: &LabeledDataset,
    test_same: &LabeledDataset,
    test_other: &LabeledDataset,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<(ExperimentReport, ExperimentReport)> {
    let model = config.fit(train)?;
    let id = crate::ingest::model_file::model_id(&model);
    let mut same = evaluate(&model, test_same)?;
    let mut other = evaluate(&model, test_other)?;
    for (r, kind) in [
        (&mut same, ExperimentKind::ModeTransferSame),
        (&mut other, ExperimentKind::ModeTransferOther),
    ] {
        r.kind = kind;
        r.model_id = Some(id.clone());
        r.seed = Some(seed);
    }
    Ok((same, other))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedReports {
    /// Cross-validation on the equal-parts merged training data.
    pub merged_cv: ExperimentReport,
    pub default_test: ExperimentReport,
    pub all_subnets_test: ExperimentReport,
}

/// Splits each mode's data into train/test, merges the training parts in
/// equal shares, cross-validates on the merge, then trains on the full merge
/// and scores each mode's held-out part.
pub fn merged_training(
    ds_default: &LabeledDataset,
    ds_all_subnets: &LabeledDataset,
    config: &ClassifierConfig,
    seed: u64,
    opts: &ProtocolOptions,
) -> Result<MergedReports> {
    let (train_d, test_d) = train_test_split(ds_default, opts.test_fraction, seed)?;
    let (train_a, test_a) = train_test_split(ds_all_subnets, opts.test_fraction, seed)?;
    let merged = merge_equal_parts(&train_d, &train_a, seed)?;

    let mut merged_cv = cross_validate_with(&merged, config, opts.cv_folds, seed, opts.exec)?.report;
    merged_cv.kind = ExperimentKind::MergedCrossValidation;

    let model = config.fit(&merged)?;
    let id = crate::ingest::model_file::model_id(&model);
    let mut default_test = evaluate_with(&model, &test_d, opts.exec)?;
    let mut all_subnets_test = evaluate_with(&model, &test_a, opts.exec)?;
    for (r, kind) in [
        (&mut default_test, ExperimentKind::MergedDefaultTest),
        (&mut all_subnets_test, ExperimentKind::MergedAllSubnetsTest),
    ] {
        r.kind = kind;
        r.model_id = Some(id.clone());
        r.seed = Some(seed);
    }
    Ok(MergedReports {
        merged_cv,
        default_test,
        all_subnets_test,
    })
}

/// Client-by-mode cross-validation. The report also carries the client-level
/// view obtained by summing each client's mode rows and columns.
pub fn twelve_class_experiment(
    ds_default: &LabeledDataset,
    ds_all_subnets: &LabeledDataset,
    config: &ClassifierConfig,
    seed: u64,
    opts: &ProtocolOptions,
) -> Result<ExperimentReport> {
    let relabeled = relabel_twelve_class(ds_default, ds_all_subnets)?;
    let mut report = cross_validate_with(&relabeled, config, opts.cv_folds, seed, opts.exec)?.report;
    report.kind = ExperimentKind::TwelveClass;
    let (clients, map) = client_collapse_map(&relabeled.class_names)?;
    let confusion = report.confusion.collapse(&map, clients)?;
    let (per_class_recall, _) = report::recall_with_absent(&confusion);
    report.collapsed = Some(CollapsedSummary {
        accuracy: confusion.accuracy(),
        per_class_recall,
        confusion,
    });
    Ok(report)
}
