//! Hyperparameter search scored by cross-validated accuracy.
//!
//! All trials of one search share a single fold partition so their scores
//! are directly comparable.

use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_kfold, LabeledDataset};
use crate::error::{Error, Result};
use crate::experiments::{
    cross_validate_on_folds, ConfusionMatrix, CurvePoint, CvSummary, DatasetSummary, ExperimentKind, ExperimentReport,
    Protocol,
};
use crate::knn::KnnConfig;
use crate::mlp::MlpConfig;
use crate::model::{ClassifierConfig, MlpSetup};
use crate::par::{self, Exec};
use crate::rng::{self, tags};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Inclusive.
    pub n_layers_range: [usize; 2],
    /// Inclusive.
    pub layer_size_range: [usize; 2],
    pub n_trials: usize,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            n_layers_range: [1, 10],
            layer_size_range: [100, 2000],
            n_trials: 30,
            cv_folds: 5,
            seed: 0,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.n_layers_range;
        if lo == 0 || lo > hi {
            return Err(Error::invalid(format!(
                "n_layers_range [{lo}, {hi}] is empty or starts at 0"
            )));
        }
        let [lo, hi] = self.layer_size_range;
        if lo == 0 || lo > hi {
            return Err(Error::invalid(format!(
                "layer_size_range [{lo}, {hi}] is empty or starts at 0"
            )));
        }
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be at least 1"));
        }
        Ok(())
    }

    pub fn contains(&self, hidden: &[usize]) -> bool {
        let [llo, lhi] = self.n_layers_range;
        let [slo, shi] = self.layer_size_range;
        (llo..=lhi).contains(&hidden.len()) && hidden.iter().all(|s| (slo..=shi).contains(s))
    }

    /// Architecture of trial `i`. Each trial draws from its own stream, so
    /// the first trials of a longer search match a shorter one.
    pub fn sample(&self, trial: usize) -> Vec<usize> {
        let mut r = rng::Rng::seed_from_u64(rng::derive_seed(self.seed, tags::SEARCH));
        r.set_stream(trial as u64);
        let [llo, lhi] = self.n_layers_range;
        let [slo, shi] = self.layer_size_range;
        let layers = r.random_range(llo..=lhi);
        (0..layers).map(|_| r.random_range(slo..=shi)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub params: ClassifierConfig,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Pooled over the folds.
    pub confusion: ConfusionMatrix,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sort_desc(trials: &mut [TrialResult]) {
    // Stable: equal means keep trial order.
    trials.sort_by(|a, b| b.mean_accuracy.total_cmp(&a.mean_accuracy));
}

fn run_trials(
    ds: &LabeledDataset,
    configs: &[ClassifierConfig],
    cv_folds: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<TrialResult>> {
    let folds = stratified_kfold(ds, cv_folds, seed)?;
    let mut trials = par::try_map(exec, configs, |cfg| {
        let out = cross_validate_on_folds(ds, cfg, &folds, exec)?;
        let fold_accuracies: Vec<f64> = out.folds.iter().map(|f| f.report.accuracy).collect();
        Ok::<_, Error>(TrialResult {
            params: cfg.clone(),
            mean_accuracy: mean(&fold_accuracies),
            fold_accuracies,
            confusion: out.report.confusion,
        })
    })?;
    sort_desc(&mut trials);
    Ok(trials)
}

/// Scores every `k` on shared folds; best first, ties to the smaller `k`
/// when `ks` is ascending.
pub fn grid_search_knn(ds: &LabeledDataset, ks: &[usize], cv_folds: usize, seed: u64) -> Result<Vec<TrialResult>> {
    grid_search_knn_with(ds, ks, cv_folds, seed, Exec::default())
}

pub fn grid_search_knn_with(
    ds: &LabeledDataset,
    ks: &[usize],
    cv_folds: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<TrialResult>> {
    if ks.is_empty() {
        return Err(Error::invalid("no k values to search"));
    }
    let folds = stratified_kfold(ds, cv_folds, seed)?;
    let smallest = folds.iter().map(|f| f.train.len()).min().unwrap_or(0);
    if let Some(bad) = ks.iter().find(|&&k| k == 0 || k > smallest) {
        return Err(Error::invalid(format!(
            "k = {bad} invalid: must be in [1, {smallest}] (smallest training fold)"
        )));
    }
    let configs: Vec<_> = ks
        .iter()
        .map(|&k| {
            ClassifierConfig::Knn(KnnConfig {
                k,
                ..Default::default()
            })
        })
        .collect();
    run_trials(ds, &configs, cv_folds, seed, exec)
}

/// Random search over hidden-layer architectures; every other network
/// setting comes from `base`.
pub fn random_search_mlp(ds: &LabeledDataset, space: &SearchSpace, base: &MlpSetup) -> Result<Vec<TrialResult>> {
    random_search_mlp_with(ds, space, base, Exec::default())
}

pub fn random_search_mlp_with(
    ds: &LabeledDataset,
    space: &SearchSpace,
    base: &MlpSetup,
    exec: Exec,
) -> Result<Vec<TrialResult>> {
    space.validate()?;
    let configs: Vec<_> = (0..space.n_trials)
        .map(|i| {
            ClassifierConfig::Mlp(MlpSetup {
                network: MlpConfig {
                    hidden_sizes: space.sample(i),
                    ..base.network.clone()
                },
                validation_fraction: base.validation_fraction,
            })
        })
        .collect();
    run_trials(ds, &configs, space.cv_folds, space.seed, exec)
}

/// Report for a finished search. The headline fields describe the best
/// trial; grid searches also carry the accuracy-versus-k curve.
pub fn search_report(
    ds: &LabeledDataset,
    kind: ExperimentKind,
    trials: &[TrialResult],
    seed: u64,
) -> Result<ExperimentReport> {
    let best = trials.first().ok_or_else(|| Error::invalid("no trials"))?;
    let cv = CvSummary::from_folds(best.fold_accuracies.clone());
    let mut report = ExperimentReport::from_confusion(
        kind,
        Protocol::CrossValidation { folds: cv.folds },
        DatasetSummary::of(ds),
        serde_json::to_value(&best.params)?,
        best.confusion.clone(),
    );
    report.cv = Some(cv);
    report.seed = Some(seed);
    let mut curve: Vec<CurvePoint> = trials
        .iter()
        .filter_map(|t| match &t.params {
            ClassifierConfig::Knn(k) => Some(CurvePoint {
                x: k.k as f64,
                mean: t.mean_accuracy,
                std: CvSummary::from_folds(t.fold_accuracies.clone()).std,
            }),
            ClassifierConfig::Mlp(_) => None,
        })
        .collect();
    if !curve.is_empty() {
        curve.sort_by(|a, b| a.x.total_cmp(&b.x));
        report.curve = Some(curve);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::test_support::random_dataset;
    use crate::experiments::cross_validate;

    #[test]
    fn single_k_gives_single_trial() {
        let ds = random_dataset(&[10, 10], 1);
        let t = grid_search_knn(&ds, &[9], 3, 0).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn grid_best_matches_independent_argmax() {
        let ds = random_dataset(&[30, 30, 30], 2);
        let ks: Vec<usize> = (1..=20).collect();
        let trials = grid_search_knn(&ds, &ks, 5, 11).unwrap();
        assert_eq!(trials.len(), 20);
        let mut best = (0, f64::MIN);
        for &k in &ks {
            let cv = cross_validate(
                &ds,
                &ClassifierConfig::Knn(KnnConfig {
                    k,
                    ..Default::default()
                }),
                5,
                11,
            )
            .unwrap();
            if cv.mean > best.1 {
                best = (k, cv.mean);
            }
        }
        match &trials[0].params {
            ClassifierConfig::Knn(c) => assert_eq!(c.k, best.0),
            _ => unreachable!(),
        }
        for t in &trials {
            assert_eq!(t.mean_accuracy, mean(&t.fold_accuracies));
        }
        assert!(trials.windows(2).all(|w| w[0].mean_accuracy >= w[1].mean_accuracy));
    }

    #[test]
    fn ties_keep_smaller_k_first() {
        let mut manual = vec![
            TrialResult {
                params: ClassifierConfig::Knn(KnnConfig {
                    k: 3,
                    ..Default::default()
                }),
                fold_accuracies: vec![0.5],
                mean_accuracy: 0.5,
                confusion: ConfusionMatrix::new(vec![]),
            },
            TrialResult {
                params: ClassifierConfig::Knn(KnnConfig {
                    k: 7,
                    ..Default::default()
                }),
                fold_accuracies: vec![0.5],
                mean_accuracy: 0.5,
                confusion: ConfusionMatrix::new(vec![]),
            },
        ];
        sort_desc(&mut manual);
        assert!(matches!(&manual[0].params, ClassifierConfig::Knn(c) if c.k == 3));
    }

    #[test]
    fn invalid_k_is_named() {
        let ds = random_dataset(&[5, 5], 4);
        let err = grid_search_knn(&ds, &[1, 99], 2, 0).unwrap_err().to_string();
        assert!(err.contains("99"), "{err}");
        assert!(grid_search_knn(&ds, &[0], 2, 0).is_err());
    }

    #[test]
    fn sampled_architectures_stay_in_space_and_are_stable() {
        let space = SearchSpace {
            seed: 5,
            n_trials: 200,
            ..Default::default()
        };
        let a: Vec<_> = (0..200).map(|i| space.sample(i)).collect();
        let b: Vec<_> = (0..200).map(|i| space.sample(i)).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|h| space.contains(h)));
        let lens: std::collections::BTreeSet<_> = a.iter().map(Vec::len).collect();
        assert!(lens.contains(&1) && lens.contains(&10));
        let other = SearchSpace {
            seed: 6,
            ..space.clone()
        };
        assert_ne!(a[0..5], (0..5).map(|i| other.sample(i)).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn random_search_records_architectures_verbatim() {
        let ds = random_dataset(&[12, 12], 6);
        let space = SearchSpace {
            n_layers_range: [1, 2],
            layer_size_range: [3, 6],
            n_trials: 3,
            cv_folds: 2,
            seed: 9,
        };
        let base = MlpSetup {
            network: MlpConfig {
                max_epochs: 3,
                ..Default::default()
            },
            validation_fraction: 0.0,
        };
        let trials = random_search_mlp_with(&ds, &space, &base, Exec::Sequential).unwrap();
        assert_eq!(trials.len(), 3);
        let mut seen: Vec<Vec<usize>> = trials
            .iter()
            .map(|t| match &t.params {
                ClassifierConfig::Mlp(m) => m.network.hidden_sizes.clone(),
                _ => unreachable!(),
            })
            .collect();
        let mut expected: Vec<_> = (0..3).map(|i| space.sample(i)).collect();
        seen.sort();
        expected.sort();
        assert_eq!(seen, expected);

        let one = SearchSpace { n_trials: 1, ..space };
        let t = random_search_mlp_with(&ds, &one, &base, Exec::Sequential).unwrap();
        assert_eq!(t.len(), 1);
        assert!(space_bad().validate().is_err());
    }

    fn space_bad() -> SearchSpace {
        SearchSpace {
            n_layers_range: [3, 2],
            ..Default::default()
        }
    }
}
