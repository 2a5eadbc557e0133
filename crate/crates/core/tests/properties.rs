use clientprint::dataset::{merge_equal_parts, LabelScheme};
use clientprint::experiments::ConfusionMatrix;
use clientprint::features::{FeatureVector, ModeTag, FEATURE_DIM};
use clientprint::ingest::{read_dataset, write_dataset};
use clientprint::mlp::mlp_init;
use clientprint::{ClassifierConfig, KnnConfig, LabeledDataset, MlpConfig, Scaler};
use proptest::prelude::*;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|c| format!("c{c}")).collect()
}

fn arb_dataset(max_classes: usize, max_per_class: usize) -> impl Strategy<Value = LabeledDataset> {
    (2..=max_classes)
        .prop_flat_map(move |k| proptest::collection::vec(1..=max_per_class, k))
        .prop_flat_map(|counts| {
            let n: usize = counts.iter().sum();
            (
                Just(counts),
                proptest::collection::vec(proptest::array::uniform7(0.0f64..1.0), n),
            )
        })
        .prop_map(|(counts, xs)| {
            let labels: Vec<usize> = counts
                .iter()
                .enumerate()
                .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
                .collect();
            let n = labels.len();
            LabeledDataset::new(
                xs.into_iter().map(FeatureVector).collect(),
                labels,
                vec![ModeTag::Default; n],
                LabelScheme::Client,
                names(counts.len()),
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn confusion_accounting(pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..200)) {
        let (truth, pred): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
        let cm = ConfusionMatrix::from_pairs(names(5), &truth, &pred);
        prop_assert_eq!(cm.total(), pairs.len() as u64);
        for c in 0..5 {
            prop_assert_eq!(cm.row_total(c), truth.iter().filter(|&&t| t == c).count() as u64);
        }
        let hits = pairs.iter().filter(|(t, p)| t == p).count();
        prop_assert!((cm.accuracy() - hits as f64 / pairs.len() as f64).abs() < 1e-15);

        let coarse = cm.collapse(&[0, 0, 1, 1, 2], names(3)).unwrap();
        prop_assert_eq!(coarse.total(), cm.total());
        prop_assert!(coarse.accuracy() >= cm.accuracy());
    }

    #[test]
    fn scaler_inverse_round_trips(ds in arb_dataset(3, 20)) {
        let s = Scaler::fit(&ds.vectors).unwrap();
        for v in &ds.vectors {
            let back = s.inverse(&s.transform(v.as_slice()).unwrap()).unwrap();
            for (a, b) in back.iter().zip(v.as_slice()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dataset_file_round_trips(ds in arb_dataset(4, 15)) {
        let mut bytes = Vec::new();
        write_dataset(&ds, &mut bytes).unwrap();
        let back = read_dataset(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &ds);
        let mut again = Vec::new();
        write_dataset(&back, &mut again).unwrap();
        prop_assert_eq!(bytes, again);
    }

    #[test]
    fn merge_takes_equal_shares(a in arb_dataset(3, 20), seed in any::<u64>()) {
        let b = LabeledDataset { modes: vec![ModeTag::AllSubnets; a.len()], ..a.clone() };
        let b = b.subset(&(0..b.len()).step_by(2).collect::<Vec<_>>());
        prop_assume!(b.class_counts().iter().all(|&n| n > 0));
        let m = merge_equal_parts(&a, &b, seed).unwrap();
        for c in 0..a.n_classes() {
            let from = |mode| m.labels.iter().zip(&m.modes).filter(|(&l, &md)| l == c && md == mode).count();
            let want = a.class_counts()[c].min(b.class_counts()[c]);
            prop_assert_eq!(from(ModeTag::Default), want);
            prop_assert_eq!(from(ModeTag::AllSubnets), want);
        }
    }

    #[test]
    fn knn_probabilities_are_vote_shares(ds in arb_dataset(4, 12), k in 1usize..6, q in proptest::array::uniform7(0.0f64..1.0)) {
        prop_assume!(ds.len() >= k);
        let m = ClassifierConfig::Knn(KnnConfig { k, ..Default::default() }).fit(&ds).unwrap();
        let (best, probs) = m.predict(&FeatureVector(q)).unwrap();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for p in &probs {
            prop_assert!((p * k as f64 - (p * k as f64).round()).abs() < 1e-9);
        }
        prop_assert!(probs.iter().all(|&p| p <= probs[best]));
    }

    #[test]
    fn mlp_outputs_are_distributions(seed in any::<u64>(), x in proptest::array::uniform7(-3.0f64..3.0)) {
        let cfg = MlpConfig { hidden_sizes: vec![9, 5], seed, ..Default::default() };
        let m = mlp_init(&cfg, FEATURE_DIM, names(6)).unwrap();
        let p = m.forward(ndarray::Array2::from_shape_vec((1, FEATURE_DIM), x.to_vec()).unwrap().view()).unwrap();
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.sum() - 1.0).abs() < 1e-12);
    }
}
