use clientprint::dataset::{default_class_names, train_test_split};
use clientprint::experiments::evaluate;
use clientprint::features::{ModeTag, DEFAULT_IDEAL_REWARD};
use clientprint::ingest::{self, model_file};
use clientprint::synth::{generate, generate_records, GeneratorConfig};
use clientprint::{ClassifierConfig, KnnConfig};

#[test]
fn records_to_report_through_files() {
    let cfg = GeneratorConfig {
        per_class: 40,
        seed: 5,
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let recs = generate_records(&cfg, ModeTag::Default, DEFAULT_IDEAL_REWARD).unwrap();
    let rec_path = dir.path().join("records.jsonl");
    ingest::save_records(&recs, &rec_path).unwrap();

    let loaded = ingest::load_records(&rec_path).unwrap();
    let ds = ingest::records_to_dataset(&loaded, DEFAULT_IDEAL_REWARD, default_class_names(), None, None).unwrap();
    let ds_path = dir.path().join("ds.jsonl");
    ingest::save_dataset(&ds, &ds_path).unwrap();
    let ds = ingest::load_dataset(&ds_path).unwrap();
    assert_eq!(ds.labels, generate(&cfg, ModeTag::Default).unwrap().labels);

    let (train, test) = train_test_split(&ds, 0.25, 5).unwrap();
    let model = ClassifierConfig::Knn(KnnConfig::default()).fit(&train).unwrap();
    let model_path = dir.path().join("model.json");
    model_file::save_model(&model, &model_path).unwrap();
    let reloaded = model_file::load_model(&model_path).unwrap();

    let direct = evaluate(&model, &test).unwrap();
    let via_file = evaluate(&reloaded, &test).unwrap();
    assert_eq!(direct, via_file);
    assert_eq!(direct.confusion.total(), test.len() as u64);
    assert!(direct.accuracy > 1.0 / 6.0, "accuracy {}", direct.accuracy);
}

#[test]
fn shipped_profiles_match_the_builtin_ones() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default_profiles.toml");
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(
        GeneratorConfig::from_toml_str(&text).unwrap(),
        GeneratorConfig::default()
    );
}
