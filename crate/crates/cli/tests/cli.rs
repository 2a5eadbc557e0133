use std::path::{Path, PathBuf};
use std::process::Command;

use clientprint::experiments::{self, ExperimentReport};
use clientprint::features::{ModeTag, DEFAULT_IDEAL_REWARD};
use clientprint::ingest::{self, model_file};
use clientprint::model::MlpSetup;
use clientprint::synth::{generate, GeneratorConfig};
use clientprint::{ClassifierConfig, KnnConfig, MlpConfig};
use clientprint_beacon::mock::{self, MockFixture};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clientprint"))
}

fn run(dir: &Path, args: &[&str]) -> i32 {
    let out = bin().current_dir(dir).args(args).output().expect("binary runs");
    out.status.code().expect("exit code")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = bin().current_dir(dir).args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

fn synth_cfg(per_class: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        per_class,
        seed,
        ..Default::default()
    }
}

#[test]
fn synth_is_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    run_ok(p, &["synth", "--per-class", "100", "--seed", "1", "--out", "a.jsonl"]);
    run_ok(p, &["synth", "--per-class", "100", "--seed", "1", "--out", "b.jsonl"]);
    assert_eq!(read(p, "a.jsonl"), read(p, "b.jsonl"));
    run_ok(p, &["synth", "--per-class", "100", "--seed", "2", "--out", "c.jsonl"]);
    assert_ne!(read(p, "a.jsonl"), read(p, "c.jsonl"));

    let lib = generate(&synth_cfg(100, 1), ModeTag::Default).unwrap();
    assert_eq!(ingest::load_dataset(p.join("a.jsonl")).unwrap(), lib);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    assert_eq!(run(p, &["no-such-command"]), 1);
    assert_eq!(run(p, &["train", "--data", "x.jsonl"]), 1, "missing --out");
    assert_eq!(run(p, &["synth", "--out", "a.jsonl", "--mode", "sideways"]), 1);
    assert_eq!(run(p, &["--help"]), 0);
    assert_eq!(
        run(p, &["eval", "--model", "missing.json", "--data", "missing.jsonl"]),
        2
    );

    std::fs::write(p.join("bad.jsonl"), "{\"format\": \"clientprint-dataset\"\n").unwrap();
    assert_eq!(run(p, &["train", "--data", "bad.jsonl", "--out", "m.json"]), 2);

    run_ok(p, &["synth", "--per-class", "30", "--seed", "3", "--out", "a.jsonl"]);
    assert_eq!(
        run(p, &["sweep-k", "--data", "a.jsonl", "--ks", "1,1"]),
        2,
        "duplicate k"
    );
    let diverge = [
        "train",
        "--data",
        "a.jsonl",
        "--out",
        "m.json",
        "--classifier",
        "mlp",
        "--hidden",
        "8",
        "--learning-rate",
        "1e300",
        "--max-epochs",
        "3",
    ];
    assert_eq!(run(p, &diverge), 3);
    assert!(!p.join("m.json").exists());
}

#[test]
fn train_then_eval_matches_library() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    run_ok(
        p,
        &["synth", "--per-class", "120", "--seed", "11", "--out", "train.jsonl"],
    );
    run_ok(
        p,
        &["synth", "--per-class", "40", "--seed", "12", "--out", "test.jsonl"],
    );
    let train = generate(&synth_cfg(120, 11), ModeTag::Default).unwrap();
    let test = generate(&synth_cfg(40, 12), ModeTag::Default).unwrap();

    let cases: [(&[&str], ClassifierConfig); 2] = [
        (
            &["--k", "7"],
            ClassifierConfig::Knn(KnnConfig {
                k: 7,
                ..Default::default()
            }),
        ),
        (
            &[
                "--classifier",
                "mlp",
                "--hidden",
                "16,12",
                "--max-epochs",
                "8",
                "--seed",
                "5",
            ],
            ClassifierConfig::Mlp(MlpSetup {
                network: MlpConfig {
                    hidden_sizes: vec![16, 12],
                    max_epochs: 8,
                    seed: 5,
                    ..Default::default()
                },
                validation_fraction: 0.1,
            }),
        ),
    ];
    for (flags, cfg) in cases {
        let mut args = vec!["train", "--data", "train.jsonl", "--out", "model.json"];
        args.extend_from_slice(flags);
        let id = run_ok(p, &args);

        let model = cfg.fit(&train).unwrap();
        assert_eq!(id.trim(), model_file::model_id(&model));
        let mut bytes = Vec::new();
        model_file::write_model(&model, &mut bytes).unwrap();
        assert_eq!(read(p, "model.json"), bytes);

        run_ok(
            p,
            &[
                "eval",
                "--model",
                "model.json",
                "--data",
                "test.jsonl",
                "--report",
                "r.json",
                "--quiet",
            ],
        );
        let mut expected = experiments::evaluate(&model, &test).unwrap();
        expected.model_id = Some(model_file::model_id(&model));
        assert_eq!(String::from_utf8(read(p, "r.json")).unwrap(), expected.to_json());
    }
}

#[test]
fn config_file_supplies_flags() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(
        p.join("run.toml"),
        "seed = 4\nper_class = 60\n[sweep-k]\nks = [1, 5]\nfolds = 3\nquiet = true\n",
    )
    .unwrap();
    run_ok(p, &["--config", "run.toml", "synth", "--out", "a.jsonl"]);
    assert_eq!(
        ingest::load_dataset(p.join("a.jsonl")).unwrap(),
        generate(&synth_cfg(60, 4), ModeTag::Default).unwrap()
    );
    // The command line wins over the file.
    run_ok(p, &["synth", "--config", "run.toml", "--seed", "9", "--out", "b.jsonl"]);
    assert_eq!(
        ingest::load_dataset(p.join("b.jsonl")).unwrap(),
        generate(&synth_cfg(60, 9), ModeTag::Default).unwrap()
    );

    let stdout = run_ok(
        p,
        &[
            "sweep-k", "--config", "run.toml", "--data", "a.jsonl", "--report", "k.json", "--svg", "k.svg",
        ],
    );
    assert!(stdout.is_empty());
    let ds = ingest::load_dataset(p.join("a.jsonl")).unwrap();
    let expected = experiments::k_sweep(&ds, &[1, 5], 3, 4).unwrap();
    let got: ExperimentReport = serde_json::from_slice(&read(p, "k.json")).unwrap();
    assert_eq!(got, expected);
    assert!(String::from_utf8(read(p, "k.svg")).unwrap().starts_with("<svg"));

    // A list given on the command line replaces the file's list.
    run_ok(
        p,
        &[
            "sweep-k", "--config", "run.toml", "--data", "a.jsonl", "--ks", "3", "--report", "k3.json",
        ],
    );
    let got: ExperimentReport = serde_json::from_slice(&read(p, "k3.json")).unwrap();
    assert_eq!(got.curve.unwrap().len(), 1);

    std::fs::write(p.join("bad.toml"), "[synth]\nnot_a_flag = 1\n").unwrap();
    assert_eq!(run(p, &["synth", "--config", "bad.toml", "--out", "c.jsonl"]), 1);
}

#[test]
fn experiment_commands_are_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    run_ok(p, &["synth", "--per-class", "80", "--seed", "1", "--out", "d.jsonl"]);
    run_ok(
        p,
        &[
            "synth",
            "--per-class",
            "80",
            "--seed",
            "1",
            "--mode",
            "all_subnets",
            "--out",
            "a.jsonl",
        ],
    );
    run_ok(p, &["synth", "--per-class", "30", "--seed", "2", "--out", "dt.jsonl"]);
    run_ok(
        p,
        &[
            "synth",
            "--per-class",
            "30",
            "--seed",
            "2",
            "--mode",
            "all_subnets",
            "--out",
            "at.jsonl",
        ],
    );

    let commands: [&[&str]; 5] = [
        &[
            "mode-transfer",
            "--train",
            "d.jsonl",
            "--test-same",
            "dt.jsonl",
            "--test-other",
            "at.jsonl",
        ],
        &[
            "merge-train",
            "--default",
            "d.jsonl",
            "--all-subnets",
            "a.jsonl",
            "--folds",
            "3",
        ],
        &[
            "twelve-class",
            "--default",
            "d.jsonl",
            "--all-subnets",
            "a.jsonl",
            "--folds",
            "3",
        ],
        &["sweep-size", "--data", "d.jsonl", "--sizes", "20,40", "--folds", "3"],
        &[
            "search-mlp",
            "--data",
            "d.jsonl",
            "--trials",
            "2",
            "--max-layers",
            "2",
            "--min-size",
            "4",
            "--max-size",
            "12",
            "--max-epochs",
            "3",
            "--folds",
            "3",
            "--classifier",
            "mlp",
        ],
    ];
    for args in commands {
        let mut reports = Vec::new();
        for name in ["r1.json", "r2.json"] {
            let mut a = args.to_vec();
            a.extend_from_slice(&["--seed", "6", "--quiet", "--report", name, "--table", "t.txt"]);
            run_ok(p, &a);
            reports.push(read(p, name));
        }
        assert_eq!(reports[0], reports[1], "{}", args[0]);
        assert!(!read(p, "t.txt").is_empty());
    }

    // Keyed reports for multi-part protocols.
    run_ok(
        p,
        &[
            "merge-train",
            "--default",
            "d.jsonl",
            "--all-subnets",
            "a.jsonl",
            "--report",
            "m.json",
            "--quiet",
        ],
    );
    let v: serde_json::Value = serde_json::from_slice(&read(p, "m.json")).unwrap();
    for key in ["merged_cv", "default_test", "all_subnets_test"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }

    run_ok(p, &["train", "--data", "d.jsonl", "--out", "m.model"]);
    run_ok(
        p,
        &[
            "eval",
            "--model",
            "m.model",
            "--data",
            "dt.jsonl",
            "--report",
            "plain.json",
            "--quiet",
        ],
    );
    run_ok(
        p,
        &[
            "eval",
            "--model",
            "m.model",
            "--data",
            "dt.jsonl",
            "--report",
            "stamped.json",
            "--quiet",
            "--stamp",
        ],
    );
    let plain: ExperimentReport = serde_json::from_slice(&read(p, "plain.json")).unwrap();
    let stamped: ExperimentReport = serde_json::from_slice(&read(p, "stamped.json")).unwrap();
    assert!(plain.timestamp_unix.is_none());
    assert!(stamped.timestamp_unix.is_some());
    assert_eq!(
        ExperimentReport {
            timestamp_unix: None,
            ..stamped
        },
        plain
    );
}

#[test]
fn extract_recovers_the_synthetic_dataset() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    run_ok(
        p,
        &[
            "synth",
            "--per-class",
            "20",
            "--seed",
            "8",
            "--records",
            "--out",
            "r.jsonl",
        ],
    );
    run_ok(p, &["extract", "--records", "r.jsonl", "--out", "ds.jsonl"]);
    let ds = ingest::load_dataset(p.join("ds.jsonl")).unwrap();
    let direct = generate(&synth_cfg(20, 8), ModeTag::Default).unwrap();
    assert_eq!(ds.labels, direct.labels);
    assert_eq!(ds.class_names, direct.class_names);

    run_ok(
        p,
        &[
            "extract",
            "--records",
            "r.jsonl",
            "--out",
            "t.jsonl",
            "--label",
            "teku",
            "--mode",
            "all_subnets",
        ],
    );
    let ds = ingest::load_dataset(p.join("t.jsonl")).unwrap();
    assert!(ds.labels.iter().all(|&l| l == 5));
    assert!(ds.modes.iter().all(|&m| m == ModeTag::AllSubnets));

    assert_eq!(
        run(
            p,
            &[
                "extract",
                "--records",
                "r.jsonl",
                "--out",
                "u.jsonl",
                "--label",
                "unknown"
            ]
        ),
        2
    );
}

#[test]
fn classify_matches_model_predictions() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    run_ok(
        p,
        &["synth", "--per-class", "50", "--seed", "1", "--out", "train.jsonl"],
    );
    run_ok(p, &["train", "--data", "train.jsonl", "--out", "m.json"]);
    run_ok(
        p,
        &[
            "synth",
            "--per-class",
            "5",
            "--seed",
            "2",
            "--records",
            "--out",
            "r.jsonl",
        ],
    );
    let out = run_ok(p, &["classify", "--model", "m.json", "--records", "r.jsonl"]);

    let model = model_file::load_model(p.join("m.json")).unwrap();
    let recs = ingest::load_records(p.join("r.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), recs.len());
    for (r, line) in recs.iter().zip(&lines) {
        let v = clientprint::extract_features(r, DEFAULT_IDEAL_REWARD).unwrap();
        let (best, _) = model.predict(&v).unwrap();
        assert_eq!(line["predicted"], model.class_names()[best].as_str());
    }
}

fn with_mock<T>(f: impl FnOnce(String) -> T) -> T {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let handle = rt
        .block_on(mock::spawn(MockFixture::canned(), "127.0.0.1:0".parse().unwrap()))
        .unwrap();
    let url = handle.base_url();
    // The CLI runs its own runtime on this thread; the mock keeps serving on
    // the workers of `rt`.
    let out = f(url);
    rt.block_on(handle.stop());
    out
}

#[test]
fn fetch_writes_records_and_reports_failures() {
    let d = tempfile::tempdir().unwrap();
    let p: PathBuf = d.path().into();
    with_mock(|url| {
        let ok = [
            "fetch",
            "--base-url",
            &url,
            "--start",
            "10",
            "--end",
            "12",
            "--out",
            "ok.jsonl",
            "--backoff-ms",
            "5",
        ];
        run_ok(&p, &ok);
        let recs = ingest::load_records(p.join("ok.jsonl")).unwrap();
        assert_eq!(
            recs,
            mock::fixture_records()
                .into_iter()
                .map(|mut r| {
                    r.label = None;
                    r.mode = None;
                    r
                })
                .collect::<Vec<_>>()
        );

        let partial = [
            "fetch",
            "--base-url",
            &url,
            "--start",
            "10",
            "--end",
            "15",
            "--out",
            "p.jsonl",
            "--backoff-ms",
            "5",
        ];
        assert_eq!(run(&p, &partial), 2);
        let slots: Vec<u64> = ingest::load_records(p.join("p.jsonl"))
            .unwrap()
            .iter()
            .map(|r| r.slot)
            .collect();
        assert_eq!(slots, [10, 12, 14]);

        assert_eq!(
            run(
                &p,
                &["fetch", "--base-url", &url, "--start", "5", "--end", "4", "--out", "x"]
            ),
            1
        );
    });
}
