//! Command-line pipeline and HTTP classification service.
//!
//! Every subcommand maps onto one library operation and reads and writes
//! the library's file formats. Exit codes: 0 success, 1 usage error, 2 data
//! error, 3 numeric failure.

pub mod config;
pub mod service;

use std::ffi::OsString;
use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, FromArgMatches, Parser, Subcommand, ValueEnum};
use clientprint::dataset::default_class_names;
use clientprint::experiments::plot::curve_svg;
use clientprint::experiments::{self, ExperimentKind, ExperimentReport, ProtocolOptions};
use clientprint::features::{Gwei, ModeTag, DEFAULT_IDEAL_REWARD};
use clientprint::ingest::{self, model_file};
use clientprint::mlp::MlpConfig;
use clientprint::model::MlpSetup;
use clientprint::synth::{self, GeneratorConfig, SEPARATION_HIGH};
use clientprint::tuning::{self, SearchSpace};
use clientprint::{ClassifierConfig, KnnConfig, LabeledDataset};
use clientprint_beacon::{BeaconSourceConfig, DEFAULT_PATH_TEMPLATE};

/// Bad flags or config; exits with 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A numeric failure outside the library's own error type; exits with 3.
#[derive(Debug)]
pub struct NumericError(pub String);

impl fmt::Display for NumericError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericError {}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "clientprint",
    version,
    about = "Consensus client fingerprinting from block rewards"
)]
pub struct Cli {
    /// TOML file supplying flag values (see the README for the format).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic dataset (or raw records).
    Synth(SynthArgs),
    /// Turn raw reward records into a labeled dataset.
    Extract(ExtractArgs),
    /// Download reward records from a beacon node.
    Fetch(FetchArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Score a model on a labeled dataset.
    Eval(EvalArgs),
    /// Cross-validated KNN accuracy for a list of k.
    SweepK(SweepKArgs),
    /// Learning curve over per-class training sizes.
    SweepSize(SweepSizeArgs),
    /// Random search over MLP architectures.
    SearchMlp(SearchMlpArgs),
    /// Train on one mode, test on the same and another mode.
    ModeTransfer(ModeTransferArgs),
    /// Equal-parts training on default and all-subnets data.
    MergeTrain(TwoModeArgs),
    /// Client-by-mode classification with a client-level summary.
    TwelveClass(TwoModeArgs),
    /// Classify raw reward records with a model.
    Classify(ClassifyArgs),
    /// Serve a model over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Knn,
    Mlp,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifierArgs {
    #[arg(long, value_enum, default_value_t = Kind::Knn)]
    pub classifier: Kind,
    /// Neighbors for KNN.
    #[arg(long, default_value_t = 9)]
    pub k: usize,
    /// MLP hidden layer sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [391, 870])]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    /// Share of the training data held back for early stopping.
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
}

impl ClassifierArgs {
    fn mlp_setup(&self, seed: u64) -> MlpSetup {
        MlpSetup {
            network: MlpConfig {
                hidden_sizes: self.hidden.clone(),
                learning_rate: self.learning_rate,
                batch_size: self.batch_size,
                max_epochs: self.max_epochs,
                patience: self.patience,
                l2: self.l2,
                seed,
                ..Default::default()
            },
            validation_fraction: self.validation_fraction,
        }
    }

    pub fn to_config(&self, seed: u64) -> ClassifierConfig {
        match self.classifier {
            Kind::Knn => ClassifierConfig::Knn(KnnConfig {
                k: self.k,
                ..Default::default()
            }),
            Kind::Mlp => ClassifierConfig::Mlp(self.mlp_setup(seed)),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Write the JSON report here.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Write the text table here as well as to stdout.
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,
    /// Record the wall-clock time in reports (breaks byte-identical reruns).
    #[arg(long)]
    pub stamp: bool,
    /// Do not print the table.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Samples per client; overrides the profile file.
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Overrides the profile file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// A number, or `high` for the well-separated preset.
    #[arg(long, value_parser = parse_separation)]
    pub separation: Option<f64>,
    #[arg(long, value_parser = parse_mode, default_value = "default")]
    pub mode: ModeTag,
    /// Generator config in TOML; the built-in profiles when absent.
    #[arg(long, value_name = "FILE")]
    pub profiles: Option<PathBuf>,
    /// Write raw reward records (JSON lines) instead of a feature dataset.
    #[arg(long)]
    pub records: bool,
    #[arg(long, default_value_t = DEFAULT_IDEAL_REWARD.0)]
    pub ideal_reward: u64,
    /// Also write the effective generator config here.
    #[arg(long, value_name = "FILE")]
    pub dump_config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    /// Reward records, one JSON object per line.
    #[arg(long, value_name = "FILE")]
    pub records: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Client label for every record; otherwise each record's own label.
    #[arg(long)]
    pub label: Option<String>,
    /// Mode for every record; otherwise each record's own, else default.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<ModeTag>,
    /// Class list; the six known clients when absent.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    #[arg(long, default_value_t = DEFAULT_IDEAL_REWARD.0)]
    pub ideal_reward: u64,
}

#[derive(Debug, Clone, Args)]
pub struct FetchArgs {
    #[arg(long)]
    pub base_url: String,
    #[arg(long)]
    pub start: u64,
    /// Inclusive.
    #[arg(long)]
    pub end: u64,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, default_value = DEFAULT_PATH_TEMPLATE)]
    pub path_template: String,
    /// Requests per second.
    #[arg(long, default_value_t = 10.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    #[arg(long, default_value_t = 10.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 200)]
    pub backoff_ms: u64,
    #[arg(long)]
    pub token: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[command(flatten)]
    pub output: ReportArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepKArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 3, 5, 7, 9, 11, 14, 17, 20])]
    pub ks: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: ReportArgs,
    /// Plot the curve as SVG.
    #[arg(long, value_name = "FILE")]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepSizeArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Per-class training sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[command(flatten)]
    pub output: ReportArgs,
    #[arg(long, value_name = "FILE")]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SearchMlpArgs {
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub min_layers: usize,
    #[arg(long, default_value_t = 10)]
    pub max_layers: usize,
    #[arg(long, default_value_t = 100)]
    pub min_size: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_size: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write every trial, best first, as JSON.
    #[arg(long, value_name = "FILE")]
    pub trials_out: Option<PathBuf>,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[command(flatten)]
    pub output: ReportArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ModeTransferArgs {
    #[arg(long, value_name = "FILE")]
    pub train: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub test_same: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub test_other: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[command(flatten)]
    pub output: ReportArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TwoModeArgs {
    /// Dataset recorded in default mode.
    #[arg(long = "default", value_name = "FILE")]
    pub default_data: PathBuf,
    /// Dataset recorded in all-subnets mode.
    #[arg(long, value_name = "FILE")]
    pub all_subnets: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[command(flatten)]
    pub output: ReportArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Reward records, one JSON object per line.
    #[arg(long, value_name = "FILE")]
    pub records: PathBuf,
    /// Write responses here (JSON lines) instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_IDEAL_REWARD.0)]
    pub ideal_reward: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    #[arg(long, default_value_t = DEFAULT_IDEAL_REWARD.0)]
    pub ideal_reward: u64,
}

fn parse_mode(s: &str) -> Result<ModeTag, String> {
    s.parse().map_err(|e: clientprint::Error| e.to_string())
}

fn parse_separation(s: &str) -> Result<f64, String> {
    if s == "high" {
        return Ok(SEPARATION_HIGH);
    }
    s.parse::<f64>().map_err(|e| e.to_string())
}

/// Parses `args` (program name first) and runs the subcommand, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse(args) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn parse(args: Vec<OsString>) -> Result<Cli, i32> {
    let args = match config::expand(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Err(exit_code(&e));
        }
    };
    let mut cmd = <Cli as clap::CommandFactory>::command().args_override_self(true);
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_owned()).collect();
    for n in names {
        cmd = cmd.mut_subcommand(n, |s| s.args_override_self(true));
    }
    let parsed = cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m));
    match parsed {
        Ok(cli) => Ok(cli),
        Err(e) => {
            let _ = e.print();
            Err(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK })
        }
    }
}

/// Maps an error chain onto the exit-code contract.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<NumericError>() {
            return EXIT_NUMERIC;
        }
        if let Some(ce) = cause.downcast_ref::<clientprint::Error>() {
            return match ce {
                ce if ce.is_numeric() => EXIT_NUMERIC,
                clientprint::Error::Config(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth_cmd(&a),
        Command::Extract(a) => extract_cmd(&a),
        Command::Fetch(a) => fetch_cmd(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Eval(a) => eval_cmd(&a),
        Command::SweepK(a) => sweep_k_cmd(&a),
        Command::SweepSize(a) => sweep_size_cmd(&a),
        Command::SearchMlp(a) => search_mlp_cmd(&a),
        Command::ModeTransfer(a) => mode_transfer_cmd(&a),
        Command::MergeTrain(a) => merge_train_cmd(&a),
        Command::TwelveClass(a) => twelve_class_cmd(&a),
        Command::Classify(a) => classify_cmd(&a),
        Command::Serve(a) => serve_cmd(&a),
    }
}

fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    ingest::load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn load_model(path: &Path) -> Result<clientprint::Model> {
    model_file::load_model(path).with_context(|| format!("loading model {}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Prints the tables and writes the JSON report. Several reports are stored
/// as one object keyed by role.
fn emit(out: &ReportArgs, parts: Vec<(&str, ExperimentReport)>) -> Result<()> {
    let stamp = out.stamp.then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let parts: Vec<(&str, ExperimentReport)> = parts
        .into_iter()
        .map(|(role, mut r)| {
            r.timestamp_unix = stamp;
            (role, r)
        })
        .collect();

    let mut table = String::new();
    for (role, r) in &parts {
        if parts.len() > 1 {
            table.push_str(&format!("== {role} ==\n"));
        }
        table.push_str(&r.render_table());
        if parts.len() > 1 {
            table.push('\n');
        }
    }
    if !out.quiet {
        print!("{table}");
    }
    if let Some(p) = &out.table {
        write_file(p, &table)?;
    }
    if let Some(p) = &out.report {
        let json = match parts.as_slice() {
            [(_, r)] => r.to_json(),
            many => {
                let map: serde_json::Map<String, serde_json::Value> = many
                    .iter()
                    .map(|(role, r)| Ok(((*role).to_owned(), serde_json::to_value(r)?)))
                    .collect::<Result<_, serde_json::Error>>()?;
                let mut s = serde_json::to_string_pretty(&map)?;
                s.push('\n');
                s
            }
        };
        write_file(p, json)?;
    }
    Ok(())
}

fn write_svg(path: Option<&PathBuf>, report: &ExperimentReport, title: &str, x_label: &str) -> Result<()> {
    if let (Some(p), Some(curve)) = (path, &report.curve) {
        write_file(p, curve_svg(curve, title, x_label))?;
    }
    Ok(())
}

fn synth_cmd(a: &SynthArgs) -> Result<()> {
    let mut cfg = match &a.profiles {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            GeneratorConfig::from_toml_str(&text)?
        }
        None => GeneratorConfig::default(),
    };
    if let Some(n) = a.per_class {
        cfg.per_class = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.separation {
        cfg.separation = s;
    }
    cfg.validate()?;
    if let Some(p) = &a.dump_config {
        write_file(p, cfg.to_toml_string())?;
    }
    if a.records {
        let recs = synth::generate_records(&cfg, a.mode, Gwei(a.ideal_reward))?;
        ingest::save_records(&recs, &a.out)?;
        eprintln!("wrote {} records to {}", recs.len(), a.out.display());
    } else {
        let ds = synth::generate(&cfg, a.mode)?;
        ingest::save_dataset(&ds, &a.out)?;
        eprintln!("wrote {} samples to {}", ds.len(), a.out.display());
    }
    Ok(())
}

fn extract_cmd(a: &ExtractArgs) -> Result<()> {
    let recs = ingest::load_records(&a.records).with_context(|| format!("loading records {}", a.records.display()))?;
    let classes = a.classes.clone().unwrap_or_else(default_class_names);
    let ds = ingest::records_to_dataset(&recs, Gwei(a.ideal_reward), classes, a.label.as_deref(), a.mode)?;
    ingest::save_dataset(&ds, &a.out)?;
    eprintln!("wrote {} samples to {}", ds.len(), a.out.display());
    Ok(())
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")
}

fn fetch_cmd(a: &FetchArgs) -> Result<()> {
    let cfg = BeaconSourceConfig {
        base_url: a.base_url.clone(),
        path_template: a.path_template.clone(),
        slot_range: [a.start, a.end],
        timeout_secs: a.timeout,
        max_retries: a.retries,
        max_requests_per_second: a.rate,
        backoff_ms: a.backoff_ms,
        concurrency: a.concurrency,
        bearer_token: a.token.clone(),
    };
    if let Err(e) = cfg.validate() {
        bail!(UsageError(e.to_string()));
    }
    let summary = runtime()?.block_on(clientprint_beacon::fetch_rewards(&cfg))?;
    ingest::save_records(&summary.records, &a.out)?;
    eprintln!("{summary}");
    if !summary.failed.is_empty() {
        bail!(
            "{} slot(s) failed; the {} fetched records were written to {}",
            summary.failed.len(),
            summary.records.len(),
            a.out.display()
        );
    }
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let model = a.classifier.to_config(a.seed).fit(&ds)?;
    model_file::save_model(&model, &a.out)?;
    println!("{}", model_file::model_id(&model));
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = load_dataset(&a.data)?;
    let mut report = experiments::evaluate(&model, &ds)?;
    report.model_id = Some(model_file::model_id(&model));
    emit(&a.output, vec![("evaluation", report)])
}

fn sweep_k_cmd(a: &SweepKArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let report = experiments::k_sweep(&ds, &a.ks, a.folds, a.seed)?;
    write_svg(a.svg.as_ref(), &report, "KNN accuracy versus k", "k")?;
    emit(&a.output, vec![("k_sweep", report)])
}

fn sweep_size_cmd(a: &SweepSizeArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let cfg = a.classifier.to_config(a.seed);
    let report = experiments::size_sweep(&ds, &a.sizes, &cfg, a.folds, a.seed)?;
    write_svg(a.svg.as_ref(), &report, "Accuracy versus training size", "dataset size")?;
    emit(&a.output, vec![("size_sweep", report)])
}

fn search_mlp_cmd(a: &SearchMlpArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let space = SearchSpace {
        n_layers_range: [a.min_layers, a.max_layers],
        layer_size_range: [a.min_size, a.max_size],
        n_trials: a.trials,
        cv_folds: a.folds,
        seed: a.seed,
    };
    let trials = tuning::random_search_mlp(&ds, &space, &a.classifier.mlp_setup(a.seed))?;
    if let Some(p) = &a.trials_out {
        let mut s = serde_json::to_string_pretty(&trials)?;
        s.push('\n');
        write_file(p, s)?;
    }
    let report = tuning::search_report(&ds, ExperimentKind::RandomSearch, &trials, a.seed)?;
    emit(&a.output, vec![("mlp_search", report)])
}

fn mode_transfer_cmd(a: &ModeTransferArgs) -> Result<()> {
    let train = load_dataset(&a.train)?;
    let same = load_dataset(&a.test_same)?;
    let other = load_dataset(&a.test_other)?;
    let cfg = a.classifier.to_config(a.seed);
    let (r_same, r_other) = experiments::mode_transfer(&train, &same, &other, &cfg, a.seed)?;
    emit(&a.output, vec![("same_mode", r_same), ("other_mode", r_other)])
}

fn protocol(a: &TwoModeArgs) -> ProtocolOptions {
    ProtocolOptions {
        cv_folds: a.folds,
        test_fraction: a.test_fraction,
        ..Default::default()
    }
}

fn merge_train_cmd(a: &TwoModeArgs) -> Result<()> {
    let d = load_dataset(&a.default_data)?;
    let s = load_dataset(&a.all_subnets)?;
    let cfg = a.classifier.to_config(a.seed);
    let r = experiments::merged_training(&d, &s, &cfg, a.seed, &protocol(a))?;
    emit(
        &a.output,
        vec![
            ("merged_cv", r.merged_cv),
            ("default_test", r.default_test),
            ("all_subnets_test", r.all_subnets_test),
        ],
    )
}

fn twelve_class_cmd(a: &TwoModeArgs) -> Result<()> {
    let d = load_dataset(&a.default_data)?;
    let s = load_dataset(&a.all_subnets)?;
    let cfg = a.classifier.to_config(a.seed);
    let r = experiments::twelve_class_experiment(&d, &s, &cfg, a.seed, &protocol(a))?;
    emit(&a.output, vec![("twelve_class", r)])
}

fn classify_cmd(a: &ClassifyArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let recs = ingest::load_records(&a.records).with_context(|| format!("loading records {}", a.records.display()))?;
    let classifier = service::Classifier::new(model, Gwei(a.ideal_reward));
    let mut out = String::new();
    for (i, r) in recs.iter().enumerate() {
        let resp = classifier.classify_record(r).map_err(|e| match e {
            service::ClassifyError::Numeric(m) => anyhow::Error::new(NumericError(format!("record {i}: {m}"))),
            e => anyhow::anyhow!("record {i}: {}", e.body().message),
        })?;
        out.push_str(&serde_json::to_string(&resp)?);
        out.push('\n');
    }
    match &a.out {
        Some(p) => write_file(p, out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn serve_cmd(a: &ServeArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let classifier = Arc::new(service::Classifier::new(model, Gwei(a.ideal_reward)));
    let rt = runtime()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.bind)
            .await
            .with_context(|| format!("binding {}", a.bind))?;
        eprintln!(
            "serving model {} on http://{}",
            classifier.model_id(),
            listener.local_addr()?
        );
        service::serve(classifier, listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok(())
    })
}
