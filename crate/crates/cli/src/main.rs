//! `relevance`: the pipeline's single command-line entrypoint.
//!
//! Exit status is 0 on success, 1 on a usage error (bad or missing flags,
//! unusable paths) and 2 when the command itself fails.

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use relevance_core::aggregation::Kernel;
use relevance_core::behavior_index::{
    build_knowledge, read_logs, AttributeTable, BehaviorKnowledge, IndexConfig, LogIngest,
    DEFAULT_WINDOW_DAYS,
};
use relevance_core::evaluation::{evaluate, EvalError, DEFAULT_THRESHOLD};
use relevance_core::harness::{
    generate_synthetic_corpus, run_ablations, run_sweeps, ExperimentConfig, ExperimentReport,
    Sweep, SyntheticConfig, SyntheticCorpus, Variant,
};
use relevance_core::model::{ModelBundle, RelevanceModel, TrainConfig};
use relevance_core::prompt::{build_prompt_chain, default_templates, load_templates, PromptTemplate};
use relevance_core::scorer::{RemoteScorer, DEFAULT_DIM};
use relevance_core::serving::{offline_infer, read_pairs, ScoreService, Snapshot, ScoreStore};
use relevance_core::training::{read_labeled_pairs, train};

#[derive(Debug, Parser)]
#[command(name = "relevance", version, about = "Query-item relevance pipeline")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Print machine-readable JSON instead of a text summary.
    #[arg(long, global = true)]
    json: bool,

    /// Seed for every random choice the command makes.
    #[arg(long, global = true, env = "RELEVANCE_SEED")]
    seed: Option<u64>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mine neighbor indexes from exposure logs.
    BuildIndex(BuildIndexArgs),
    /// Render the prompt chain for each pair.
    BuildPrompts(BuildPromptsArgs),
    /// Fit a model bundle on labeled pairs.
    Train(TrainArgs),
    /// Compute AUC, F1 and FNR on labeled pairs.
    Eval(EvalArgs),
    /// Score pairs in batch into a score store.
    OfflineInfer(OfflineInferArgs),
    /// Serve scores over HTTP.
    Serve(ServeArgs),
    /// Score a single pair.
    Score(ScoreArgs),
    /// Synthetic corpora, ablations and sweeps.
    #[command(subcommand)]
    Harness(HarnessCommand),
}

#[derive(Debug, Args)]
struct IndexDirArg {
    /// Index directory written by build-index.
    #[arg(long, env = "RELEVANCE_INDEX_DIR")]
    index_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ModelArg {
    /// Model bundle written by train.
    #[arg(long, env = "RELEVANCE_MODEL")]
    model: PathBuf,
}

#[derive(Debug, Args)]
struct BuildIndexArgs {
    /// JSON-lines exposure logs; several files may follow one flag.
    #[arg(long, num_args = 1.., required = true)]
    logs: Vec<PathBuf>,
    /// JSON-lines attribute records.
    #[arg(long, visible_alias = "attrs")]
    attributes: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "RELEVANCE_INDEX_DIR")]
    out: PathBuf,
    /// Version label (YYYY-MM-DD); defaults to the latest day in the logs.
    #[arg(long = "version", visible_alias = "index-version")]
    index_version: Option<String>,
    #[arg(long, default_value_t = 100)]
    min_pv: u64,
    #[arg(long, default_value_t = 0.2)]
    ctr_threshold: f64,
    #[arg(long, default_value_t = 20)]
    top_k: usize,
    #[arg(long, default_value_t = DEFAULT_WINDOW_DAYS)]
    window_days: usize,
}

#[derive(Debug, Args)]
struct TemplateArgs {
    /// JSON list of {level, pattern}; the built-in chain is used otherwise.
    #[arg(long, env = "RELEVANCE_TEMPLATES")]
    templates: Option<PathBuf>,
    /// Length of the built-in chain.
    #[arg(long, default_value_t = 3)]
    levels: usize,
}

impl TemplateArgs {
    fn load(&self) -> Result<Vec<PromptTemplate>> {
        Ok(match &self.templates {
            Some(path) => load_templates(path)?,
            None => default_templates(self.levels)?,
        })
    }
}

#[derive(Debug, Args)]
struct BuildPromptsArgs {
    #[command(flatten)]
    index: IndexDirArg,
    /// JSON-lines {query, item} pairs.
    #[arg(long, required_unless_present = "pair")]
    pairs: Option<PathBuf>,
    /// A single `query,item` pair; may be repeated.
    #[arg(long, value_parser = parse_pair)]
    pair: Vec<(String, String)>,
    #[command(flatten)]
    templates: TemplateArgs,
    /// Output file; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(raw: &str) -> Result<(String, String), String> {
    match raw.split_once(',') {
        Some((q, i)) if !q.trim().is_empty() && !i.trim().is_empty() => {
            Ok((q.trim().to_owned(), i.trim().to_owned()))
        }
        _ => Err(format!("expected query,item but got {raw:?}")),
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    index: IndexDirArg,
    /// JSON-lines {query, item, label} pairs.
    #[arg(long)]
    data: PathBuf,
    /// Where to write the model bundle.
    #[arg(long, env = "RELEVANCE_MODEL")]
    out: PathBuf,
    #[command(flatten)]
    templates: TemplateArgs,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, visible_alias = "lr", default_value_t = 0.1)]
    learning_rate: f64,
    /// Step size for λ; defaults to --learning-rate.
    #[arg(long)]
    lambda_learning_rate: Option<f64>,
    #[arg(long, visible_alias = "batch", default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value = "exponential")]
    kernel: Kernel,
    /// Hashed feature dimension.
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArg,
    #[command(flatten)]
    index: IndexDirArg,
    /// JSON-lines {query, item, label} pairs.
    #[arg(long)]
    data: PathBuf,
    /// Scores at or above this are predicted relevant.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct OfflineInferArgs {
    #[command(flatten)]
    model: ModelArg,
    #[command(flatten)]
    index: IndexDirArg,
    /// JSON-lines {query, item} pairs.
    #[arg(long)]
    pairs: PathBuf,
    /// Where to write the score store.
    #[arg(long, env = "RELEVANCE_STORE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScorerArgs {
    /// Remote scorer base URL; the bundle's own scorer is used otherwise.
    #[arg(long, env = "RELEVANCE_SCORER_URL")]
    scorer_url: Option<String>,
    #[arg(long, default_value_t = 2000)]
    scorer_timeout_ms: u64,
}

impl ScorerArgs {
    fn model(&self, bundle: &ModelBundle) -> Result<RelevanceModel> {
        Ok(match &self.scorer_url {
            Some(url) => {
                let remote =
                    RemoteScorer::new(url, Duration::from_millis(self.scorer_timeout_ms))?;
                RelevanceModel::with_scorer(bundle, Arc::new(remote))?
            }
            None => RelevanceModel::from_bundle(bundle)?,
        })
    }
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[command(flatten)]
    model: ModelArg,
    #[command(flatten)]
    index: IndexDirArg,
    /// Score store written by offline-infer.
    #[arg(long, env = "RELEVANCE_STORE")]
    store: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long, env = "RELEVANCE_HOST", default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "RELEVANCE_PORT", default_value_t = 8080)]
    port: u16,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    model: ModelArg,
    #[command(flatten)]
    index: IndexDirArg,
    #[arg(long)]
    query: String,
    #[arg(long)]
    item: String,
    #[command(flatten)]
    scorer: ScorerArgs,
}

#[derive(Debug, Subcommand)]
enum HarnessCommand {
    /// Generate a synthetic corpus directory.
    Gen(GenArgs),
    /// Train and evaluate the ablation variants.
    Ablate(AblateArgs),
    /// Train and evaluate along one dimension.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Synthetic corpus settings as JSON; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Corpus directory written by `harness gen`.
    #[arg(long)]
    corpus: PathBuf,
    /// Experiment settings as JSON; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report file; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Comma-separated variants; all four by default.
    #[arg(long, value_delimiter = ',')]
    variants: Vec<Variant>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, value_parser = ["neighbors", "kernel", "alpha"])]
    dim: String,
    /// Comma-separated values; the default grid otherwise.
    #[arg(long)]
    values: Option<String>,
}

/// A problem with the invocation itself rather than with the work.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn need_file(flag: &str, path: &Path) -> Result<(), UsageError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(UsageError(format!("--{flag}: {} is not a readable file", path.display())))
    }
}

fn need_dir(flag: &str, path: &Path) -> Result<(), UsageError> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(UsageError(format!("--{flag}: {} is not a directory", path.display())))
    }
}

/// Output files need an existing parent directory.
fn need_parent(flag: &str, path: &Path) -> Result<(), UsageError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(UsageError(format!(
            "--{flag}: directory {} does not exist",
            p.display()
        ))),
        _ if path.is_dir() => Err(UsageError(format!(
            "--{flag}: {} is a directory",
            path.display()
        ))),
        _ => Ok(()),
    }
}

/// Checks every path flag before any work starts.
fn validate_paths(command: &Command) -> Result<(), UsageError> {
    let templates = |t: &TemplateArgs| match &t.templates {
        Some(p) => need_file("templates", p),
        None => Ok(()),
    };
    match command {
        Command::BuildIndex(a) => {
            for p in &a.logs {
                need_file("logs", p)?;
            }
            if let Some(p) = &a.attributes {
                need_file("attributes", p)?;
            }
            if a.out.is_file() {
                return Err(UsageError(format!("--out: {} is a file", a.out.display())));
            }
        }
        Command::BuildPrompts(a) => {
            need_dir("index-dir", &a.index.index_dir)?;
            if let Some(p) = &a.pairs {
                need_file("pairs", p)?;
            }
            templates(&a.templates)?;
            if let Some(p) = &a.out {
                need_parent("out", p)?;
            }
        }
        Command::Train(a) => {
            need_dir("index-dir", &a.index.index_dir)?;
            need_file("data", &a.data)?;
            templates(&a.templates)?;
            need_parent("out", &a.out)?;
        }
        Command::Eval(a) => {
            need_file("model", &a.model.model)?;
            need_dir("index-dir", &a.index.index_dir)?;
            need_file("data", &a.data)?;
        }
        Command::OfflineInfer(a) => {
            need_file("model", &a.model.model)?;
            need_dir("index-dir", &a.index.index_dir)?;
            need_file("pairs", &a.pairs)?;
            need_parent("out", &a.out)?;
        }
        Command::Serve(a) => {
            need_file("model", &a.model.model)?;
            need_dir("index-dir", &a.index.index_dir)?;
            need_file("store", &a.store)?;
        }
        Command::Score(a) => {
            need_file("model", &a.model.model)?;
            need_dir("index-dir", &a.index.index_dir)?;
        }
        Command::Harness(HarnessCommand::Gen(a)) => {
            if let Some(p) = &a.config {
                need_file("config", p)?;
            }
            if a.out.is_file() {
                return Err(UsageError(format!("--out: {} is a file", a.out.display())));
            }
        }
        Command::Harness(HarnessCommand::Ablate(AblateArgs { experiment, .. }))
        | Command::Harness(HarnessCommand::Sweep(SweepArgs { experiment, .. })) => {
            need_dir("corpus", &experiment.corpus)?;
            if let Some(p) = &experiment.config {
                need_file("config", p)?;
            }
            if let Some(p) = &experiment.out {
                need_parent("out", p)?;
            }
        }
    }
    Ok(())
}

struct Output {
    json: bool,
}

impl Output {
    /// JSON when requested, otherwise the text rendering.
    fn emit<T: Serialize>(&self, value: &T, text: impl FnOnce() -> String) -> Result<()> {
        let mut out = std::io::stdout().lock();
        if self.json {
            serde_json::to_writer(&mut out, value)?;
            writeln!(out)?;
        } else {
            writeln!(out, "{}", text())?;
        }
        Ok(())
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    serde_json::from_str(&text).with_context(|| path.display().to_string())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| path.display().to_string())?,
    ))
}

fn load_model_parts(model: &Path, index_dir: &Path) -> Result<(ModelBundle, BehaviorKnowledge)> {
    let bundle = ModelBundle::load(model)?;
    let knowledge = BehaviorKnowledge::load(index_dir)?;
    if bundle.index_version != knowledge.version() {
        log::warn!(
            "model was trained on index {} but index {} is loaded",
            bundle.index_version,
            knowledge.version()
        );
    }
    Ok((bundle, knowledge))
}

fn build_index(a: &BuildIndexArgs, out: &Output) -> Result<()> {
    let mut ingest = LogIngest::default();
    let mut log_errors = 0;
    for path in &a.logs {
        read_logs(open(path)?, &mut ingest)?;
        for e in &ingest.errors[log_errors..] {
            log::warn!("{} line {}: {}", path.display(), e.line, e.error);
        }
        log_errors = ingest.errors.len();
    }
    let mut attributes = AttributeTable::default();
    let mut attribute_errors = 0;
    if let Some(path) = &a.attributes {
        let report = attributes.read_jsonl(open(path)?)?;
        for e in &report.errors {
            log::warn!("{} line {}: {}", path.display(), e.line, e.error);
        }
        attribute_errors = report.errors.len();
    }
    let config = IndexConfig {
        min_pv: a.min_pv,
        ctr_threshold: a.ctr_threshold,
        top_k: a.top_k,
    };
    let version = match &a.index_version {
        Some(v) => v.clone(),
        None => match ingest.records.iter().map(|r| r.day.as_str()).max() {
            Some(day) => day.to_owned(),
            None => bail!("the logs hold no usable records"),
        },
    };
    let (knowledge, manifest) =
        build_knowledge(&ingest.records, attributes, &config, &version, a.window_days)?;
    knowledge.save(&a.out, &manifest)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        out: &'a Path,
        manifest: &'a relevance_core::behavior_index::IndexManifest,
        records: usize,
        log_errors: usize,
        attribute_errors: usize,
    }
    let summary = Summary {
        out: &a.out,
        manifest: &manifest,
        records: ingest.records.len(),
        log_errors: ingest.errors.len(),
        attribute_errors,
    };
    out.emit(&summary, || {
        format!(
            "index {} written to {}: {} query keys, {} item keys ({} records, {} skipped lines)",
            manifest.version,
            a.out.display(),
            manifest.query_keys,
            manifest.item_keys,
            ingest.records.len(),
            ingest.errors.len() + attribute_errors
        )
    })
}

fn build_prompts(a: &BuildPromptsArgs) -> Result<()> {
    let knowledge = BehaviorKnowledge::load(&a.index.index_dir)?;
    let templates = a.templates.load()?;
    let mut pairs = a.pair.clone();
    if let Some(path) = &a.pairs {
        pairs.extend(read_pairs(open(path)?).map_err(anyhow::Error::msg)?);
    }
    let mut body = String::new();
    for (q, i) in &pairs {
        let chain = build_prompt_chain(q, i, &knowledge, &templates)?;
        body.push_str(&serde_json::to_string(&chain)?);
        body.push('\n');
    }
    match &a.out {
        Some(path) => fs::write(path, body).with_context(|| path.display().to_string())?,
        None => std::io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn train_cmd(a: &TrainArgs, seed: u64, out: &Output) -> Result<()> {
    let knowledge = BehaviorKnowledge::load(&a.index.index_dir)?;
    let templates = a.templates.load()?;
    let data = read_labeled_pairs(open(&a.data)?)?;
    let config = TrainConfig {
        alpha: a.alpha,
        learning_rate: a.learning_rate,
        lambda_learning_rate: a.lambda_learning_rate,
        batch_size: a.batch_size,
        epochs: a.epochs,
        seed,
        levels: templates.len(),
        kernel: a.kernel,
        dim: a.dim,
    };
    let result = train(&data, &knowledge, &templates, &config)?;
    result.bundle.save(&a.out)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        model_version: &'a str,
        out: &'a Path,
        lambda: f64,
        trace: &'a [relevance_core::training::EpochLoss],
    }
    let summary = Summary {
        model_version: &result.bundle.model_version,
        out: &a.out,
        lambda: result.bundle.lambda,
        trace: &result.trace,
    };
    out.emit(&summary, || {
        let mut s = format!(
            "model {} written to {} (lambda {:.4})",
            result.bundle.model_version,
            a.out.display(),
            result.bundle.lambda
        );
        for e in &result.trace {
            s.push_str(&format!("\nepoch {}: loss {:.6}", e.epoch, e.total));
        }
        s
    })
}

fn eval_cmd(a: &EvalArgs, out: &Output) -> Result<()> {
    let (bundle, knowledge) = load_model_parts(&a.model.model, &a.index.index_dir)?;
    let model = RelevanceModel::from_bundle(&bundle)?;
    let data = read_labeled_pairs(open(&a.data)?)?;
    match evaluate(&model, &data, &knowledge, a.threshold) {
        Ok(report) => out.emit(&report, || {
            format!(
                "auc {:.4}  f1 {:.4}  fnr {:.4}  ({} positive, {} negative, threshold {})",
                report.auc, report.f1, report.fnr, report.n_pos, report.n_neg, report.threshold
            )
        }),
        Err(EvalError::UndefinedMetric { source, partial }) => {
            out.emit(&*partial, || format!("partial report: {partial:?}"))?;
            bail!(source)
        }
        Err(e) => Err(e.into()),
    }
}

fn offline_infer_cmd(a: &OfflineInferArgs, out: &Output) -> Result<()> {
    let (bundle, knowledge) = load_model_parts(&a.model.model, &a.index.index_dir)?;
    let model = RelevanceModel::from_bundle(&bundle)?;
    let pairs = read_pairs(open(&a.pairs)?).map_err(anyhow::Error::msg)?;
    let outcome = offline_infer(&model, &pairs, &knowledge);
    outcome.store.save(&a.out)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        out: &'a Path,
        version: &'a str,
        model_version: &'a str,
        scored: usize,
        skipped: usize,
    }
    let summary = Summary {
        out: &a.out,
        version: &outcome.store.version,
        model_version: &model.model_version,
        scored: outcome.store.len(),
        skipped: outcome.skipped.len(),
    };
    out.emit(&summary, || {
        format!(
            "store {} written to {}: {} pairs scored, {} skipped",
            outcome.store.version,
            a.out.display(),
            outcome.store.len(),
            outcome.skipped.len()
        )
    })
}

fn serve_cmd(a: &ServeArgs) -> Result<()> {
    let (bundle, knowledge) = load_model_parts(&a.model.model, &a.index.index_dir)?;
    let model = a.scorer.model(&bundle)?;
    let store = ScoreStore::load(&a.store)?;
    let snapshot = Snapshot::new(store, knowledge)?;
    let service = Arc::new(ScoreService::new(snapshot, model));
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .with_context(|| format!("bad listen address {}:{}", a.host, a.port))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on {}", listener.local_addr()?);
        eprintln!("listening on {}", listener.local_addr()?);
        relevance_core::serving::serve(listener, service).await?;
        Ok(())
    })
}

fn score_cmd(a: &ScoreArgs) -> Result<()> {
    let (bundle, knowledge) = load_model_parts(&a.model.model, &a.index.index_dir)?;
    let model = a.scorer.model(&bundle)?;
    let scored = model.score_pair(&knowledge, &a.query, &a.item)?;
    // the pair score is already structured, so it is printed as JSON either way
    println!("{}", serde_json::to_string(&scored)?);
    Ok(())
}

fn gen_cmd(a: &GenArgs, seed: Option<u64>, out: &Output) -> Result<()> {
    let mut config: SyntheticConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SyntheticConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    let corpus = generate_synthetic_corpus(&config)?;
    corpus.write(&a.out)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        out: &'a Path,
        config: &'a SyntheticConfig,
        log_records: usize,
        labeled_pairs: usize,
    }
    let summary = Summary {
        out: &a.out,
        config: &config,
        log_records: corpus.logs.len(),
        labeled_pairs: corpus.labeled.len(),
    };
    out.emit(&summary, || {
        format!(
            "corpus written to {}: {} log records, {} labeled pairs (seed {})",
            a.out.display(),
            corpus.logs.len(),
            corpus.labeled.len(),
            config.seed
        )
    })
}

fn experiment_inputs(a: &ExperimentArgs, seed: Option<u64>) -> Result<(SyntheticCorpus, ExperimentConfig)> {
    let corpus = SyntheticCorpus::load(&a.corpus)?;
    let mut config: ExperimentConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        config.train.seed = s;
    }
    Ok((corpus, config))
}

fn write_report(report: &ExperimentReport, a: &ExperimentArgs, out: &Output) -> Result<()> {
    if let Some(path) = &a.out {
        fs::write(path, report.to_json()).with_context(|| path.display().to_string())?;
    }
    if a.out.is_none() || out.json {
        print!("{}", report.to_json());
        return Ok(());
    }
    let mut s = String::new();
    for row in &report.table {
        s.push_str(&format!(
            "{:<24} auc {:.4}  f1 {:.4}  fnr {:.4}\n",
            row.variant, row.auc, row.f1, row.fnr
        ));
    }
    print!("{s}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let out = Output { json: cli.json };
    match &cli.command {
        Command::BuildIndex(a) => build_index(a, &out),
        Command::BuildPrompts(a) => build_prompts(a),
        Command::Train(a) => train_cmd(a, cli.seed.unwrap_or(0), &out),
        Command::Eval(a) => eval_cmd(a, &out),
        Command::OfflineInfer(a) => offline_infer_cmd(a, &out),
        Command::Serve(a) => serve_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::Harness(HarnessCommand::Gen(a)) => gen_cmd(a, cli.seed, &out),
        Command::Harness(HarnessCommand::Ablate(a)) => {
            let (corpus, config) = experiment_inputs(&a.experiment, cli.seed)?;
            let variants = if a.variants.is_empty() {
                Variant::ALL.to_vec()
            } else {
                a.variants.clone()
            };
            let report = run_ablations(&corpus, &config, &variants)?;
            write_report(&report, &a.experiment, &out)
        }
        Command::Harness(HarnessCommand::Sweep(a)) => {
            let (corpus, config) = experiment_inputs(&a.experiment, cli.seed)?;
            let sweep = match &a.values {
                Some(v) => Sweep::parse(&a.dim, v)?,
                None => Sweep::default_for(&a.dim)?,
            };
            let report = run_sweeps(&corpus, &config, &sweep)?;
            write_report(&report, &a.experiment, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // --help and --version are not usage errors
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Err(e) = validate_paths(&cli.command) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
