//! End-to-end runs of the `relevance` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn relevance() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_relevance"));
    for var in [
        "RELEVANCE_SEED",
        "RELEVANCE_INDEX_DIR",
        "RELEVANCE_MODEL",
        "RELEVANCE_STORE",
        "RELEVANCE_TEMPLATES",
        "RELEVANCE_SCORER_URL",
        "RELEVANCE_HOST",
        "RELEVANCE_PORT",
    ] {
        cmd.env_remove(var);
    }
    cmd
}

fn run(args: &[&str]) -> Output {
    relevance().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    String::from_utf8(o.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn no_arguments_is_a_usage_error() {
    let o = run(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["eval", "--help"]).status.code(), Some(0));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn eval_without_data_names_the_flag() {
    let o = run(&["eval", "--model", "m.json", "--index-dir", "idx"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--data"), "{}", stderr(&o));
}

#[test]
fn missing_input_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    fs::write(&model, "{}").unwrap();
    let o = run(&[
        "eval",
        "--model",
        p(&model),
        "--index-dir",
        p(dir.path()),
        "--data",
        "/nonexistent/labeled.jsonl",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--data"), "{}", stderr(&o));
}

#[test]
fn malformed_pair_is_a_usage_error() {
    let o = run(&["build-prompts", "--index-dir", ".", "--pair", "no-comma"]);
    assert_eq!(o.status.code(), Some(1));
}

/// Generates a small corpus and builds an index from it.
fn corpus_and_index(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let config = dir.join("synthetic.json");
    fs::write(
        &config,
        r#"{"topics": 8, "n_queries": 120, "n_items": 120, "n_labeled": 400}"#,
    )
    .unwrap();
    let corpus = dir.join("corpus");
    ok(&["harness", "gen", "--config", p(&config), "--out", p(&corpus), "--seed", "3"]);
    let index = dir.join("index");
    ok(&[
        "build-index",
        "--logs",
        p(&corpus.join("logs.jsonl")),
        "--attrs",
        p(&corpus.join("attributes.jsonl")),
        "--version",
        "2024-01-31",
        "--out",
        p(&index),
    ]);
    (corpus, index)
}

fn train_args<'a>(index: &'a Path, data: &'a Path, out: &'a Path) -> Vec<&'a str> {
    vec![
        "train",
        "--index-dir",
        p(index),
        "--data",
        p(data),
        "--out",
        p(out),
        "--epochs",
        "2",
        "--learning-rate",
        "0.002",
        "--alpha",
        "1.0",
        "--dim",
        "16384",
        "--seed",
        "5",
        "--json",
    ]
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, index) = corpus_and_index(dir.path());
    for name in ["query_index.json", "item_index.json", "attributes.json", "manifest.json"] {
        assert!(index.join(name).is_file(), "{name} missing");
    }

    let chain = ok(&["build-prompts", "--index-dir", p(&index), "--pair", "q1,i2"]);
    let chain: serde_json::Value = serde_json::from_str(chain.trim()).unwrap();
    assert_eq!(chain["levels"].as_array().unwrap().len(), 3);

    let labeled = corpus.join("labeled.jsonl");
    let model = dir.path().join("model.json");
    let trained: serde_json::Value =
        serde_json::from_str(&ok(&train_args(&index, &labeled, &model))).unwrap();
    assert_eq!(trained["trace"].as_array().unwrap().len(), 3);

    let report = ok(&[
        "eval", "--model", p(&model), "--index-dir", p(&index), "--data", p(&labeled), "--json",
    ]);
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    let auc = report["auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));

    let store = dir.path().join("store.json");
    let summary = ok(&[
        "offline-infer",
        "--model",
        p(&model),
        "--index-dir",
        p(&index),
        "--pairs",
        p(&labeled),
        "--out",
        p(&store),
        "--json",
    ]);
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["version"], "2024-01-31");
    assert!(summary["scored"].as_u64().unwrap() > 0);

    let scored = ok(&[
        "score", "--model", p(&model), "--index-dir", p(&index), "--query", "q1", "--item", "i2",
    ]);
    let scored: serde_json::Value = serde_json::from_str(&scored).unwrap();
    let s = scored["score"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&s));
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let runs: Vec<Vec<Vec<u8>>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let (corpus, index) = corpus_and_index(dir.path());
            let model = dir.path().join("model.json");
            ok(&train_args(&index, &corpus.join("labeled.jsonl"), &model));
            [index.join("query_index.json"), index.join("item_index.json"), model]
                .iter()
                .map(|f| fs::read(f).unwrap())
                .collect()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn single_class_eval_exits_2_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, index) = corpus_and_index(dir.path());
    let model = dir.path().join("model.json");
    let labeled = corpus.join("labeled.jsonl");
    ok(&train_args(&index, &labeled, &model));

    let positives: String = fs::read_to_string(&labeled)
        .unwrap()
        .lines()
        .filter(|l| l.contains("\"label\":1"))
        .map(|l| format!("{l}\n"))
        .collect();
    assert!(!positives.is_empty());
    let only_pos = dir.path().join("positives.jsonl");
    fs::write(&only_pos, positives).unwrap();

    let o = run(&[
        "eval", "--model", p(&model), "--index-dir", p(&index), "--data", p(&only_pos), "--json",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let partial: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(partial["auc"].is_null());
    assert!(partial["fnr"].as_f64().is_some());
}
