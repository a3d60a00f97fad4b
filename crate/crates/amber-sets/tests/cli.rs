//! End-to-end checks of the `amber` binary: exit codes, output, artifacts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/pipeline.toml")
}

fn amber(outdir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amber"))
        .arg("--config")
        .arg(fixture_config())
        .args(args)
        .env("AMBER_OUTDIR", outdir)
        .output()
        .expect("failed to spawn amber")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn all_runs_the_fixture_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let output = amber(tmp.path(), &["all"]);
    assert!(
        output.status.success(),
        "all failed: {}",
        stderr(&output)
    );
    let table = stdout(&output);
    assert!(table.contains("human") && table.contains("nonhuman"), "{table}");
    assert!(table.contains("accuracy"), "{table}");
    for coll in ["human", "nonhuman"] {
        for artifact in ["sets.jsonl", "qa.jsonl", "sf.jsonl", "fc.jsonl", "report.json"] {
            let path = tmp.path().join(coll).join(artifact);
            assert!(path.is_file(), "missing artifact {}", path.display());
        }
    }
}

#[test]
fn staged_subcommands_chain_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["build"][..], &["generate"], &["retrieve", "--k", "3"]] {
        let output = amber(tmp.path(), args);
        assert!(
            output.status.success(),
            "{args:?} failed: {}",
            stderr(&output)
        );
    }
    let output = amber(tmp.path(), &["evaluate", "--k", "3"]);
    assert!(output.status.success(), "evaluate failed: {}", stderr(&output));
    assert!(stdout(&output).contains("k = 3"), "{}", stdout(&output));

    let output = amber(tmp.path(), &["report", "--format", "csv"]);
    assert!(output.status.success(), "report failed: {}", stderr(&output));
    assert!(
        stdout(&output).contains("section,task,k,bin,split,hits,total,value"),
        "{}",
        stdout(&output)
    );
}

#[test]
fn generate_before_build_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let output = amber(tmp.path(), &["generate"]);
    assert_eq!(output.status.code(), Some(2), "{}", stderr(&output));
    assert!(stderr(&output).contains("error:"), "{}", stderr(&output));
}

#[test]
fn missing_input_path_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = format!(
        r#"
[paths]
kg = "{kg}"
corpus = "{missing}"
pageviews = "{pv}"
templates = "{tpl}"
collections = "{coll}"
outdir = "out"
"#,
        kg = fixtures.join("kg.jsonl").display(),
        missing = fixtures.join("no_such_corpus.jsonl").display(),
        pv = fixtures.join("pageviews.tsv").display(),
        tpl = fixtures.join("../config/templates.toml").display(),
        coll = fixtures.join("../config/collections.toml").display(),
    );
    let config_path = tmp.path().join("pipeline.toml");
    std::fs::write(&config_path, config).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_amber"))
        .arg("--config")
        .arg(&config_path)
        .arg("build")
        .output()
        .expect("failed to spawn amber");
    assert_eq!(output.status.code(), Some(2), "{}", stderr(&output));
    assert!(stderr(&output).contains("corpus"), "{}", stderr(&output));
}

#[test]
fn run_with_unknown_query_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["build"][..], &["generate"]] {
        let output = amber(tmp.path(), args);
        assert!(output.status.success(), "{args:?} failed: {}", stderr(&output));
    }
    let run_path = tmp.path().join("stale_run.jsonl");
    std::fs::write(
        &run_path,
        "{\"query_id\": \"feedfacefeedface:Q1:P1:qa\", \"ranked_doc_ids\": [\"Some_Doc\"]}\n",
    )
    .unwrap();
    let output = amber(
        tmp.path(),
        &["evaluate", "--run", run_path.to_str().unwrap()],
    );
    assert_eq!(output.status.code(), Some(1), "{}", stderr(&output));
    assert!(
        stderr(&output).contains("unknown queries"),
        "{}",
        stderr(&output)
    );
}
