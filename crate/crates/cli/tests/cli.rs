use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "n_sites = 6\n[autoencoder]\nwidths = [1, 2]\nrestarts = 1\n[autoencoder.train]\nepochs = 200\n";

fn hamlearn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamlearn")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn small_pipeline(dir: &Path) {
    fs::write(dir.join("small.toml"), SMALL).unwrap();
    ok(&hamlearn(dir, &["generate", "--config", "small.toml", "--out", "gen"]));
    ok(&hamlearn(dir, &["autoencode", "--config", "small.toml", "--dataset", "gen/dataset.jsonl", "--out", "ae"]));
    ok(&hamlearn(
        dir,
        &["reconstruct", "--config", "small.toml", "--dataset", "gen/dataset.jsonl", "--embedding", "ae/embedding.csv", "--out", "rec"],
    ));
}

#[test]
fn prethermal_preset_generates_eight_elements() {
    let dir = tempfile::tempdir().unwrap();
    let out = hamlearn(dir.path(), &["generate", "--preset", "fig3", "--out", "gen"]);
    ok(&out);
    let text = fs::read_to_string(dir.path().join("gen/dataset.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);
    for f in ["manifest.json", "config.toml", "VERSION"] {
        assert!(dir.path().join("gen").join(f).exists(), "{f}");
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[dataset]\nmax_suport = 3\n").unwrap();
    let out = hamlearn(dir.path(), &["generate", "--config", "bad.toml", "--out", "gen"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_suport"));
}

#[test]
fn empty_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    ok(&hamlearn(dir.path(), &["generate", "--config", "small.toml", "--out", "gen"]));
    let text = fs::read_to_string(dir.path().join("gen/dataset.jsonl")).unwrap();
    fs::write(dir.path().join("empty.jsonl"), format!("{}\n", text.lines().next().unwrap())).unwrap();
    let out = hamlearn(dir.path(), &["autoencode", "--config", "small.toml", "--dataset", "empty.jsonl", "--out", "ae"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn local_pipeline_recovers_three_terms_and_reruns_identically() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    small_pipeline(first.path());
    small_pipeline(second.path());
    let csv = fs::read_to_string(first.path().join("rec/coefficients.csv")).unwrap();
    let patterns: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(patterns, ["Z", "XX", "YY"]);
    for f in ["gen/dataset.jsonl", "ae/embedding.csv", "ae/params.bin", "ae/sweep.csv", "rec/fit_report.json", "rec/coefficients.csv"] {
        assert_eq!(fs::read(first.path().join(f)).unwrap(), fs::read(second.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unconverged_fit_still_writes_a_flagged_report() {
    let dir = tempfile::tempdir().unwrap();
    small_pipeline(dir.path());
    fs::write(dir.path().join("short.toml"), format!("{SMALL}[reconstruct.fit]\nmax_iterations = 1\n")).unwrap();
    let out = hamlearn(
        dir.path(),
        &["reconstruct", "--config", "short.toml", "--dataset", "gen/dataset.jsonl", "--embedding", "ae/embedding.csv", "--out", "short"],
    );
    ok(&out);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("short/fit_report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], serde_json::Value::Bool(false));
}

#[test]
fn bch_table_lists_second_order_terms() {
    let dir = tempfile::tempdir().unwrap();
    ok(&hamlearn(dir.path(), &["bch", "--preset", "fig3", "--out", "bch"]));
    let csv = fs::read_to_string(dir.path().join("bch/bch.csv")).unwrap();
    assert!(csv.starts_with("pattern,support,order0,order1,order2\n"));
    assert!(csv.lines().any(|l| l.starts_with("ZXZ,3,0,0,")));
    let out = hamlearn(dir.path(), &["bch", "--out", "bch-local"]);
    assert_eq!(out.status.code(), Some(2));
}
