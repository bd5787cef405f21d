use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rulegraph")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

/// gen, train, detect and eval into `dir`; returns the eval output.
fn pipeline(dir: &Path, seed: &str) -> String {
    let d = dir.to_str().unwrap();
    ok(&["gen", "--preset", "benchmark", "--seed", seed, "--train-events", "3000", "--test-events", "500", "--out-dir", d]);
    let report = ok(&[
        "train", "--events", &p(dir, "train.jsonl"), "--types", &p(dir, "types.json"),
        "--decay", "0.8", "--iters-k", "4", "--threshold", "0.64", "--samples", "32", "--seed", "1",
        "--out", &p(dir, "rules.json"),
    ]);
    let report: Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["events"], 3000);
    ok(&["detect", "--ruleset", &p(dir, "rules.json"), "--events", &p(dir, "test.jsonl"), "--out", &p(dir, "results.jsonl"), "--single-core"]);
    ok(&["eval", "--results", &p(dir, "results.jsonl"), "--labels", &p(dir, "test.jsonl")])
}

#[test]
fn full_pipeline_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ea = pipeline(a.path(), "4");
    let eb = pipeline(b.path(), "4");
    assert_eq!(ea, eb);
    for f in ["train.jsonl", "test.jsonl", "types.json", "rules.json", "results.jsonl"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    let m: Value = serde_json::from_str(&ea).unwrap();
    assert_eq!(m["recall"], 1.0);
    let rules: Value = serde_json::from_str(&fs::read_to_string(a.path().join("rules.json")).unwrap()).unwrap();
    let first = &rules["rules"][0];
    assert!(first["id"].is_string() && first["support"].is_u64());
    assert!(first["signature"][0].as_array().unwrap().len() == 2);
    assert!(first["patterns"].is_object());
    let line = fs::read_to_string(a.path().join("results.jsonl")).unwrap();
    let r: Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert!(r["verdict"] == "normal" || r["verdict"] == "anomalous");
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--preset", "motivating", "--out-dir", d.to_str().unwrap()]);
    let (events, out) = (p(d, "train.jsonl"), p(d, "r.json"));
    let train = |extra: &[&str]| {
        let mut args = vec!["train", "--events", &events, "--out", &out];
        args.extend_from_slice(extra);
        code(&args)
    };
    assert_eq!(train(&["--iters-k", "2"]), 2);
    assert_eq!(train(&["--decay", "1.0"]), 2);
    assert_eq!(train(&["--threshold", "0"]), 2);
    assert_eq!(train(&["--samples", "0"]), 2);
    assert_eq!(train(&["--threshold", "abc"]), 2);
    assert_eq!(train(&[]), 0);
    assert_eq!(code(&["train", "--events", "/nonexistent.jsonl", "--out", &p(d, "x.json")]), 2);
    fs::write(d.join("bad.json"), "{\"version\": \"1\", \"rules\": [{\"id\": \"a\"}]}").unwrap();
    assert_eq!(code(&["detect", "--ruleset", &p(d, "bad.json"), "--events", &p(d, "test.jsonl")]), 2);
    assert_eq!(code(&["perturb", "--events", &p(d, "train.jsonl"), "--mode", "drop", "--level", "1.5", "--out", &p(d, "o")]), 2);
    assert_eq!(code(&["perturb", "--events", &p(d, "train.jsonl"), "--mode", "melt", "--level", "0.1", "--out", &p(d, "o")]), 2);
    assert_eq!(code(&["synth", "--pos", "a"]), 2);
    assert_eq!(code(&["gen", "--preset", "nope", "--out-dir", d.to_str().unwrap()]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    fs::write(d.join("short.jsonl"), "{\"_label\": \"normal\"}\n").unwrap();
    ok(&["train", "--events", &p(d, "train.jsonl"), "--out", &p(d, "r.json")]);
    ok(&["detect", "--ruleset", &p(d, "r.json"), "--events", &p(d, "test.jsonl"), "--out", &p(d, "res.jsonl")]);
    assert_eq!(code(&["eval", "--results", &p(d, "res.jsonl"), "--labels", &p(d, "short.jsonl")]), 2);
}

#[test]
fn auxiliary_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--preset", "motivating", "--out-dir", d.to_str().unwrap()]);
    ok(&["train", "--events", &p(d, "train.jsonl"), "--types", &p(d, "types.json"), "--out", &p(d, "r.json")]);

    ok(&["perturb", "--events", &p(d, "train.jsonl"), "--mode", "duplicate", "--level", "0.5", "--seed", "3", "--out", &p(d, "dup.jsonl")]);
    let n = fs::read_to_string(d.join("dup.jsonl")).unwrap().lines().count();
    assert_eq!(n, 18);
    ok(&["train", "--events", &p(d, "dup.jsonl"), "--types", &p(d, "types.json"), "--out", &p(d, "r2.json")]);
    assert_eq!(fs::read(d.join("r.json")).unwrap(), fs::read(d.join("r2.json")).unwrap());

    let synth: Value = serde_json::from_str(&ok(&["synth", "--pos", "i-123", "--pos", "i-124", "--neg", "i-125"])).unwrap();
    assert_eq!(synth["result"], "i-12(?:3|4)");

    let dump = ok(&["simdump", "--events", &p(d, "train.jsonl"), "--types", &p(d, "types.json"), "--top", "3"]);
    assert!(dump.contains("score"));

    let bench: Value = serde_json::from_str(&ok(&["bench", "--ruleset", &p(d, "r.json"), "--events", &p(d, "test.jsonl"), "--single-core", "--rounds", "1"])).unwrap();
    assert_eq!(bench["rules"], 6);

    ok(&["sweep", "--train", &p(d, "train.jsonl"), "--test", &p(d, "test.jsonl"), "--types", &p(d, "types.json"),
        "--ks", "3,4", "--thresholds", "0.5,0.64", "--out", &p(d, "sweep.csv")]);
    let csv = fs::read_to_string(d.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("k,threshold,rules"));
}
