use std::path::Path;
use std::process::{Command, Output};

fn mgce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgce")).args(args).env_remove("MGCE_OUT").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = mgce(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr).to_string();
    assert_eq!(text.trim_end().lines().count(), 1, "{text}");
    text.trim_end().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_cluster_priority_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let summary = ok(&["generate", "--preset", "easy", "--seed", "7", "--out", p(&data)]);
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["n"], 400);
    assert_eq!(v["num_ids"], 50);
    for f in ["features.feat", "split.json", "synth.json"] {
        assert!(data.join(f).exists(), "{f}");
    }

    let clusters = dir.path().join("clusters");
    let summary = ok(&["cluster", "--features", p(&data), "--d", "0.1", "--out", p(&clusters)]);
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["num_clusters"], 50);
    let labels = std::fs::read_to_string(clusters.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 400);

    let prio = dir.path().join("prio");
    let summary = ok(&["priority", "--features", p(&data.join("features.feat")), "--ladder", "0.05:0.15:0.05", "--out", p(&prio)]);
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["t"], 3);
    assert!(prio.join("priority.csv").exists());

    let raw = ok(&["eval", "--data", p(&data)]);
    let v: serde_json::Value = serde_json::from_str(&raw).unwrap();
    assert!(v["map"].as_f64().unwrap() > 0.99);
}

#[test]
fn outputs_are_protected_and_force_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    ok(&["generate", "--preset", "medium", "--seed", "1", "--out", p(&out)]);
    let first = std::fs::read(out.join("features.feat")).unwrap();

    let again = mgce(&["generate", "--preset", "medium", "--seed", "1", "--out", p(&out)]);
    assert!(!again.status.success());
    assert!(stderr_line(&again).starts_with("output_exists: "));

    ok(&["generate", "--preset", "medium", "--seed", "1", "--out", p(&out), "--force"]);
    assert_eq!(std::fs::read(out.join("features.feat")).unwrap(), first);
}

#[test]
fn train_with_zero_epochs_scores_the_untrained_encoder() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    ok(&["train", "--preset", "easy", "--seed", "7", "--epochs", "0", "--out", p(&out)]);
    let eval: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("eval.json")).unwrap()).unwrap();
    assert_eq!(eval["initial"], eval["final"]);
    assert_eq!(std::fs::read_to_string(out.join("train_log.jsonl")).unwrap(), "");

    let scored = ok(&["eval", "--preset", "easy", "--seed", "7", "--encoder", p(&out.join("encoder.bin"))]);
    let v: serde_json::Value = serde_json::from_str(&scored).unwrap();
    assert_eq!(v, eval["final"]);

    // The written config reproduces the run.
    let cfg = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(cfg.contains("epochs = 0"), "{cfg}");
}

#[test]
fn train_reads_a_config_file_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[data]\npreset = \"easy\"\nseed = 3\n[train]\nepochs = 2\nloss = \"hcl\"\nd = 0.1\n").unwrap();
    let out = dir.path().join("t");
    ok(&["train", "--config", p(&cfg), "--epochs", "1", "--out", p(&out)]);
    let log = std::fs::read_to_string(out.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1);
    let line: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(line["epoch"], 1);
    assert_eq!(line["wall_ms"], 0);
}

#[test]
fn sweep_writes_a_table_with_seed_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    ok(&[
        "sweep", "--axis", "gamma", "--values", "0.1,0.3", "--seeds", "1,2", "--preset", "easy", "--epochs", "1", "--loss",
        "hcl", "--d", "0.1", "--out", p(&out),
    ]);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "setting,map,cmc1,cmc5,cmc10,seed");
    assert_eq!(lines.len(), 1 + 2 * 4);
    assert!(lines[3].ends_with(",mean") && lines[4].ends_with(",std"));
}

#[test]
fn errors_are_single_coded_lines() {
    let unknown_axis = mgce(&["sweep", "--axis", "beta"]);
    assert_eq!(unknown_axis.status.code(), Some(1));
    let line = stderr_line(&unknown_axis);
    assert!(line.starts_with("usage_error: ") && line.contains("d, ladder_range, delta, gamma"), "{line}");

    let bad_flag = mgce(&["cluster", "--bogus"]);
    assert_eq!(bad_flag.status.code(), Some(2));
    assert!(stderr_line(&bad_flag).starts_with("usage_error: "));

    let missing = mgce(&["cluster", "--features", "/nonexistent/x.feat", "--d", "0.3", "--out", "/tmp/unused-mgce"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr_line(&missing).starts_with("io_error: "));

    let bad_ladder = mgce(&["priority", "--features", "x", "--ladder", "0.6:0.4:0.05"]);
    assert_eq!(bad_ladder.status.code(), Some(1));
    assert!(stderr_line(&bad_ladder).contains(": "));

    let version = ok(&["--version"]);
    assert!(version.starts_with("mgce "));
}

#[test]
fn bundled_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/medium.toml");
    let cfg = mgce::config::RunConfig::load(&path).unwrap();
    assert_eq!(cfg.train.ladder.t(), 5);
    assert_eq!(cfg.data.seed.0, 7);
}
