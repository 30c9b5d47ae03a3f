use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn visworld(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_visworld"))
        .args(args)
        .env("VISWORLD_OUT", out)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn generate_maze_test_split() {
    let dir = tempfile::tempdir().unwrap();
    let o = visworld(&["generate", "--task", "maze", "--split", "test", "--count", "480", "--wm", "implicit", "--seed", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("manifest digest"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["entries"]["maze/test/implicit"]["count"], 480);
    let lines = fs::read_to_string(dir.path().join("data/maze/test_implicit.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 480);
}

#[test]
fn validation_and_io_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = visworld(&["generate", "--task", "maze", "--count", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = visworld(&["generate", "--task", "maze", "--count", "2", "--wm", "sketch"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = visworld(&["evaluate", "--predictions", "/nonexistent/preds.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = visworld(&["inspect", "--data", "/nonexistent/data.jsonl", "--id", "x"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn evaluate_reports_and_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = visworld(&["generate", "--task", "sokoban", "--count", "3", "--seed", "4"], dir.path());
    assert!(o.status.success());
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let o = visworld(&["evaluate", "--predictions", empty.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("reports/eval.json")).unwrap()).unwrap();
    assert_eq!(report["overall"]["count"], 0);

    let recs = fs::read_to_string(dir.path().join("data/sokoban/test_visual.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(recs.lines().next().unwrap()).unwrap();
    let preds = dir.path().join("preds.jsonl");
    fs::write(
        &preds,
        format!("{{\"instance_id\": {}, \"raw_text\": \"Answer: 1000\"}}\n", first["id"]),
    )
    .unwrap();
    let o = visworld(&["evaluate", "--predictions", preds.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "wrong answers are still a successful evaluation");
    assert!(stdout(&o).contains("sokoban"));

    fs::write(&preds, "{\"instance_id\": \"a\", \"raw_text\": \"\"}\n{\"id\": 3}\n").unwrap();
    let o = visworld(&["evaluate", "--predictions", preds.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn theory_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = visworld(&["theory", "--check", "corollary", "--trials", "50", "--seed", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let o = visworld(&["theory", "--check", "all", "--trials", "100"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("reports/theory_all.json")).unwrap()).unwrap();
    for check in ["kl", "mi", "corollary", "transfer"] {
        assert_eq!(report[check]["passed"], true, "{check}");
    }
}

#[test]
fn inspect_and_render() {
    let dir = tempfile::tempdir().unwrap();
    let o = visworld(&["inspect", "--task", "paper_folding", "--split", "test", "--seed", "9"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("params: folds=4,grid_size=8"), "{text}");
    assert!(text.contains("image_ref"));

    visworld(&["generate", "--task", "maze", "--count", "1", "--wm", "visual"], dir.path());
    let line = fs::read_to_string(dir.path().join("data/maze/test_visual.jsonl")).unwrap();
    let rec: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    let id = rec["id"].as_str().unwrap();
    let o = visworld(&["inspect", "--data", dir.path().to_str().unwrap(), "--id", id], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("image_ref"));

    let out = dir.path().join("explicit");
    let o = visworld(&["render", "--data", dir.path().to_str().unwrap(), "--id", id, "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let pngs = fs::read_dir(out.join("render").join(id)).unwrap().count();
    assert_eq!(pngs, stdout(&o).lines().count());
    assert!(pngs >= 2);
    // The explicit flag beats the environment.
    assert!(!dir.path().join("render").exists());
}
