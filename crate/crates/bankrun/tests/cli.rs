use std::path::Path;
use std::process::{Command, Output};

fn bankrun(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bankrun")).args(args).current_dir(dir).env_remove("BANKRUN_LLM_TOKEN").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn screen_before_ingest_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = bankrun(dir.path(), &["screen"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("ingest"));
}

#[test]
fn unknown_preset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = bankrun(dir.path(), &["report", "fig99"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("table1"), "known presets are listed");
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[paths]\nnot_a_key = 1\n").unwrap();
    let o = bankrun(dir.path(), &["--config", "c.toml", "ingest"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = bankrun(dir.path(), &["--config", "missing.toml", "ingest"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_then_pipeline_in_mock_mode() {
    let dir = tempfile::tempdir().unwrap();
    let o = bankrun(dir.path(), &["--seed", "3", "synth", "--out", ".", "--articles", "200", "--events", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = bankrun(dir.path(), &["--mock-llm", "--jobs", "2", "pipeline"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["episodes.jsonl", "table1.csv", "provenance.jsonl", "reports/fig1.svg", "audit/extract.jsonl"] {
        assert!(dir.path().join("work").join(f).is_file(), "{f}");
    }
    let o = bankrun(dir.path(), &["tabulate", "--out", "t.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(t.starts_with("sample,runs,"));
}

#[test]
fn http_mode_without_a_reachable_service_exits_5_and_logs_no_token() {
    let dir = tempfile::tempdir().unwrap();
    let o = bankrun(dir.path(), &["--seed", "4", "synth", "--out", ".", "--articles", "60", "--events", "6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = std::fs::read_to_string(dir.path().join("bankrun.toml")).unwrap();
    // nothing listens on port 9 of localhost
    let cfg = cfg.replace(
        "mode = \"mock\"",
        "mode = \"http\"\nbase_url = \"http://127.0.0.1:9/v1\"\ntimeout_secs = 1\nretry = { max_attempts = 2, initial_backoff_ms = 1, multiplier = 2.0, max_backoff_ms = 2 }",
    );
    std::fs::write(dir.path().join("bankrun.toml"), cfg).unwrap();
    let token = "tok-3d0c2b7e";
    for step in ["ingest", "screen"] {
        assert!(bankrun(dir.path(), &[step]).status.success());
    }
    let o = Command::new(env!("CARGO_BIN_EXE_bankrun"))
        .arg("extract")
        .current_dir(dir.path())
        .env("BANKRUN_LLM_TOKEN", token)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    let mut seen = 0;
    for f in ["audit/extract.jsonl", "provenance.jsonl"] {
        if let Ok(text) = std::fs::read_to_string(dir.path().join("work").join(f)) {
            seen += 1;
            assert!(!text.contains(token), "{f}");
        }
    }
    assert!(seen > 0);
}
