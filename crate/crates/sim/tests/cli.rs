use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn falcon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_falcon"))
        .args(args)
        .output()
        .unwrap()
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run_to(name: &str, out: &Path, extra: &[&str]) -> Output {
    let path = scenario(name);
    let mut args = vec!["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    falcon(&args)
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let text = std::fs::read_to_string(path).unwrap();
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    csv::Reader::from_reader(body.as_bytes())
        .records()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn favorable_run_spends_no_time_in_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to("favorable-4.toml", dir.path(), &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    for f in [
        "events.jsonl",
        "metrics.csv",
        "metrics.jsonl",
        "stages.csv",
        "throughput.csv",
        "chains.csv",
        "report.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let stages = csv_rows(&dir.path().join("stages.csv"));
    // 4 correct nodes x 4 blocks x 4 checked instances
    assert_eq!(stages.len(), 64);
    // columns: node,instance,index,digest,proposed,broadcast,agreement,sorting,committed
    for r in &stages {
        assert_eq!(&r[6], "0");
        assert_eq!(&r[5], "3");
    }
}

#[test]
fn crashed_index_takes_the_shortcut() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to("crash-1-of-4.toml", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let events = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    let outputs: Vec<serde_json::Value> = events
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["kind"] == "aaba_output" && v["index"] == 4)
        .collect();
    assert!(!outputs.is_empty());
    for v in outputs {
        assert_eq!(v["detail"]["bit"], 0);
        assert_eq!(v["detail"]["path"], "shortcut");
    }
}

#[test]
fn malformed_scenario_exits_nonzero_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[system]\nn = 4\n[run]\ninstances = 2\ncolour = \"red\"\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = falcon(&["run", bad.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
    let missing = tmp.path().join("nope.toml");
    assert_eq!(falcon(&["run", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn seed_and_mode_overrides_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run_to(
            "favorable-7.toml",
            d.path(),
            &["--seed", "42", "--mode", "random"],
        );
        assert_eq!(out.status.code(), Some(0));
    }
    run_to(
        "favorable-7.toml",
        c.path(),
        &["--seed", "43", "--mode", "random"],
    );
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "events.jsonl"), read(&b, "events.jsonl"));
    assert_eq!(read(&a, "metrics.csv"), read(&b, "metrics.csv"));
    assert_ne!(read(&a, "events.jsonl"), read(&c, "events.jsonl"));
    let report: serde_json::Value = serde_json::from_slice(&read(&a, "report.json")).unwrap();
    assert_eq!(report["mode"], "random");
    assert_eq!(report["seed"], 42);
}

#[test]
fn check_reports_every_file_and_fails_on_bad_config() {
    let out = falcon(&["check", scenario("").to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 7);

    let tmp = tempfile::tempdir().unwrap();
    std::fs::copy(scenario("favorable-4.toml"), tmp.path().join("a.toml")).unwrap();
    std::fs::write(
        tmp.path().join("b.toml"),
        "[system]\nn = 3\nf = 1\n[run]\ninstances = 1\n",
    )
    .unwrap();
    let out = falcon(&["check", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn metric_selection_limits_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to("slow-agreement-4.toml", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!dir.path().join("events.jsonl").exists());
    assert!(dir.path().join("stages.csv").exists());
    assert!(dir.path().join("report.json").exists());
}
