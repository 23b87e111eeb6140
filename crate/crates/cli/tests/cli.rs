use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn replay(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/replay").join(rel)
}

fn scinews<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scinews"))
        .args(args)
        .env_remove("SCINEWS_LLM_ENDPOINT")
        .env_remove("SCINEWS_LLM_API_KEY")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn detect_args(out: &Path, arch: &str) -> Vec<String> {
    let mut args = vec!["detect".to_string()];
    for (flag, file) in [
        ("--articles", "articles.jsonl"),
        ("--pairings", "pairings.jsonl"),
        ("--abstracts", "abstracts.jsonl"),
        ("--cassette", "cassette.jsonl"),
    ] {
        args.push(flag.into());
        args.push(replay(file).display().to_string());
    }
    for a in ["--arch", arch, "--strategy", "dov-cot", "--out", s(out)] {
        args.push(a.into());
    }
    args
}

#[test]
fn detect_replay_matches_frozen_verdicts_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verdicts.jsonl");
    let report = dir.path().join("report");
    let audit = dir.path().join("audit");
    let mut args = detect_args(&out, "sif");
    args.extend(["--report-dir", s(&report), "--audit-dir", s(&audit)].map(String::from));
    let o = scinews(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(replay("expected_verdicts.jsonl")).unwrap());
    assert_eq!(std::fs::read_to_string(dir.path().join("verdicts.failures.jsonl")).unwrap(), "");
    assert_eq!(std::fs::read_dir(report.join("radar")).unwrap().count(), 20);
    assert_eq!(std::fs::read_dir(&audit).unwrap().count(), 20);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["architecture"], "SIf");
    assert!(manifest["cassette"]["sha256"].is_string());

    let csv = dir.path().join("metrics.csv");
    let o = scinews(&["evaluate", "--verdicts", s(&out), "--articles", s(&replay("articles.jsonl")), "--out-csv", s(&csv)]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text, std::fs::read_to_string(&csv).unwrap());
    assert!(text.contains("Overall,75.00,69.23,90.00,78.26,9,4,6,1"), "{text}");
}

#[test]
fn index_then_pair_reproduces_committed_pairings() {
    let dir = tempfile::tempdir().unwrap();
    let index = dir.path().join("index.json");
    let pairs = dir.path().join("pairings.jsonl");
    let o = scinews(&["index", "--abstracts", s(&replay("abstracts.jsonl")), "--out", s(&index)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = scinews(&["pair", "--articles", s(&replay("articles.jsonl")), "--index", s(&index), "--out", s(&pairs)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&pairs).unwrap(), std::fs::read(replay("pairings.jsonl")).unwrap());
}

#[test]
fn gate_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pairs.jsonl");
    std::fs::write(
        &input,
        "{\"id\":\"same\",\"generated\":\"the cat sat on the mat\",\"source\":\"the cat sat on the mat\"}\n\
         {\"id\":\"far\",\"generated\":\"a b c\",\"source\":\"x y z\"}\n",
    )
    .unwrap();
    let (kept, rejected, hist) = (dir.path().join("k.jsonl"), dir.path().join("r.jsonl"), dir.path().join("h.csv"));
    let o = scinews(&["gate", "--input", s(&input), "--kept", s(&kept), "--rejected", s(&rejected), "--histogram", s(&hist)]);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(&kept).unwrap().contains("\"same\""));
    assert!(std::fs::read_to_string(&rejected).unwrap().contains("\"far\""));
    let h = std::fs::read_to_string(&hist).unwrap();
    assert!(h.contains("0.0,0.1,1\n") && h.contains("0.9,1.0,1\n"), "{h}");

    let o = scinews(&["stats", "--articles", s(&replay("articles.jsonl"))]);
    assert!(o.status.success());
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stats["article_count"], 20);
}

#[test]
fn ingest_filters_by_keyword() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.jsonl");
    std::fs::write(
        &input,
        "{\"id\":\"a\",\"title\":\"Study finds new variant\",\"body\":\"Text.\"}\n\
         {\"id\":\"b\",\"title\":\"Local sports\",\"body\":\"Nothing here.\"}\n",
    )
    .unwrap();
    let out = dir.path().join("clean.jsonl");
    let o = scinews(&["ingest", "--input", s(&input), "--out", s(&out), "--filter"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains("\"a\""));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.jsonl");

    let o = scinews(&["stats", "--articles", "x.jsonl", "--config", "/nonexistent/run.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = scinews(&["stats", "--articles", "x.jsonl", "--top-k", "9"]);
    assert_eq!(o.status.code(), Some(1));
    let o = scinews(&["detect", "--articles", "a"]);
    assert_eq!(o.status.code(), Some(1));

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\":\"a\"}\n").unwrap();
    let o = scinews(&["stats", "--articles", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));

    // the cassette holds SIf exchanges only, so D2I misses on every article
    let o = scinews(&detect_args(&out, "d2i"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let failures = std::fs::read_to_string(dir.path().join("v.failures.jsonl")).unwrap();
    assert_eq!(failures.lines().count(), 20);

    // no cassette and no endpoint
    let o = scinews(&[
        "detect",
        "--articles",
        s(&replay("articles.jsonl")),
        "--pairings",
        s(&replay("pairings.jsonl")),
        "--abstracts",
        s(&replay("abstracts.jsonl")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_from_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = scinews(&[
        "report",
        "--verdicts",
        s(&replay("expected_verdicts.jsonl")),
        "--articles",
        s(&replay("articles.jsonl")),
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["verdicts.jsonl", "failures.jsonl", "metrics.csv", "metrics.json", "manifest.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert_eq!(std::fs::read_dir(dir.path().join("radar")).unwrap().count(), 20);
}
