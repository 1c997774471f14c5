use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn tkg(data_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tkg"))
        .arg("--data-dir")
        .arg(data_dir)
        .args(args)
        .env("TKG_DIM", "64")
        .env("RUST_LOG", "warn")
        .env_remove("TKG_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_transcript(dir: &Path, n: usize) -> std::path::PathBuf {
    let people = ["Alice", "Bob", "Carol"];
    let cities = ["Paris", "Lisbon", "Osaka", "Denver", "Cairo"];
    let path = dir.join("chat.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    for i in 0..n {
        let line = serde_json::json!({
            "actor": people[i % 3],
            "content": format!("I visited {} with {} last week.", cities[i % 5], people[(i + 1) % 3]),
            "timestamp": format!("2024-03-{:02}T10:{:02}:00Z", 1 + i / 30, i % 60),
        });
        writeln!(f, "{line}").unwrap();
    }
    path
}

#[test]
fn ingest_then_search() {
    let dir = TempDir::new().unwrap();
    let transcript = write_transcript(dir.path(), 60);
    let out = stdout(&tkg(dir.path(), &["-g", "chat", "ingest", transcript.to_str().unwrap()]));
    let summary: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(summary["messages"], 60);
    assert_eq!(summary["totals"]["episodes"], 60);
    assert!(summary["totals"]["communities"].as_u64().unwrap() >= 1);
    assert!(dir.path().join("chat.tkg").exists());

    let context = stdout(&tkg(dir.path(), &["-g", "chat", "search", "Who visited Osaka?", "--limit", "5"]));
    assert!(context.contains("Osaka"), "{context}");
    assert!(context.contains("<FACTS>"), "{context}");

    let json = stdout(&tkg(dir.path(), &["-g", "chat", "search", "Lisbon", "--json", "--rerank", "mmr"]));
    let r: Value = serde_json::from_str(&json).unwrap();
    assert!(!r["edges"].as_array().unwrap().is_empty());
}

#[test]
fn search_on_a_missing_graph_prints_an_empty_context() {
    let dir = TempDir::new().unwrap();
    let context = stdout(&tkg(dir.path(), &["search", "anything"]));
    assert!(context.contains("<FACTS>"), "{context}");
    assert!(!dir.path().join("default.tkg").exists());
}

#[test]
fn synthetic_bench_reports_every_stage() {
    let dir = TempDir::new().unwrap();
    let args = [
        "bench", "--synthetic", "--entities", "300", "--edges", "1200", "--num-queries", "20", "--warmup", "2", "--json",
    ];
    let report: Value = serde_json::from_str(&stdout(&tkg(dir.path(), &args))).unwrap();
    assert_eq!(report["queries"], 20);
    assert_eq!(report["graph"]["entities"], 300);
    for stage in ["search", "rerank", "construct", "total"] {
        let s = &report["latency_ms"][stage];
        let (p50, p95) = (s["p50"].as_f64().unwrap(), s["p95"].as_f64().unwrap());
        assert!(0.0 <= p50 && p50 <= p95, "{stage}: {s}");
    }
    assert!(report["context_tokens"]["max"].as_f64().unwrap() > 0.0);
}

#[test]
fn bad_input_fails_with_nonzero_exit() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"actor\":\"A\",\"content\":\"x\",\"timestamp\":\"2024-01-01\"}\nnot json\n").unwrap();
    let o = tkg(dir.path(), &["ingest", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!tkg(dir.path(), &["ingest", "/nonexistent.jsonl"]).status.success());
    assert!(!tkg(dir.path(), &["-g", "no/slash", "search", "x"]).status.success());
    assert!(!tkg(dir.path(), &["bench"]).status.success());
}
