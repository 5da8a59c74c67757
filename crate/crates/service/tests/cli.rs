//! Runs the `fairsense` binary as a subprocess.

mod common;

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use common::*;
use fairsense_core::index::load_index;
use fairsense_core::risk::{parse_csv, CSV_HEADER};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fairsense"));
    c.env_remove("FAIRSENSE_CONFIG").env("RUST_LOG", "warn");
    c
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("fairsense.toml");
    std::fs::write(&path, stub_config_text(dir)).unwrap();
    path
}

#[test]
fn requires_a_config() {
    let out = bin().args(["analyze-text", "hello"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIRSENSE_CONFIG"));
}

#[test]
fn analyze_text_prints_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = run(bin()
        .arg("--config")
        .arg(&cfg)
        .args(["analyze-text", "--id", "x1", "Some people say that women are not suitable for leadership roles"]));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["content_id"], "x1");
    assert_eq!(v["findings"][0]["category"], "gender");
}

#[test]
fn env_var_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = run(bin()
        .env("FAIRSENSE_CONFIG", &cfg)
        .args(["--config", "/nonexistent.toml", "analyze-text", "The meeting is at noon."])
        .stdin(Stdio::null()));
    assert!(!out.stdout.is_empty());
}

#[test]
fn index_build_then_risk_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out_dir = dir.path().join("built");
    run(bin().arg("--config").arg(&cfg).args(["index", "build", "--risks"])
        .arg(fixture("risks.csv")).arg("--rmf").arg(fixture("rmf.csv")).arg("--out").arg(&out_dir));
    let risks = load_index(out_dir.join("risks.idx")).unwrap();
    assert_eq!(risks.len(), 8);
    assert_eq!(load_index(out_dir.join("rmf.idx")).unwrap().len(), 12);
    assert_eq!(risks.embedder_tag(), format!("stub:fnv1a64:{STUB_DIM}"));

    let csv_path = dir.path().join("risk.csv");
    run(bin().arg("--config").arg(&cfg)
        .args(["risk", "an AI tool screening job applicants' resumes", "--out"]).arg(&csv_path));
    let bytes = std::fs::read(&csv_path).unwrap();
    assert!(bytes.starts_with(CSV_HEADER.as_bytes()));
    let rows = parse_csv(&bytes).unwrap();
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().any(|r| r.risk_id == "R3"));
}

#[test]
fn batch_text_verb() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out_csv = dir.path().join("out.csv");
    let out = run(bin().arg("--config").arg(&cfg).arg("batch-text").arg(fixture("texts_100.csv")).arg(&out_csv));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["input_count"], 100);
    assert_eq!(v["success_count"], 100);
    assert_eq!(std::fs::read_to_string(out_csv).unwrap().lines().count(), 101);
}

#[test]
fn analyze_image_verb() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let img = dir.path().join("poster.png");
    std::fs::write(&img, fairsense_core::testkit::poster_png("NO GIRLS ALLOWED")).unwrap();
    let out = run(bin().arg("--config").arg(&cfg).arg("analyze-image").arg(&img));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["components"]["image"].as_f64().unwrap() > 0.0);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http_get(port: u16, path: &str) -> Option<String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut out = String::new();
    s.read_to_string(&mut out).ok()?;
    Some(out)
}

#[test]
fn serve_answers_and_shuts_down_on_sigterm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let port = free_port();
    let mut child = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["serve", "--port", &port.to_string()])
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let reply = loop {
        if let Some(r) = http_get(port, "/v1/health") {
            break r;
        }
        assert!(Instant::now() < deadline, "service did not come up");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("\"status\":\"ok\""));

    let killed = Command::new("kill").args(["-TERM", &child.id().to_string()]).status().unwrap();
    assert!(killed.success());
    let deadline = Instant::now() + Duration::from_secs(10);
    let status = loop {
        if let Some(s) = child.try_wait().unwrap() {
            break s;
        }
        assert!(Instant::now() < deadline, "service did not stop");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(status.success());
}

#[test]
fn serve_fails_when_port_is_busy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let holder = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = holder.local_addr().unwrap().port();
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["serve", "--port", &port.to_string()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot listen"));
}
