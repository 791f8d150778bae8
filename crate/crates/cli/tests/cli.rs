use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_capgrowth"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/two_country.csv")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn analyzed(dir: &TempDir) -> PathBuf {
    let snap = dir.path().join("snap.json");
    let out = run(
        dir.path(),
        &["analyze", "--input", fixture().to_str().unwrap(), "--screen", "0.01", "--weight", "gdp", "--out", "snap.json"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    snap
}

#[test]
fn analyze_writes_snapshot() {
    let dir = TempDir::new().unwrap();
    let snap = analyzed(&dir);
    let text = std::fs::read_to_string(snap).unwrap();
    assert!(text.contains("\"schema_version\": \"capgrowth.snapshot/1\""));
    // Nothing but the snapshot is left behind by the atomic write.
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec!["snap.json"]);
}

#[test]
fn negative_screen_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["analyze", "--input", fixture().to_str().unwrap(), "--screen", "-1", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.starts_with("UsageError: "), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn missing_input_is_data_error() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["analyze", "--input", "nope.csv", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("DataError: ReadFailed: "));
    let out = run(dir.path(), &["report", "--snapshot", "nope.json", "--table", "headline"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("DataError: SnapshotMissing: "));
}

#[test]
fn report_is_byte_stable() {
    let dir = TempDir::new().unwrap();
    analyzed(&dir);
    let args = ["report", "--snapshot", "snap.json", "--table", "headline", "--format", "csv"];
    let a = run(dir.path(), &args);
    let b = run(dir.path(), &args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("screen,weighting,statistic,value,slope_se,n,t_vs_one,h0\n"));
    assert!(text.contains("mean_ratio,0.5453,"));
}

#[test]
fn report_writes_named_files_into_directory() {
    let dir = TempDir::new().unwrap();
    analyzed(&dir);
    std::fs::create_dir(dir.path().join("out")).unwrap();
    for args in [
        vec!["--table", "ladder", "--format", "json"],
        vec!["--table", "per-country", "--format", "text"],
        vec!["--figure", "theta", "--screen", "0.025"],
    ] {
        let mut full = vec!["report", "--snapshot", "snap.json", "--out", "out"];
        full.extend(args);
        let out = run(dir.path(), &full);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let mut names: Vec<_> = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        vec![
            "figure_theta_screen-0.025_gdp.svg",
            "table_ladder_screen-0.01_gdp.json",
            "table_per-country_screen-0.01_gdp.txt"
        ]
    );
}

#[test]
fn report_needs_table_or_figure() {
    let dir = TempDir::new().unwrap();
    analyzed(&dir);
    let out = run(dir.path(), &["report", "--snapshot", "snap.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_then_analyze_thrift_world() {
    let dir = TempDir::new().unwrap();
    for format in ["panel", "wid"] {
        let out = run(dir.path(), &["generate", "--world", "thrift", "--countries", "8", "--seed", "3", "--format", format, "--out", "w.csv"]);
        assert!(out.status.success(), "{}", stderr(&out));
        let out = run(dir.path(), &["analyze", "--input", "w.csv", "--out", "w.json"]);
        assert!(out.status.success(), "{}", stderr(&out));
        let out = run(dir.path(), &["report", "--snapshot", "w.json", "--table", "headline", "--format", "json"]);
        let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        for row in rows.as_array().unwrap() {
            assert_eq!(row["value"].as_f64(), Some(1.0), "{format}: {row}");
        }
    }
}

#[test]
fn generate_single_path_matches_recursion() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["generate", "--world", "thrift", "--path", "0.10,0.20", "--out", "one.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("one.csv")).unwrap();
    let k: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!((k[0] - 100.0).abs() < 1e-12 && (k[1] - 110.0).abs() < 1e-12 && (k[2] - 132.0).abs() < 1e-12);
}

#[test]
fn ingest_normalizes_and_drops_incomplete_countries() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["ingest", "--input", fixture().to_str().unwrap(), "--out", "panel.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("panel.csv")).unwrap();
    assert!(text.starts_with("country,year,s_net,k,gdp\n"));
    assert!(text.contains("AA,2000,5,100,50"));
    assert!(!text.contains("CC,"));
}

#[test]
fn ingest_reports_malformed_rows() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("bad.csv"),
        "country;variable;percentile;year;value\nAA;mnweal999i;p0p100;2000;100\nAA;mnweal999i;p0p100;2001;oops\nAA;msavin999i;p0p100;2001;5\nAA;mnweal999i;p0p100;2002;110\nAA;msavin999i;p0p100;2002;10\n",
    )
    .unwrap();
    let out = run(dir.path(), &["ingest", "--input", "bad.csv", "--out", "p.csv"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
    let out = run(dir.path(), &["ingest", "--input", "bad.csv", "--out", "p2.csv", "--strict"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("DataError: MalformedRows: "));
}

#[test]
fn identities_from_flags_and_file() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["identities", "--d-k", "-1.5", "--c-s", "0.5", "--c-p", "2", "--w-s", "0.3", "--depreciation", "0.1", "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let body: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["report"]["pass"], true);
    assert!(body["report"]["residual"].as_f64().unwrap().abs() <= 1e-12);

    std::fs::write(dir.path().join("flows.toml"), "d_k = 1.0\nc_s = 0.2\nc_p = 0.7\nw_s = 0.1\ndepreciation = 0.05\n").unwrap();
    let out = run(dir.path(), &["identities", "--ledger", "flows.toml"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8(out.stdout).unwrap().contains("PASS"));

    std::fs::write(
        dir.path().join("broken.toml"),
        "d_k = 1\nc = 3\nc_s = 1\nc_p = 2\nw_s = 0\ndepreciation = 0\nd_h = 5\ny = 8\n",
    )
    .unwrap();
    let out = run(dir.path(), &["identities", "--ledger", "broken.toml"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("DataError: InvariantViolation: "));
}

#[test]
fn analyze_honours_config_and_weight_overrides() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), "screen = 0.05\nweighting = \"unweighted\"\n").unwrap();
    let out = run(dir.path(), &["analyze", "--input", fixture().to_str().unwrap(), "--config", "cfg.toml", "--out", "a.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let snap: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(snap["config"]["screen"], 0.05);
    assert_eq!(snap["config"]["weighting"], "unweighted");

    std::fs::write(dir.path().join("bad.toml"), "screen = \"wide\"\n").unwrap();
    let out = run(dir.path(), &["analyze", "--input", fixture().to_str().unwrap(), "--config", "bad.toml", "--out", "b.json"]);
    assert_eq!(out.status.code(), Some(2));

    // Equal weights for every country-year reproduce the unweighted means.
    let mut weights = String::from("country,year,weight\n");
    for c in ["AA", "BB"] {
        for y in 2000..=2003 {
            weights.push_str(&format!("{c},{y},1\n"));
        }
    }
    std::fs::write(dir.path().join("w.csv"), weights).unwrap();
    let out = run(dir.path(), &["analyze", "--input", fixture().to_str().unwrap(), "--weights", "w.csv", "--out", "w.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run(dir.path(), &["analyze", "--input", fixture().to_str().unwrap(), "--weight", "unweighted", "--out", "u.json"]);
    assert!(out.status.success());
    let load = |name: &str| -> serde_json::Value {
        serde_json::from_slice(&std::fs::read(dir.path().join(name)).unwrap()).unwrap()
    };
    assert_eq!(load("w.json")["headline"]["mean_ratio"], load("u.json")["headline"]["mean_ratio"]);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http_get(port: u16, path: &str) -> Option<String> {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).ok()?;
    write!(stream, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut text = String::new();
    stream.read_to_string(&mut text).ok()?;
    Some(text)
}

#[test]
fn serve_answers_and_reports_port_in_use() {
    let dir = TempDir::new().unwrap();
    analyzed(&dir);
    let port = free_port();
    let mut child = bin()
        .current_dir(dir.path())
        .args(["serve", "--snapshot", "snap.json"])
        .env("CAPGROWTH_PORT", port.to_string())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let response = loop {
        if let Some(r) = http_get(port, "/meta") {
            break r;
        }
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("\"schema_version\":\"capgrowth.snapshot/1\""));
    let missing = http_get(port, "/series/ZZ").unwrap();
    assert!(missing.starts_with("HTTP/1.1 404"));

    let busy = run(dir.path(), &["serve", "--snapshot", "snap.json", "--port", &port.to_string()]);
    assert_eq!(busy.status.code(), Some(3));
    assert!(stderr(&busy).starts_with("DataError: PortInUse: "));
    child.kill().unwrap();
    child.wait().unwrap();
}

#[test]
fn serve_rejects_bad_port_and_missing_snapshot() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["serve", "--snapshot", "snap.json", "--port", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["serve", "--snapshot", "snap.json", "--port", "8123"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("DataError: SnapshotMissing: "));
}
