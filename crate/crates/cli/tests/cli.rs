use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn shatter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shatter")).args(args).env("RUST_LOG", "off").output().unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

fn read(p: &str) -> String {
    std::fs::read_to_string(Path::new(p)).unwrap()
}

#[test]
fn gen_writes_regular_edge_lists() {
    let dir = TempDir::new().unwrap();
    let (a, b, empty) = (path(&dir, "a.txt"), path(&dir, "b.txt"), path(&dir, "e.txt"));
    assert!(shatter(&["gen", "--gen", "dregular:100:4", "--seed", "9", "--out", &a]).status.success());
    assert!(shatter(&["gen", "--gen", "dregular:100:4", "--seed", "9", "--out", &b]).status.success());
    assert_eq!(read(&a).lines().count(), 200);
    assert_eq!(read(&a), read(&b));
    assert!(shatter(&["gen", "--gen", "dregular:0:0", "--out", &empty]).status.success());
    assert_eq!(read(&empty), "");
}

#[test]
fn gen_writes_list_instances() {
    let dir = TempDir::new().unwrap();
    let p = path(&dir, "lists.txt");
    assert!(shatter(&["gen", "--gen", "lists:50:12:4", "--seed", "1", "--out", &p]).status.success());
    assert!(read(&p).starts_with("lists 50"));
}

#[test]
fn one_part_split_passes() {
    let out = shatter(&["run", "--algo", "split", "--gen", "dregular:60:6", "--k", "1", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["check"]["pass"], true);
}

#[test]
fn single_edge_uses_one_color() {
    let dir = TempDir::new().unwrap();
    let (g, art) = (path(&dir, "g.txt"), path(&dir, "a.json"));
    std::fs::write(&g, "0 1\n").unwrap();
    let out = shatter(&["run", "--algo", "edge-color", "--input", &g, "--seed", "0", "--out", &art]);
    assert_eq!(out.status.code(), Some(0));
    let artifact: serde_json::Value = serde_json::from_str(&read(&art)).unwrap();
    assert_eq!(artifact["palette"], 1);
    assert_eq!(artifact["colors"], serde_json::json!([[0, 1, 0]]));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    for algo in ["split", "qdivide", "edge-color", "defective"] {
        let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
        let args = |out: &str| {
            vec!["run", "--algo", algo, "--gen", "dregular:400:16", "--seed", "5", "--out"]
                .into_iter()
                .map(String::from)
                .chain([out.to_owned()])
                .collect::<Vec<_>>()
        };
        let run = |out: &str| shatter(&args(out).iter().map(String::as_str).collect::<Vec<_>>());
        assert!(run(&a).status.success(), "{algo}");
        assert!(run(&b).status.success(), "{algo}");
        assert_eq!(read(&a), read(&b), "{algo}");
        assert_eq!(read(&format!("{a}.report.json")), read(&format!("{b}.report.json")), "{algo}");
    }
}

#[test]
fn verify_accepts_run_output_and_rejects_tampering() {
    let dir = TempDir::new().unwrap();
    let (g, art) = (path(&dir, "g.txt"), path(&dir, "a.json"));
    assert!(shatter(&["gen", "--gen", "dregular:300:32", "--seed", "4", "--out", &g]).status.success());
    assert!(shatter(&["run", "--algo", "split", "--input", &g, "--seed", "4", "--out", &art]).status.success());
    assert_eq!(shatter(&["verify", "--algo", "split", "--input", &g, "--artifact", &art]).status.code(), Some(0));

    let mut artifact: serde_json::Value = serde_json::from_str(&read(&art)).unwrap();
    let parts = artifact["parts"].as_array_mut().unwrap();
    parts.iter_mut().for_each(|p| *p = 0.into());
    std::fs::write(&art, artifact.to_string()).unwrap();
    assert_eq!(shatter(&["verify", "--algo", "split", "--input", &g, "--artifact", &art]).status.code(), Some(1));
}

#[test]
fn errors_exit_with_two() {
    assert_eq!(shatter(&["run", "--algo", "split", "--gen", "dregular:10:20", "--seed", "0"]).status.code(), Some(2));
    assert_eq!(shatter(&["run", "--algo", "split", "--gen", "torus:3:3", "--seed", "0"]).status.code(), Some(2));
    assert_eq!(
        shatter(&["run", "--algo", "split", "--input", "/nonexistent/graph", "--seed", "0"]).status.code(),
        Some(2)
    );
}

const HEADER: &str =
    "algo,n,degree,k,q,eps,seed,pass_rate,max_discrepancy,frozen_fraction,max_bad_component,rounds,bits";

fn bench(args: &[&str]) -> Vec<String> {
    let mut full = vec!["bench", "--algo", "split"];
    full.extend_from_slice(args);
    let out = shatter(&full);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<String> = text.lines().map(String::from).collect();
    assert_eq!(lines[0], HEADER);
    lines[1..].to_vec()
}

#[test]
fn bench_row_counts() {
    assert_eq!(bench(&["--n", "300", "--degree", "16", "--k", "2"]).len(), 1);
    assert!(bench(&["--n", "", "--degree", "16"]).is_empty());
    let rows = bench(&["--n", "300", "--degree", "16", "--k", "1,2", "--seeds", "3"]);
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.split(',').count() == HEADER.split(',').count()));
    // k = 1 is trivial and always passes.
    assert!(rows.iter().filter(|r| r.split(',').nth(3) == Some("1")).all(|r| r.split(',').nth(7) == Some("1")));
}
