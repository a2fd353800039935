use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

const MATRIX: &str = "2 2\n0 0 -3\n0 1 -1\n1 0 -2\n1 1 -4\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mht-assoc"))
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mht-assoc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn totals(stdout: &[u8]) -> Vec<f64> {
    String::from_utf8_lossy(stdout)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn solve_lists_k_best() {
    let m = scratch("solve.txt", MATRIX);
    for config in ["v1", "v2", "v3", "v4"] {
        let out = run(&["solve", "--input", m.to_str().unwrap(), "--k", "7", "--config", config]);
        assert!(out.status.success());
        assert_eq!(totals(&out.stdout), vec![-7.0, -4.0, -3.0, -3.0, -2.0, -1.0, 0.0]);
    }
}

#[test]
fn solve_reads_stdin_and_writes_file() {
    let target = scratch("solve_out.txt", "");
    let mut child = bin()
        .args(["solve", "--input", "-", "--k", "2", "--out", target.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(MATRIX.as_bytes()).unwrap();
    assert!(child.wait_with_output().unwrap().status.success());
    let text = std::fs::read_to_string(target).unwrap();
    assert_eq!(totals(text.as_bytes()), vec![-7.0, -4.0]);
    assert!(text.contains("1\t-7\t0 1"));
    assert!(text.contains("2\t-4\t- 1"));
}

#[test]
fn gate_one_keeps_row_minimum() {
    let m = scratch("gate.txt", MATRIX);
    let out = run(&["solve", "--input", m.to_str().unwrap(), "--k", "7", "--config", "v4", "--gate", "1"]);
    assert!(out.status.success());
    // only (0,0) and (1,1) survive
    assert_eq!(totals(&out.stdout), vec![-7.0, -4.0, -3.0, 0.0]);
}

#[test]
fn oracle_agrees_with_solver() {
    let m = scratch("oracle.txt", MATRIX);
    let out = run(&["oracle", "--input", m.to_str().unwrap(), "--k", "10"]);
    assert!(out.status.success());
    assert_eq!(totals(&out.stdout), vec![-7.0, -4.0, -3.0, -3.0, -2.0, -1.0, 0.0]);
}

#[test]
fn invalid_input_exits_2() {
    let m = scratch("valid.txt", MATRIX);
    assert_eq!(run(&["solve", "--input", m.to_str().unwrap(), "--k", "0"]).status.code(), Some(2));
    let bad = scratch("bad.txt", "2 2\n0 5 1.0\n");
    let out = run(&["solve", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(run(&["bench", "dense", "--sizes", "0"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--input", m.to_str().unwrap(), "--config", "v9"]).status.code(), Some(2));
}

#[test]
fn missing_file_exits_3() {
    let out = run(&["solve", "--input", "/nonexistent/matrix.txt"]);
    assert_eq!(out.status.code(), Some(3));
    let m = scratch("io.txt", MATRIX);
    let out = run(&["solve", "--input", m.to_str().unwrap(), "--out", "/nonexistent/dir/out.txt"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bench_dense_emits_csv() {
    let out = run(&["bench", "dense", "--sizes", "10,15", "--k", "10", "--trials", "2", "--gate", "15"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "size,version,k,trials,mean_ms,median_ms,p95_ms,agree");
    assert_eq!(lines.len(), 9);
    assert!(lines[1..].iter().all(|l| l.ends_with(",2")));
}

#[test]
fn bench_outputs_are_reproducible() {
    let args = ["bench", "gate-sweep", "--sizes", "12", "--k", "20", "--trials", "3", "--seed", "7"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
    let gibbs = ["bench", "gibbs", "--sizes", "10", "--k", "5", "--samples", "10", "--trials", "2", "--seed", "1"];
    let strip = |o: Output| {
        String::from_utf8(o.stdout)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(run(&gibbs)), strip(run(&gibbs)));
}

#[test]
fn bench_mimo_runs() {
    let out = run(&["bench", "mimo", "--sizes", "8", "--k", "10", "--trials", "1", "--versions", "v2,v3"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
}

#[test]
fn fusion_sim_emits_rows() {
    let out = run(&["fusion-sim", "--k-list", "1,5", "--trials", "2", "--seed", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("k,trials,mean_fnr"));
    assert_eq!(text.lines().count(), 3);
}
