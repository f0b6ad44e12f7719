use std::path::Path;
use std::process::{Command, Output};

use diagsim_core::io::{read_path, write_json};
use diagsim_core::report::SimReport;
use diagsim_core::{DiagMatrix, Diagonal, Scalar};

fn diagsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diagsim"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = diagsim(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    diagsim(dir, args).status.code().unwrap()
}

fn save(dir: &Path, name: &str, m: &DiagMatrix) {
    write_json(m, std::fs::File::create(dir.join(name)).unwrap()).unwrap();
}

fn tridiagonal(n: usize) -> DiagMatrix {
    let diagonals = (-1..=1)
        .map(|d: isize| Diagonal {
            offset: d,
            values: (0..n - d.unsigned_abs()).map(|k| Scalar::new(1.0 + k as f64, d as f64)).collect(),
        })
        .collect();
    DiagMatrix::new(n, diagonals).unwrap()
}

fn report(dir: &Path, name: &str) -> SimReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn gen_writes_benchmarks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(d, &["gen", "maxcut-ising", "10", "-o", "mc.bin"]);
    assert!(out.contains("NNZD 1 "), "{out}");
    let m = read_path(&d.join("mc.bin")).unwrap();
    assert_eq!((m.dim(), m.nnzd()), (1024, 1));

    ok(d, &["gen", "heisenberg", "3", "-o", "h.json"]);
    let h = read_path(&d.join("h.json")).unwrap();
    assert_eq!(h.dim(), 8);
    assert!(h.is_hermitian(0.0));
}

#[test]
fn gen_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = diagsim(d, &["gen", "potts", "4", "-o", "x.bin"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown model"));
    assert_eq!(code(d, &["gen", "tfim", "30", "-o", "x.bin"]), 1);
    assert_eq!(code(d, &["gen"]), 1);
    assert!(!d.join("x.bin").exists());
}

#[test]
fn convert_round_trips_formats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    save(d, "t.json", &tridiagonal(6));
    ok(d, &["convert", "t.json", "t.mtx"]);
    ok(d, &["convert", "t.mtx", "t.bin"]);
    ok(d, &["convert", "t.bin", "back.json"]);
    assert_eq!(read_path(&d.join("back.json")).unwrap(), tridiagonal(6));
}

#[test]
fn matmul_identity_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let x = DiagMatrix::new(2, vec![Diagonal { offset: -1, values: vec![Scalar::new(1.0, 0.0)] }, Diagonal { offset: 1, values: vec![Scalar::new(1.0, 0.0)] }]).unwrap();
    save(d, "id.json", &DiagMatrix::identity(2));
    save(d, "x.json", &x);
    ok(d, &["matmul", "id.json", "x.json", "-o", "p.json"]);
    assert_eq!(read_path(&d.join("p.json")).unwrap(), x);

    save(d, "t.json", &tridiagonal(5));
    let out = diagsim(d, &["matmul", "t.json", "t.json", "--check", "-o", "sq.json"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("check: pass"));
    assert_eq!(read_path(&d.join("sq.json")).unwrap().offsets(), vec![-2, -1, 0, 1, 2]);

    assert_eq!(code(d, &["matmul", "t.json", "x.json", "-o", "bad.json"]), 2);
    assert!(!d.join("bad.json").exists());
    assert_eq!(code(d, &["matmul", "missing.json", "x.json"]), 2);
}

#[test]
fn simulate_walkthrough_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    save(d, "t.json", &tridiagonal(5));
    ok(d, &["simulate", "t.json", "t.json", "-o", "r.json", "--trace", "trace.jsonl", "--plan-dump", "plan.json", "--csv", "r.csv"]);
    let r = report(d, "r.json");
    assert_eq!(r.cycles.total, 10);
    assert_eq!(r.cycles.preload, 5);
    assert_eq!((r.grid.rows, r.grid.cols), (3, 3));
    assert_eq!(r.active_dpes, 9);
    assert_eq!(r.serialized_total, 10 + r.mem_stall_cycles as i64);

    let trace = std::fs::read_to_string(d.join("trace.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    for key in ["cycle", "row", "col", "action"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    let last: serde_json::Value = serde_json::from_str(trace.lines().last().unwrap()).unwrap();
    assert!(last["cycle"].as_u64().unwrap() <= 10);

    let plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["jobs"].as_array().unwrap().len(), 1);
    assert!(std::fs::read_to_string(d.join("r.csv")).unwrap().starts_with("workload,"));
}

#[test]
fn simulate_feed_and_grid_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    save(d, "t.json", &tridiagonal(40));
    for feed in ["a=asc,b=desc", "a=desc,b=asc", "a=asc,b=asc"] {
        ok(d, &["simulate", "t.json", "t.json", "--feed", feed, "--grid", "2x2", "--cuts", "13,27", "-o", "r.json"]);
        assert!(report(d, "r.json").cycles.total > 0);
    }
    assert_eq!(code(d, &["simulate", "t.json", "t.json", "--feed", "a=sideways"]), 1);
    assert_eq!(code(d, &["simulate", "t.json", "t.json", "--grid", "2x2", "--a-group", "3"]), 1);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    save(d, "t.json", &tridiagonal(12));
    std::fs::write(d.join("run.cfg"), "# small grid\ngrid = 1x1\ncache-ways = 4\n").unwrap();
    ok(d, &["--config", "run.cfg", "simulate", "t.json", "t.json", "-o", "a.json"]);
    assert_eq!(report(d, "a.json").grid.rows, 1);
    ok(d, &["--config", "run.cfg", "simulate", "t.json", "t.json", "--grid", "3x3", "-o", "b.json"]);
    assert_eq!(report(d, "b.json").grid.rows, 3);

    std::fs::write(d.join("bad.cfg"), "colour = red\n").unwrap();
    assert_eq!(code(d, &["--config", "bad.cfg", "simulate", "t.json", "t.json"]), 1);
}

#[test]
fn expm_single_diagonal_savings() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["expm", "--model", "maxcut", "--qubits", "10", "--iters", "4", "-o", "e.json", "--csv", "e.csv"]);
    let r = report(d, "e.json");
    assert_eq!(r.iterations.len(), 5);
    assert!(r.iterations.iter().all(|it| it.nnzd == 1 && it.savings > 0.99));
    assert!((r.hit_rate - 7.0 / 12.0).abs() < 1e-12);
    let csv = std::fs::read_to_string(d.join("e.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "k,nnzd,nnze,savings,cycles_total,hit_rate");
    assert_eq!(csv.lines().count(), 6);

    ok(d, &["report", "e.json", "-o", "again.csv"]);
    assert_eq!(std::fs::read_to_string(d.join("again.csv")).unwrap(), csv);
    let summary = ok(d, &["report", "e.json", "--summary"]);
    assert!(summary.starts_with("workload,"));
}

#[test]
fn expm_reports_heisenberg_growth() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(d, &["expm", "--model", "heisenberg", "--qubits", "10", "--iters", "4", "--functional-only", "-o", "h.json"]);
    assert!(out.contains("iteration 3 NNZD 783 matches reference 783"), "{out}");
    let r = report(d, "h.json");
    assert_eq!(r.cycles.total, 0);
    assert_eq!(r.iterations[3].nnzd, 783);
}

#[test]
fn expm_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["expm"]), 1);
    assert_eq!(code(d, &["expm", "--model", "heisenberg", "--qubits", "6", "--t", "10", "--functional-only", "-o", "x.json"]), 2);
    assert!(!d.join("x.json").exists());
}
