use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use jumpmesh::cli::RunRecord;
use jumpmesh::mesh::IntervalTag;

fn jumpmesh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jumpmesh"))
        .args(args)
        .env_remove("JUMPMESH_PROBLEM")
        .output()
        .expect("binary runs")
}

fn series(path: &Path) -> Vec<(f64, f64)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau,value"));
    lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

#[test]
fn bang_bang_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.json");
    let history = dir.path().join("history.csv");
    let plots = dir.path().join("plots");
    let o = jumpmesh(&[
        "solve",
        "--problem",
        "min-time-di",
        "--initial-intervals",
        "9",
        "--out",
        out.to_str().unwrap(),
        "--history",
        history.to_str().unwrap(),
        "--plot-data",
        plots.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("converged"), "{stdout}");

    let text = fs::read_to_string(&out).unwrap();
    let record = RunRecord::from_json(&text).unwrap();
    assert_eq!(record.to_json().unwrap(), text);
    assert_eq!(record.config.problem, "min-time-di");
    assert_eq!(record.config.run.initial_intervals, 9);

    let rows = fs::read_to_string(&history).unwrap();
    let total: usize = record.iterations.iter().map(|e| e.degrees.len()).sum();
    assert_eq!(rows.lines().count(), total + 1);
    assert!(rows.starts_with("iteration,interval_index,T_left,T_right,degree,segment_kind,e_max\n"));
    assert!(rows.contains(",nonsmooth,"));

    // Away from the final bracket the control sits on its bounds.
    let last = record.iterations.last().unwrap();
    let k = last.tags.iter().position(|&t| t == IntervalTag::BracketLeft).unwrap();
    let (lo, hi) = (last.fractions[k], last.fractions[k + 2]);
    let control = series(&plots.join("control_0.csv"));
    assert_eq!(control.len(), last.degrees.iter().sum::<usize>());
    for (tau, u) in control {
        if tau < lo {
            assert!((u - 1.0).abs() <= 1e-4, "u({tau}) = {u}");
        } else if tau > hi {
            assert!((u + 1.0).abs() <= 1e-4, "u({tau}) = {u}");
        }
    }
    assert!(plots.join("state_1.csv").exists());
    let mesh_rows = series(&plots.join("mesh_history.csv"));
    let points: usize = record.iterations.iter().map(|e| e.fractions.len()).sum();
    assert_eq!(mesh_rows.len(), points);
}

#[test]
fn exit_codes() {
    let o = jumpmesh(&["solve", "--problem", "robot-arm", "--max-iters", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = jumpmesh(&["solve", "--problem", "shuttle"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("shuttle"));
    let o = jumpmesh(&["solve", "--problem", "min-energy-di", "--tol", "-1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = jumpmesh(&["solve", "--problem", "min-energy-di", "--orders", "0..3"]);
    assert_eq!(o.status.code(), Some(1));
    let o = jumpmesh(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = jumpmesh(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn environment_supplies_flags() {
    let o = Command::new(env!("CARGO_BIN_EXE_jumpmesh"))
        .args(["solve"])
        .env("JUMPMESH_PROBLEM", "min-energy-di")
        .env("JUMPMESH_TOL", "1e-7")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8(o.stdout).unwrap().contains("min-energy-di"));
}

#[test]
fn sweep_writes_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = jumpmesh(&[
        "sweep",
        "--problem",
        "min-energy-di",
        "--tols",
        "1e-6",
        "--mus",
        "1,2",
        "--jobs",
        "3",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.contains("hp-(2)"));

    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    let mut histories = Vec::new();
    for stem in ["baseline", "mu1", "mu2"] {
        let path = dir.path().join(format!("min-energy-di_tol1e-6_{stem}.json"));
        let r = RunRecord::read(&path).unwrap();
        assert!(r.converged());
        assert_eq!(r.total_detections(), 0);
        histories.push(r.iterations.iter().map(|e| (e.fractions.clone(), e.degrees.clone())).collect::<Vec<_>>());
    }
    assert!(histories.iter().all(|h| *h == histories[0]));
}

#[test]
fn repeated_runs_differ_only_in_timing() {
    let dir = tempfile::tempdir().unwrap();
    let mut records = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.path().join(name);
        let o = jumpmesh(&["solve", "--problem", "min-energy-di", "--repeats", "2", "--out", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        let mut r = RunRecord::read(&path).unwrap();
        assert_eq!(r.timing.wall_times.len(), 2);
        r.timing = jumpmesh::cli::Timing::new(vec![]);
        records.push(r);
    }
    assert_eq!(records[0], records[1]);
}
