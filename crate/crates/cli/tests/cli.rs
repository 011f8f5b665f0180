use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pbc_core::simulation::{read_trace_csv, SimulationTrace};

fn pbc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("PBC_OUT_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn trace_of(dir: &Path, name: &str) -> SimulationTrace {
    read_trace_csv(fs::File::open(dir.join(format!("{name}.trace.csv"))).unwrap()).unwrap()
}

#[test]
fn list_names_every_builtin() {
    let o = Command::new(env!("CARGO_BIN_EXE_pbc")).arg("list").output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for s in pbc_core::scenarios::builtin_scenarios() {
        assert!(text.lines().any(|l| l.starts_with(&s.name)), "{}", s.name);
    }
}

#[test]
fn simulate_writes_trace_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let o = pbc(&["simulate", "--scenario", "rlc-default"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trace = trace_of(dir.path(), "rlc-default");
    assert!((trace.final_input()[0] - 3.0515).abs() <= 1e-3);
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("rlc-default.metrics.json")).unwrap()).unwrap();
    assert!(metrics.get("steady_state_error").is_some());
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        assert_eq!(code(&pbc(&["simulate", "--scenario", "rlc-default", "--set", "t_span=[0,0.1]"], dir.path())), 0);
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("rlc-default.trace.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn halving_the_step_agrees() {
    let (coarse, fine) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(code(&pbc(&["simulate", "--scenario", "rlc-default", "--dt", "1e-5"], coarse.path())), 0);
    assert_eq!(code(&pbc(&["simulate", "--scenario", "rlc-default", "--dt", "5e-6"], fine.path())), 0);
    let (c, f) = (trace_of(coarse.path(), "rlc-default"), trace_of(fine.path(), "rlc-default"));
    assert_eq!(f.len(), 2 * c.len() - 1);
    for (a, b) in c.states.last().unwrap().iter().zip(f.states.last().unwrap()) {
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
}

#[test]
fn unknown_scenario_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = pbc(&["simulate", "--scenario", "no-such-scenario"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-such-scenario"));
    assert_eq!(code(&pbc(&["simulate", "--scenario", "rlc-default", "--set", "bogus=1"], dir.path())), 1);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&pbc(&["verify", "--scenario", "rlc-default"], dir.path())), 0);
    assert!(dir.path().join("rlc-default.verify.json").is_file());
    let o = pbc(&["verify", "--scenario", "pera-filtered", "--set", "alpha_c=1e-9"], dir.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL linearization_stability"));
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = pbc(&["sweep", "--scenario", "rlc-beta-sweep", "--values", ""], dir.path());
    assert_eq!(code(&o), 0);
    let summary = fs::read_to_string(dir.path().join("rlc-beta-sweep.sweep.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
    assert!(summary.starts_with("value,status,"));
}

#[test]
fn sweep_writes_one_row_and_trace_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = pbc(&["sweep", "--scenario", "rlc-beta-sweep", "--set", "t_span=[0,0.05]", "--values", "1,100"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("rlc-beta-sweep.sweep.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("ok")));
    for member in ["rlc-beta-sweep-beta_c-1", "rlc-beta-sweep-beta_c-100"] {
        assert_eq!(trace_of(dir.path(), member).layout.inputs, 1);
    }
}
