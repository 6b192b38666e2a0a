use quasitrace_cli::config::RunConfig;
use quasitrace_cli::suites::{Report, Summary};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasitrace"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn summary(dir: &Path, cmd: &str) -> Summary {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("summary_{cmd}.json"))).unwrap()).unwrap()
}

#[test]
fn words_run_passes_and_reports_a_full_class() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["words", "--k-max", "14", "--theta", "0.25"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let parity: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("parity.json")).unwrap()).unwrap();
    for side in ["right", "left"] {
        let r = &parity[0][side];
        assert!(r["even_ok"].as_bool().unwrap() || r["odd_ok"].as_bool().unwrap());
    }
}

#[test]
fn degenerate_level_emits_s0() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["words", "--k-max", "0"], dir.path())), 0);
    let csv = fs::read_to_string(dir.path().join("words.csv")).unwrap();
    assert_eq!(csv, "k,length,height,s_k,b_k\n0,1,1,1,0\n");
}

#[test]
fn usage_errors_exit_2_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    for args in [
        &["words", "--theta", "0.3.1"][..],
        &["words", "--theta", "1.5"],
        &["traces", "--energies", "4:1:10"],
        &["dynamics", "--T-grid", "10,-1"],
        &["dynamics", "--N", "zero"],
        &["spectrum", "--k-max", "99"],
        &["words", "--no-such-flag"],
    ] {
        assert_eq!(code(&run(args, &out)), 2, "{args:?}");
    }
    assert!(!out.exists());
}

#[test]
fn identical_config_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["traces", "--lambda", "10", "--k-max", "10", "--samples", "3", "--seed", "9", "--energies=-3:13:8"];
    assert_eq!(code(&run(&args, a.path())), 0);
    assert_eq!(code(&run(&args, b.path())), 0);
    for f in ["traces.csv", "norms.csv", "margins.csv", "trace_parity.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let header = fs::read_to_string(a.path().join("traces.csv")).unwrap();
    assert!(header.starts_with("k,E,lambda,theta,x,dx\n"));
}

#[test]
fn free_traces_are_phase_independent() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["traces", "--lambda", "0", "--k-max", "12", "--samples", "4"], dir.path());
    assert_eq!(code(&o), 0);
    let s = summary(dir.path(), "traces");
    assert!(s.checks.iter().any(|c| c.name == "free traces phase independent" && c.passed));
}

#[test]
fn free_spectrum_is_one_band() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["spectrum", "--lambda", "0", "--k-max", "6"], dir.path())), 0);
    let csv = fs::read_to_string(dir.path().join("bands.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 7);
    for r in rows {
        let f: Vec<f64> = r.split(',').skip(3).map(|x| x.parse().unwrap()).collect();
        assert!((f[0] + 2.0).abs() < 1e-9 && (f[1] - 2.0).abs() < 1e-9, "{r}");
    }
}

#[test]
fn small_box_is_retried_then_invalidated() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["dynamics", "--N", "20", "--T", "1000", "--p", "0.25"], dir.path());
    assert_eq!(code(&o), 1);
    let s = summary(dir.path(), "dynamics");
    let valid = s.checks.iter().find(|c| c.name == "records valid").unwrap();
    assert!(!valid.passed);
    assert!(valid.detail.contains("[40]"), "retry doubles the box: {}", valid.detail);
    let csv = fs::read_to_string(dir.path().join("dynamics.csv")).unwrap();
    assert!(csv.starts_with("lambda,theta,T,L,mass,edge_mass,valid\n10,0,1000,"));
    assert!(csv.lines().nth(1).unwrap().ends_with(",false"));
}

#[test]
fn report_aggregates_and_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["report"], dir.path())), 2);
    assert_eq!(code(&run(&["words", "--k-max", "6", "--theta", "omega/2"], dir.path())), 0);
    assert_eq!(code(&run(&["report"], dir.path())), 0);
    let report: Report = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report.passed && report.commands.len() == 1);

    let cfg: RunConfig = summary(dir.path(), "words").config;
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let again = tempfile::tempdir().unwrap();
    let o = run(&["words", "--config", path.to_str().unwrap()], again.path());
    assert_eq!(code(&o), 0);
    let reloaded = summary(again.path(), "words").config;
    assert_eq!(RunConfig { out: cfg.out.clone(), ..reloaded }, cfg);
}
