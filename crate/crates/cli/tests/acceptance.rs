//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 11 and 13 are known to fail at desk scale. Their lines print
//! `FAIL (documented)` and do not fail the test; any other failure does.

use quasitrace_cli::config::{EnergyGrid, RunConfig};
use quasitrace_cli::suites::{
    census_check, complexity_check, first_symbol_check, growth_checks, identity_check, last_symbol_check,
    norm_growth_checks, norm_growth_records, run_dynamics, run_traces, run_words, suffix_check, trend_checks, Check,
    Summary, GROWTH_LEVELS, NORM_SAMPLE_LEVEL,
};
use quasitrace_core::dynamics::{exponent_trend, DEFAULT_MASS_FLOOR};
use quasitrace_core::ext::ExtReal;
use quasitrace_core::phase::PhasePoint;
use quasitrace_core::spectrum::{bands, derivative_growth_scan, GrowthFit};
use quasitrace_core::transfer::{fricke_invariant, half_line_traces_fine, norm_trace_margin, trace_derivative};
use quasitrace_core::words::{special_word, Side};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

const DOCUMENTED_FAILURES: [usize; 2] = [11, 13];
const SEED: u64 = 20_240_611;
const T_GRID: [f64; 5] = [10.0, 30.0, 100.0, 300.0, 1000.0];
const BOUND_PHASES: [&str; 5] = ["0", "1/4", "1/2", "omega/2", "0.739"];

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

fn describe(checks: &[Check]) -> String {
    checks.iter().map(|c| format!("{} {}: {}", if c.passed { "ok" } else { "FAILED" }, c.name, c.detail)).collect::<Vec<_>>().join(" | ")
}

fn named<'a>(s: &'a Summary, name: &str) -> &'a Check {
    s.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("summary lacks check {name}"))
}

fn phases(list: &[&str]) -> Vec<PhasePoint> {
    list.iter().map(|s| s.parse().unwrap()).collect()
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    EnergyGrid { lo, hi, count: n }.points()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn words_config(out: &Path) -> RunConfig {
    RunConfig { k_max: 14, samples: 200, seed: SEED, out: out.to_path_buf(), ..RunConfig::default() }
}

fn traces_config(lambda: f64, out: &Path) -> RunConfig {
    RunConfig {
        lambda,
        k_max: 14,
        samples: 50,
        seed: SEED,
        energies: EnergyGrid { lo: -3.0, hi: lambda + 3.0, count: 64 },
        out: out.to_path_buf(),
        ..RunConfig::default()
    }
}

fn dynamics_config(out: &Path) -> RunConfig {
    RunConfig {
        lambda: 10.0,
        thetas: BOUND_PHASES.iter().map(|s| s.to_string()).collect(),
        t_grid: T_GRID.to_vec(),
        out: out.to_path_buf(),
        ..RunConfig::default()
    }
}

/// Central difference with one Richardson step on double-double traces.
/// The step keeps the relative change of `x_k` near 1e-3 and is rounded so
/// that `E ± h` are exact.
fn richardson_derivative(k: usize, e: f64, lambda: f64, theta: PhasePoint, x: ExtReal, dx: ExtReal) -> ExtReal {
    let scale = (x.abs().max(ExtReal::ONE) / dx.abs().max(ExtReal::ONE)).to_f64();
    let h = ((e + 1e-3 * scale) - e).max(f64::EPSILON * e.abs().max(1.0) * 64.0);
    let xk = |at: f64| half_line_traces_fine(Side::Right, k, at, lambda, theta)[k];
    let d = |h: f64| (xk(e + h) - xk(e - h)) / ExtReal::from_f64(2.0 * h);
    (d(h / 2.0) * 4.0 - d(h)) * (1.0 / 3.0)
}

fn run_criteria(work: &Path) -> Vec<Outcome> {
    let mut out = Vec::new();
    let mut record = |id, name, limit_s: f64, f: &mut dyn FnMut() -> (bool, String)| {
        let start = Instant::now();
        let (passed, mut detail) = f();
        let elapsed = start.elapsed();
        let in_time = elapsed.as_secs_f64() < limit_s;
        if !in_time {
            detail.push_str(&format!("; over the {limit_s} s limit"));
        }
        let o = Outcome { id, name, passed: passed && in_time, detail, elapsed };
        println!(
            "criterion {:>2} [{}] {} ({:.1} s): {}",
            o.id,
            match (o.passed, DOCUMENTED_FAILURES.contains(&o.id)) {
                (true, _) => "PASS",
                (false, true) => "FAIL (documented)",
                (false, false) => "FAIL",
            },
            o.name,
            o.elapsed.as_secs_f64(),
            o.detail
        );
        out.push(o);
    };

    record(1, "complexity law", 10.0, &mut || {
        let c = complexity_check(500).unwrap();
        (c.passed, c.detail)
    });

    record(2, "subword census", 60.0, &mut || {
        let c = census_check(14).unwrap();
        (c.passed, c.detail)
    });

    record(3, "suffix and boundary-symbol laws", f64::INFINITY, &mut || {
        let checks = vec![suffix_check(20).unwrap(), first_symbol_check(16).unwrap(), last_symbol_check(16).unwrap()];
        let desk: Vec<String> = (1..=3).map(|k| special_word(k).unwrap().to_string()).collect();
        let desk_ok = desk == ["11", "010", "11011"];
        (all_pass(&checks) && desk_ok, format!("{}; b_1..b_3 = {desk:?}", describe(&checks)))
    });

    record(4, "Fibonacci identity", 1.0, &mut || {
        let c = identity_check(40).unwrap();
        (c.passed, c.detail)
    });

    let words_dir = work.join("words");
    record(5, "phase conjugacy", 300.0, &mut || {
        let s = run_words(&words_config(&words_dir)).unwrap();
        let c = named(&s, "phase conjugacy");
        (c.passed, c.detail.clone())
    });

    let trace_dirs = [(5.0, work.join("traces5")), (10.0, work.join("traces10"))];
    record(6, "trace equalities", 600.0, &mut || {
        let mut ok = true;
        let mut details = Vec::new();
        for (lambda, dir) in &trace_dirs {
            let s = run_traces(&traces_config(*lambda, dir)).unwrap();
            let c = named(&s, "trace equality parity class");
            ok &= c.passed;
            details.push(format!("λ={lambda}: {}", c.detail));
        }
        (ok, details.join("; "))
    });

    record(7, "Fricke invariant", f64::INFINITY, &mut || {
        let mut worst = 0.0f64;
        for lambda in [2.0, 10.0] {
            let centers: Vec<f64> = bands(17, lambda).unwrap().iter().map(|b| b.center).collect();
            let step = centers.len() / 32;
            for e in centers.iter().step_by(step).take(32) {
                let mut xs = vec![ExtReal::from_f64(*e)];
                xs.extend(half_line_traces_fine(Side::Right, 16, *e, lambda, PhasePoint::ZERO));
                for w in xs.windows(3) {
                    let r = (fricke_invariant(w[2], w[1], w[0]) - ExtReal::from_f64(lambda * lambda)).abs().to_f64();
                    worst = worst.max(r / (1.0 + lambda * lambda));
                }
            }
        }
        (worst <= 1e-6, format!("32 band centers of σ_17 per λ ∈ {{2, 10}}, k ≤ 15; worst |I − λ²|/(1+λ²) = {worst:e}"))
    });

    record(8, "derivative correctness", f64::INFINITY, &mut || {
        let mut worst = 0.0f64;
        for lambda in [2.0, 10.0] {
            for theta in phases(&["0", "omega/2"]) {
                for e in grid(-3.0, lambda + 3.0, 16) {
                    for k in 0..=12 {
                        let t = trace_derivative(k, e, lambda, theta);
                        let fd = richardson_derivative(k, e, lambda, theta, t.x, t.dx);
                        worst = worst.max(((t.dx - fd).abs() / t.dx.abs().max(ExtReal::ONE)).to_f64());
                    }
                }
            }
        }
        (worst <= 1e-5, format!("λ ∈ {{2, 10}}, 2 phases, 16 energies, k ≤ 12; worst relative error {worst:e}"))
    });

    record(9, "norm–derivative inequality", 600.0, &mut || {
        let mut rng_phases = RunConfig { samples: 8, seed: SEED, ..RunConfig::default() }.phases().unwrap();
        rng_phases.truncate(8);
        let mut worst = f64::INFINITY;
        for lambda in [2.0, 10.0] {
            for &theta in &rng_phases {
                for e in grid(-3.0, lambda + 3.0, 64) {
                    for k in 0..=12 {
                        worst = worst.min(norm_trace_margin(k, e, lambda, theta).relative_margin());
                    }
                }
            }
        }
        (worst >= -1e-8, format!("worst relative margin {worst:e}"))
    });

    let mut fits: Vec<GrowthFit> = Vec::new();
    record(10, "derivative growth", 900.0, &mut || {
        fits = [10.0, 20.0, 40.0].iter().map(|&l| derivative_growth_scan(l, GROWTH_LEVELS.0, GROWTH_LEVELS.1).unwrap()).collect();
        let checks = growth_checks(&fits);
        (all_pass(&checks) && checks.len() == 2, describe(&checks))
    });

    record(11, "norm growth", f64::INFINITY, &mut || {
        let zeta = fits.iter().find(|f| f.lambda == 10.0).map(|f| f.zeta_hat).unwrap();
        let records = norm_growth_records(10.0, NORM_SAMPLE_LEVEL, &phases(&["0", "1/3", "omega/2"]), zeta).unwrap();
        let checks = norm_growth_checks(&records);
        // Pass/fail: positivity and the per-energy spread. The phase-uniform
        // spread is reported only.
        (checks[0].passed && checks[1].passed, format!("ζ̂ = {zeta:.4}; {}", describe(&checks)))
    });

    let dyn_dir = work.join("dynamics");
    record(12, "dynamical bound", 7200.0, &mut || {
        let s = run_dynamics(&dynamics_config(&dyn_dir)).unwrap();
        (s.passed, describe(&s.checks))
    });

    record(13, "exponent trend", f64::INFINITY, &mut || {
        let trend = exponent_trend(&[10.0, 20.0, 40.0], PhasePoint::ZERO, &T_GRID, DEFAULT_MASS_FLOOR, None).unwrap();
        let checks = trend_checks(&trend);
        (all_pass(&checks), describe(&checks))
    });

    record(14, "determinism", f64::INFINITY, &mut || {
        let before: Vec<_> =
            [&words_dir, &trace_dirs[0].1, &trace_dirs[1].1, &dyn_dir].iter().map(|d| snapshot(d)).collect();
        run_words(&words_config(&words_dir)).unwrap();
        for (lambda, dir) in &trace_dirs {
            run_traces(&traces_config(*lambda, dir)).unwrap();
        }
        run_dynamics(&dynamics_config(&dyn_dir)).unwrap();
        let after: Vec<_> =
            [&words_dir, &trace_dirs[0].1, &trace_dirs[1].1, &dyn_dir].iter().map(|d| snapshot(d)).collect();
        let files: usize = before.iter().map(|m| m.len()).sum();
        let differing: Vec<&String> = before
            .iter()
            .zip(&after)
            .flat_map(|(b, a)| b.iter().filter(move |(name, bytes)| a.get(*name) != Some(*bytes)).map(|(n, _)| n))
            .collect();
        (differing.is_empty(), format!("{files} files from criteria 5, 6, 12 rerun; differing: {differing:?}"))
    });

    out
}

#[test]
fn acceptance() {
    let work = tempfile::tempdir().unwrap();
    let outcomes = run_criteria(work.path());
    assert_eq!(outcomes.len(), 14);
    let unexpected: Vec<usize> =
        outcomes.iter().filter(|o| !o.passed && !DOCUMENTED_FAILURES.contains(&o.id)).map(|o| o.id).collect();
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}
