use proptest::prelude::*;
use quasitrace_core::phase::PhasePoint;
use quasitrace_core::spectrum::*;
use quasitrace_core::transfer::{half_line_traces_fine, transfer_product};
use quasitrace_core::words::{fib_len, Side};
use twofloat::TwoFloat;

fn inside_some(bands: &[Band], e: f64, tol: f64) -> bool {
    bands.iter().any(|b| b.contains(e, tol))
}

#[test]
fn bands_agree_with_a_dense_trace_scan() {
    // Independent oracle: |x_k| ≤ 2 on a uniform grid from direct products.
    for lambda in [1.5, 3.0, 6.0] {
        for k in 1..=7 {
            let bs = bands(k, lambda).unwrap();
            let (lo, hi) = (-2.5, lambda + 2.5);
            let n = 20_000;
            let step = (hi - lo) / n as f64;
            for i in 0..=n {
                let e = lo + i as f64 * step;
                let x = half_line_traces_fine(Side::Right, k, e, lambda, PhasePoint::ZERO)[k].to_f64();
                if x.abs() <= 2.0 {
                    assert!(inside_some(&bs, e, 1e-9), "λ={lambda} k={k} E={e} missing");
                } else if x.abs() > 2.0 + 1e-6 {
                    assert!(!inside_some(&bs, e, -1e-9), "λ={lambda} k={k} E={e} spurious");
                }
            }
        }
    }
}

#[test]
fn strong_coupling_has_fibonacci_many_bands() {
    for lambda in [5.0, 10.0] {
        for k in 0..=12 {
            let bs = bands(k, lambda).unwrap();
            assert_eq!(bs.len(), fib_len(k as i64), "λ={lambda} k={k}");
            for b in &bs {
                let orbit = trace_orbit_fine(k, TwoFloat::from(b.center), lambda);
                assert!(orbit[k + 1].hi().abs() < 1e-6, "center is a zero of x_k");
                for edge in [b.lo, b.hi] {
                    let x = trace_orbit_fine(k, TwoFloat::from(edge), lambda)[k + 1].hi();
                    assert!((x.abs() - 2.0).abs() < 1e-4, "λ={lambda} k={k} edge {edge}: x={x}");
                }
            }
        }
    }
}

#[test]
fn levels_nest_in_the_previous_two() {
    let lambda = 5.0;
    let levels: Vec<Vec<Band>> = (0..=12).map(|k| bands(k, lambda).unwrap()).collect();
    for k in 1..12 {
        for b in &levels[k + 1] {
            let covered = |e: f64| inside_some(&levels[k], e, 1e-9) || inside_some(&levels[k - 1], e, 1e-9);
            assert!(covered(b.lo) && covered(b.hi) && covered(b.center), "k={} band {:?}", k + 1, b);
        }
    }
}

#[test]
fn free_spectrum_is_one_interval() {
    for k in 0..=10 {
        let bs = bands(k, 0.0).unwrap();
        assert_eq!(bs.len(), 1);
        assert!((bs[0].lo + 2.0).abs() < 1e-9 && (bs[0].hi - 2.0).abs() < 1e-9);
    }
}

#[test]
fn dirichlet_eigenvalues_zero_the_corner_entry() {
    for k in 2..=9 {
        let evs = dirichlet_eigenvalues(k, 2.0).unwrap();
        assert_eq!(evs.len(), fib_len(k as i64) - 1);
        for e in evs {
            let m = transfer_product(fib_len(k as i64) as i64, e, 2.0, PhasePoint::ZERO).unwrap().mat;
            assert!(m.a21.abs() <= 1e-8 * m.max_abs(), "k={k} E={e}");
        }
    }
}

#[test]
fn cover_measure_shrinks_at_strong_coupling() {
    let m: Vec<f64> = (2..=14).map(|k| measure(&spectrum_cover(k, 10.0).unwrap())).collect();
    assert!(m.windows(2).all(|w| w[1] < w[0]), "{m:?}");
    assert!(m.last().unwrap() < &0.05);
}

#[test]
fn derivative_growth_is_exponential() {
    let fit = derivative_growth_scan(10.0, 6, 16).unwrap();
    assert!(fit.xi_hat > 1.0 && fit.non_monotone.is_empty(), "{fit:?}");
    assert!(derivative_growth_scan(0.0, 6, 16).is_err());
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(bands(MAX_BAND_LEVEL + 1, 5.0).is_err());
    assert!(bands(3, -1.0).is_err());
    assert!(bands(3, f64::NAN).is_err());
}

proptest! {
    #[test]
    fn fit_line_recovers_exact_lines(slope in -5.0f64..5.0, icpt in -5.0f64..5.0, n in 3usize..30) {
        let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| slope * x + icpt).collect();
        let (s, c, r) = fit_line(&t, &y);
        prop_assert!((s - slope).abs() < 1e-9 && (c - icpt).abs() < 1e-9 && r < 1e-9);
    }

    #[test]
    fn bands_are_sorted_and_disjoint(lambda in 0.0f64..12.0, k in 0usize..9) {
        let bs = bands(k, lambda).unwrap();
        prop_assert!(bs.iter().all(|b| b.lo <= b.center && b.center <= b.hi));
        prop_assert!(bs.windows(2).all(|w| w[0].hi < w[1].lo));
        prop_assert!(bs.first().unwrap().lo >= -2.0 - 1e-9 && bs.last().unwrap().hi <= lambda + 2.0 + 1e-9);
    }
}
