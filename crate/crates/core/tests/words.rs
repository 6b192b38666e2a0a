use proptest::prelude::*;
use quasitrace_core::phase::PhasePoint;
use quasitrace_core::words::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// Fibonacci prefix by repeated string substitution, independent of the
/// packed-word implementation.
fn naive_prefix(len: usize) -> String {
    let mut w = String::from("1");
    while w.len() < len {
        w = w.chars().map(|c| if c == '0' { "1" } else { "10" }).collect();
    }
    w.truncate(len);
    w
}

fn naive_factors(text: &str, n: usize) -> HashSet<String> {
    (0..=text.len() - n).map(|i| text[i..i + n].to_string()).collect()
}

fn naive_fib(k: i64) -> u128 {
    let (mut a, mut b) = (1u128, 1u128);
    for _ in 0..(k + 1) {
        let c = a + b;
        a = b;
        b = c;
    }
    a
}

#[test]
fn complexity_matches_string_oracle() {
    let text = naive_prefix(20_000);
    for n in (1..=500).step_by(7) {
        let lib = subwords(saturation_length(n), n).unwrap();
        assert_eq!(lib.len(), n + 1);
        let oracle = naive_factors(&text, n);
        let got: HashSet<String> = lib.members().iter().map(|w| w.to_string()).collect();
        assert_eq!(got, oracle, "n={n}");
    }
}

#[test]
fn census_matches_string_oracle() {
    let text = naive_prefix(40_000);
    for k in 0..=14usize {
        let s = fib_word(k).unwrap().to_string();
        let f = s.len();
        let mut expected: HashSet<String> = (0..f).map(|i| format!("{}{}", &s[i..], &s[..i])).collect();
        assert_eq!(expected.len(), f);
        let b = special_word(k).unwrap().to_string();
        assert!(expected.insert(b.clone()), "b_{k} = {b} is a rotation");
        assert_eq!(naive_factors(&text, f), expected, "k={k}");
    }
}

#[test]
fn identity_and_coprimality_exact() {
    for k in 1..=40i64 {
        assert_eq!(fibonacci_identity_check(k).unwrap(), 1.into());
        assert_eq!(fib_number(k).unwrap(), naive_fib(k).into());
        let (mut a, mut b) = (naive_fib(k), naive_fib(k - 1));
        while b != 0 {
            (a, b) = (b, a % b);
        }
        assert_eq!(a, 1);
    }
}

#[test]
fn phase_zero_block_is_prefix() {
    let text = naive_prefix(fib_len(25));
    for k in 0..=25usize {
        let block = rotation_block(1, fib_len(k as i64) as i64, PhasePoint::ZERO).unwrap();
        assert_eq!(block, fib_word(k).unwrap());
        assert_eq!(block.to_string(), text[..block.len()]);
    }
}

#[test]
fn seeded_phases_all_have_a_conjugate_class() {
    let table = ConjugacyTable::new(14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let theta = PhasePoint::random(&mut rng);
        let (r, l) = table.classify(theta).unwrap();
        assert!(r.any_class_ok() && l.any_class_ok());
    }
}

#[test]
fn conjugate_class_follows_first_symbols() {
    // Right side: even levels conjugate iff v_θ(1) = 1. Left side: even
    // levels iff v_θ(0) = 1, odd levels iff v_θ(0) = 0.
    let table = ConjugacyTable::new(12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let theta = PhasePoint::random(&mut rng);
        let (r, l) = table.classify(theta).unwrap();
        if rotation_symbol(1, theta).is_one() {
            assert!(r.even_ok);
        }
        if rotation_symbol(0, theta).is_one() {
            assert!(l.even_ok);
        } else {
            assert!(l.odd_ok);
        }
    }
}

#[test]
fn hull_windows() {
    let w = fibonacci_prefix(10_000).unwrap();
    assert!(hull_membership_check(&w, 20).unwrap());
    let zeros = FiniteWord::constant(Symbol::Zero, 100);
    assert!(!hull_membership_check(&zeros, 2).unwrap());
    let third: PhasePoint = "1/3".parse().unwrap();
    assert!(hull_membership_check(&rotation_block(-5000, 5000, third).unwrap(), 20).unwrap());
}

fn word_strategy() -> impl Strategy<Value = FiniteWord> {
    proptest::collection::vec(any::<bool>(), 1..300).prop_map(|bits| FiniteWord::from_symbols(bits.into_iter().map(Symbol::from_bit)))
}

proptest! {
    #[test]
    fn substitution_length_law(w in word_strategy()) {
        prop_assert_eq!(substitute(&w).len(), w.len() + height(&w));
    }

    #[test]
    fn rotations_preserve_height(w in word_strategy(), shift in 0usize..300) {
        let r = w.rotate_left(shift % w.len());
        prop_assert_eq!(height(&r), height(&w));
        prop_assert_eq!(r.rotate_left((w.len() - shift % w.len()) % w.len()), w);
    }

    #[test]
    fn block_symbols_match_pointwise(raw in any::<u128>(), lo in -10_000i64..10_000, len in 1i64..200) {
        let theta = PhasePoint::from_raw(raw);
        let block = rotation_block(lo, lo + len - 1, theta).unwrap();
        for i in 0..len as usize {
            prop_assert_eq!(block.get(i), rotation_symbol(lo + i as i64, theta));
        }
    }

    #[test]
    fn coding_agrees_with_float_away_from_threshold(x in 0.0f64..1.0, n in -1000i64..1000) {
        let theta = PhasePoint::from_f64(x).unwrap();
        let omega = (5f64.sqrt() - 1.0) / 2.0;
        let y = (n as f64 * omega + theta.to_f64()).rem_euclid(1.0);
        prop_assume!((y - (1.0 - omega)).abs() > 1e-9 && y > 1e-9 && y < 1.0 - 1e-9);
        prop_assert_eq!(rotation_symbol(n, theta).is_one(), y >= 1.0 - omega);
    }

    #[test]
    fn window_factors_stay_sturmian(raw in any::<u128>(), n in 1usize..40) {
        let theta = PhasePoint::from_raw(raw);
        let window = rotation_block(-2000, 2000, theta).unwrap();
        prop_assert!(hull_membership_check(&window, n).unwrap());
    }
}
