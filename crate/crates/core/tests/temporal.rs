use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tkg_core::temporal::verify::random_periodic_target;
use tkg_core::temporal::{min_norm_least_squares, verify_periodicity, CompatibilityOutcome, CompatibilitySystem, TemporalEncoderConfig};

#[test]
fn geometric_encoding_matches_direct_formula() {
    let te = TemporalEncoderConfig::geometric(16, 1e4).unwrap();
    for i in [0u64, 1, 7, 365, 2975, 9999] {
        let v = te.encode(i);
        for n in 0..8 {
            let w = 1e4f64.powf(-2.0 * n as f64 / 16.0);
            let x = w * i as f64;
            assert!((v[2 * n] - x.sin()).abs() < 1e-12, "sin i={i} n={n}");
            assert!((v[2 * n + 1] - x.cos()).abs() < 1e-12, "cos i={i} n={n}");
        }
    }
    let table = te.table(5);
    assert_eq!(&table[3 * 16..4 * 16], te.encode(3).as_slice());
}

proptest! {
    #[test]
    fn distances_depend_only_on_the_offset(i in 0u64..1_000_000, j in 0u64..1_000_000, s in 0u64..1_000_000) {
        let te = TemporalEncoderConfig::geometric(64, 1e4).unwrap();
        let a = te.squared_distance(i, j);
        prop_assert!((te.squared_distance(i + s, j + s) - a).abs() <= 1e-9 * a.max(1.0));
        let cf = te.closed_form_distance(i, j);
        prop_assert!((a - cf).abs() <= 1e-9 * cf.max(1e-300));
        prop_assert!((te.squared_distance(j, i) - a).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn harmonic_encoding_repeats_exactly(i in 0u64..1_000_000, l in 1u64..50) {
        let k: Vec<i64> = (0..4).collect();
        let te = TemporalEncoderConfig::harmonic(l, &k, 8).unwrap();
        prop_assert_eq!(te.encode(i), te.encode(i + l));
    }
}

fn harmonic(multipliers: &[i64]) -> TemporalEncoderConfig {
    TemporalEncoderConfig::harmonic(12, multipliers, 2 * multipliers.len()).unwrap()
}

/// The periodicity block for P vanishes exactly when 12 | k_n * P for all n.
#[test]
fn difference_blocks_vanish_only_for_divisible_harmonics() {
    let cases: [(&[i64], usize); 5] = [(&[0, 6], 2), (&[0, 4, 8], 3), (&[0, 3, 6, 9], 4), (&[0, 1], 2), (&[0, 2, 4], 3)];
    for (k, p) in cases {
        let te = harmonic(k);
        let target: Vec<f64> = (0..12).map(|t| (t % p) as f64).collect();
        let sys = CompatibilitySystem::build(&te, 12, &[p], &[target]).unwrap();
        let divisible = k.iter().all(|&kn| (kn * p as i64) % 12 == 0);
        assert_eq!(sys.max_difference_entry() < 1e-12, divisible, "k={k:?} P={p}");
    }
}

#[test]
fn periodic_targets_are_solved_and_stay_periodic() {
    let k: Vec<i64> = (0..8).collect();
    let te = harmonic(&k);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let periods = [2usize, 3, 4, 6];
        let targets: Vec<Vec<f64>> = periods.iter().map(|&p| random_periodic_target(&mut rng, p, 12)).collect();
        let sys = CompatibilitySystem::build(&te, 12, &periods, &targets).unwrap();
        let CompatibilityOutcome::Feasible { blocks, residual } = sys.solve(1e-6) else {
            panic!("periodic targets must be feasible");
        };
        assert!(residual <= 1e-6);
        for ((w, &p), g) in blocks.iter().zip(&periods).zip(&targets) {
            assert!(verify_periodicity(w, &te, p, 60) <= 1e-5);
            for (t, &gt) in g.iter().enumerate() {
                let out: f64 = w.iter().zip(te.encode(t as u64)).map(|(a, b)| a * b).sum();
                assert!((out - gt).abs() <= 1e-6);
            }
        }
    }
}

#[test]
fn non_periodic_target_is_infeasible() {
    let k: Vec<i64> = (0..8).collect();
    let te = harmonic(&k);
    // Period 12 pattern requested with P = 3.
    let g: Vec<f64> = (0..12).map(|t| if t == 5 { 1.0 } else { 0.0 }).collect();
    let out = CompatibilitySystem::build(&te, 12, &[3], &[g]).unwrap().solve(1e-6);
    assert!(!out.is_feasible());
    assert!(out.residual() > 1e-3);
}

/// Oracle: on full-column-rank systems the min-norm solution is the
/// normal-equations solution.
#[test]
fn least_squares_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let (m, n) = (rng.gen_range(5..12), rng.gen_range(1..5));
        let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let x = min_norm_least_squares(&a, &b).unwrap();
        let ata = a.transpose() * &a;
        let oracle = ata.cholesky().unwrap().solve(&(a.transpose() * &b));
        assert!((x - oracle).amax() < 1e-9);
    }
}
