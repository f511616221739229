use bethe_lab::disorder::{sample, DisorderSpec};
use bethe_lab::lyapunov::{extrapolate_eta, LyapunovEstimate};
use bethe_lab::oracle::{assemble, resolvent_column, smallest_eigenvalue};
use bethe_lab::stats::sig9;
use bethe_lab::streams::{derive_seed, StreamId};
use bethe_lab::tree::{
    diagonal_green, eigenvalues_below, forward_recursion, free_lyapunov, ground_state_by_inertia, root_row,
    PotentialSample, SpectralPoint, TreeTopology,
};
use bethe_lab::verify::{monotone_bound_sides, truncation_error};
use proptest::prelude::*;

fn specs() -> impl Strategy<Value = DisorderSpec> {
    prop_oneof![
        (0.1f64..1.0).prop_map(DisorderSpec::uniform),
        Just(DisorderSpec::default()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursion_matches_dense_resolvent(
        k in 2usize..=3, depth in 0usize..=4, lambda in 0.0f64..2.0,
        energy in -5.0f64..5.0, log_eta in -4.0f64..0.0, seed in any::<u64>(),
    ) {
        let t = TreeTopology::new(k, depth).unwrap();
        let v = PotentialSample::draw(&t, &DisorderSpec::default(), StreamId::new(seed, 0));
        let p = SpectralPoint::new(energy, 10f64.powf(log_eta), lambda).unwrap();
        let state = forward_recursion(&t, &v, &p).unwrap();
        let h = assemble(&t, &v, lambda).unwrap();
        let column = resolvent_column(&h, p.z(), 0).unwrap();
        let row = root_row(&state);
        let scale = column.iter().fold(0.0f64, |m, x| m.max(x.norm()));
        for (a, b) in row.iter().zip(&column) {
            prop_assert!((a - b).norm() <= 1e-10 * scale);
        }
        let diag = diagonal_green(&state);
        let last = t.node_count() - 1;
        let col = resolvent_column(&h, p.z(), last).unwrap();
        prop_assert!((diag[last] - col[last]).norm() <= 1e-10 * col[last].norm());
        prop_assert!(diag.iter().all(|g| g.im > 0.0));
    }

    #[test]
    fn inertia_count_matches_dense_spectrum(
        k in 2usize..=3, depth in 0usize..=4, lambda in 0.0f64..2.0,
        energy in -5.0f64..5.0, seed in any::<u64>(),
    ) {
        let t = TreeTopology::new(k, depth).unwrap();
        let v = PotentialSample::draw(&t, &DisorderSpec::default(), StreamId::new(seed, 1));
        let eig = assemble(&t, &v, lambda).unwrap().dense().symmetric_eigenvalues();
        prop_assume!(eig.iter().all(|e| (e - energy).abs() > 1e-9));
        let expect = eig.iter().filter(|e| **e < energy).count();
        prop_assert_eq!(eigenvalues_below(&t, &v, lambda, energy), expect);
        let ground = eig.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!((ground_state_by_inertia(&t, &v, lambda, 1e-12) - ground).abs() < 1e-9);
    }

    #[test]
    fn monotone_bound_on_arbitrary_samples(
        k in 2usize..=4, depth in 1usize..=6, lambda in 0.001f64..0.08,
        spec in specs(), seed in any::<u64>(),
    ) {
        let t = TreeTopology::new(k, depth).unwrap();
        let v = PotentialSample::draw(&t, &spec, StreamId::new(seed, 2));
        let (left, right) = monotone_bound_sides(&t, &v, lambda).unwrap();
        prop_assert!(left >= right * (1.0 - 1e-12), "{} < {}", left, right);
    }

    #[test]
    fn resolvent_identity_holds(
        r in 1usize..=5, m in 2usize..=4, lambda in 0.0f64..1.0,
        energy in -3.5f64..3.5, log_eta in -4.0f64..-1.0, seed in any::<u64>(),
    ) {
        let t = TreeTopology::new(2, r + m).unwrap();
        let v = PotentialSample::draw(&t, &DisorderSpec::default(), StreamId::new(seed, 3));
        let p = SpectralPoint::new(energy, 10f64.powf(log_eta), lambda).unwrap();
        let report = truncation_error(2, &p, r, m, &v).unwrap();
        prop_assert!(report.residual_ok(), "{:?}", report);
        prop_assert!(report.triangle_ok(), "{:?}", report);
    }

    #[test]
    fn free_lyapunov_shape(k in 2usize..=6, energy in -12.0f64..12.0) {
        let kf = k as f64;
        let l = free_lyapunov(k, energy);
        prop_assert!((l - free_lyapunov(k, -energy)).abs() < 1e-12);
        prop_assert!(l >= 0.5 * kf.ln() - 1e-12);
        if energy.abs() <= 2.0 * kf.sqrt() {
            prop_assert!((l - 0.5 * kf.ln()).abs() < 1e-12);
        } else {
            prop_assert!(free_lyapunov(k, energy.abs() + 0.1) > l);
        }
        prop_assert_eq!(l < kf.ln(), energy.abs() < kf + 1.0);
    }

    #[test]
    fn streams_are_reproducible_and_in_support(seed in any::<u64>(), stream in any::<u64>(), spec in specs()) {
        let a = sample(&spec, StreamId::new(seed, stream), 64);
        let b = sample(&spec, StreamId::new(seed, stream), 64);
        prop_assert_eq!(&a, &b);
        prop_assert!(a.iter().all(|x| spec.support().contains(*x)));
        prop_assert_ne!(a, sample(&spec, StreamId::new(seed, stream.wrapping_add(1)), 64));
        prop_assert_ne!(derive_seed(seed, stream), derive_seed(seed, stream.wrapping_add(1)));
    }

    #[test]
    fn sig9_is_idempotent_and_close(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let y = sig9(x);
        prop_assert_eq!(sig9(y), y);
        prop_assert!((y - x).abs() <= 5e-9 * x.abs());
    }

    #[test]
    fn extrapolation_recovers_linear_intercept(a in 0.1f64..2.0, b in -50.0f64..50.0) {
        let points: Vec<(f64, LyapunovEstimate)> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&eta| (eta, LyapunovEstimate::exact(a + b * eta, eta)))
            .collect();
        let x = extrapolate_eta(&points).unwrap();
        prop_assert!((x.estimate.mean - a).abs() < 1e-9);
        prop_assert!(!x.flagged);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn inverse_iteration_finds_ground_state(k in 2usize..=3, depth in 1usize..=4, lambda in 0.0f64..1.0, seed in any::<u64>()) {
        let t = TreeTopology::new(k, depth).unwrap();
        let v = PotentialSample::draw(&t, &DisorderSpec::default(), StreamId::new(seed, 4));
        let h = assemble(&t, &v, lambda).unwrap();
        let dense = h.dense().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!((smallest_eigenvalue(&h, 1e-10).unwrap() - dense).abs() < 1e-8);
    }
}
