use mated_crt::field::LqgMeasure;
use mated_crt::lbm::{
    estimate_m0, liouville_clock, polar_bin, quantum_exit_time, time_change, BrownianPath, ConstantDensity, FnDensity,
    LbmPath, M0Options, Scaled,
};
use mated_crt::rng::stream;
use proptest::prelude::*;

fn bumpy(x: f64, y: f64) -> f64 {
    1.0 + 0.5 * (3.0 * x).sin() * (2.0 * y).cos()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clock_is_monotone_and_starts_at_zero(seed in any::<u64>(), steps in 1usize..400) {
        let path = BrownianPath::sample((0.1, -0.2), 1e-3, steps, &mut stream(seed, "test/path", 0));
        let clock = liouville_clock(&path, &FnDensity(bumpy));
        prop_assert_eq!(clock.len(), steps + 1);
        prop_assert_eq!(clock[0], 0.0);
        prop_assert!(clock.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn clock_is_linear_in_the_density(seed in any::<u64>(), c in 0.01f64..50.0) {
        let path = BrownianPath::sample((0.0, 0.0), 1e-3, 300, &mut stream(seed, "test/path", 0));
        let d = FnDensity(bumpy);
        let base = liouville_clock(&path, &d);
        let scaled = liouville_clock(&path, &Scaled(&d, c));
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert!((c * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn time_change_inverts_the_clock(seed in any::<u64>(), c in 0.1f64..10.0, m0 in 0.05f64..5.0) {
        let path = BrownianPath::sample((0.0, 0.0), 1e-3, 200, &mut stream(seed, "test/path", 0));
        let lbm = LbmPath::new(path, &FnDensity(bumpy), c, m0);
        for (k, &phi) in lbm.clock.iter().enumerate() {
            let (x, y) = time_change(&lbm, phi / (m0 * c)).unwrap();
            // a frozen clock resolves to the first knot of the plateau
            let first = lbm.clock.partition_point(|&v| v < phi);
            let (px, py) = lbm.base.positions[first];
            prop_assert!((x - px).abs() < 1e-9 && (y - py).abs() < 1e-9, "knot {}", k);
        }
        prop_assert!(time_change(&lbm, lbm.horizon() * 1.01 + 1e-9).is_err());
        prop_assert!(time_change(&lbm, -1.0).is_err());
    }

    #[test]
    fn exit_time_scales_with_the_density(seed in any::<u64>(), c in 0.1f64..10.0) {
        let d = FnDensity(bumpy);
        let a = quantum_exit_time(&d, (0.0, 0.0), 0.3, 1e-3, 100_000, &mut stream(seed, "test/exit", 0)).unwrap();
        let b = quantum_exit_time(&Scaled(&d, c), (0.0, 0.0), 0.3, 1e-3, 100_000, &mut stream(seed, "test/exit", 0)).unwrap();
        prop_assert!((c * a - b).abs() <= 1e-10 * b.max(1.0));
    }

    #[test]
    fn polar_bins_cover_the_disk(x in -1.0f64..1.0, y in -1.0f64..1.0, rho in 0.1f64..1.0) {
        let bin = polar_bin(x, y, rho);
        prop_assert_eq!(bin.is_some(), x * x + y * y < rho * rho);
        prop_assert!(bin.is_none_or(|b| b < 16));
    }
}

#[test]
fn constant_density_clock_counts_steps() {
    let path = BrownianPath::sample((0.0, 0.0), 1e-4, 500, &mut stream(3, "test/path", 0));
    let clock = liouville_clock(&path, &ConstantDensity(2.5));
    for (k, v) in clock.iter().enumerate() {
        assert!((v - 2.5e-4 * k as f64).abs() < 1e-12);
    }
}

#[test]
fn clock_freezes_after_leaving_the_domain() {
    let path = BrownianPath { dt: 0.1, positions: vec![(0.0, 0.0), (0.9, 0.0), (1.5, 0.0), (0.0, 0.0), (0.0, 0.0)] };
    let clock = liouville_clock(&path, &ConstantDensity(1.0));
    assert_eq!(clock.len(), 5);
    assert!((clock[2] - 0.2).abs() < 1e-12);
    assert_eq!(clock[3], clock[2]);
    assert_eq!(clock[4], clock[2]);
}

#[test]
fn m0_is_equivariant_under_scaling() {
    let opts = M0Options { bootstrap: 0, ..M0Options::with_dt(1e-3) };
    let lebesgue = LqgMeasure::lebesgue(64);
    let a = estimate_m0(&lebesgue, 400, &opts, 11).unwrap();
    let b = estimate_m0(&Scaled(&lebesgue, 7.0), 400, &opts, 11).unwrap();
    assert!((7.0 * a.median - b.median).abs() < 1e-9);
    assert_eq!(a.failed, 0);
}

#[test]
fn polar_bins_have_equal_area() {
    let mut rng = stream(5, "test/bins", 0);
    let mut counts = [0u64; 16];
    let mut total = 0u64;
    while total < 160_000 {
        let (x, y): (f64, f64) =
            (rand::Rng::random_range(&mut rng, -1.0..1.0), rand::Rng::random_range(&mut rng, -1.0..1.0));
        if let Some(b) = polar_bin(x, y, 1.0) {
            counts[b] += 1;
            total += 1;
        }
    }
    // each bin holds 10000 in expectation; 5 standard deviations is 500
    for c in counts {
        assert!((c as f64 - 10_000.0).abs() < 500.0, "{counts:?}");
    }
}
