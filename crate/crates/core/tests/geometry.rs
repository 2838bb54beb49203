use std::f64::consts::PI;

use escal_core::geometry::{
    array_factor, chord_length, path_delta, ArrayGeometry, PlaneWaveSource,
};
use escal_core::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn chord_and_closed_form_agree_on_random_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let r = rng.random_range(0.1..10.0);
        let theta = rng.random_range(0.0..PI / 2.0);
        let phi = rng.random_range(0.0..theta.max(1e-9));
        // chord projected on the propagation direction
        let c = chord_length(r, phi).unwrap();
        let omega = PI / 2.0 - theta + phi / 2.0;
        let chord_route = c * omega.cos();
        let closed = r * (theta - phi).cos() - r * theta.cos();
        worst = worst.max((chord_route - closed).abs());
        worst = worst.max((path_delta(r, theta, phi) - closed).abs());
    }
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn flat_limit_at_large_radius() {
    let d = 0.0714;
    let angles = [-80.0f64, -30.0, -1.0, 0.5, 30.0, 60.0, 89.0];
    // first element at R = 1e6 d
    let geom = ArrayGeometry::linear(2, d, 1e6 * d).unwrap();
    for deg in angles {
        let theta = deg.to_radians();
        let rel = (geom.path_delta(1, theta) - d * theta.sin()).abs() / d;
        assert!(rel <= 1e-6, "theta={deg} rel={rel}");
    }
    // the residual is n d cos(theta) / 2R, so element n needs R = 1e6 n d
    for n in 2..8usize {
        let geom = ArrayGeometry::linear(n + 1, d, 1e6 * n as f64 * d).unwrap();
        for deg in angles {
            let theta = deg.to_radians();
            let ula = n as f64 * d * theta.sin();
            let rel = (geom.path_delta(n, theta) - ula).abs() / (n as f64 * d);
            assert!(rel <= 1e-6, "n={n} theta={deg} rel={rel}");
        }
    }
}

fn geometry_strategy() -> impl Strategy<Value = (ArrayGeometry, PlaneWaveSource)> {
    (
        1usize..=2,
        2usize..=6,
        0.02f64..0.1,
        0.2f64..5.0,
        -1.5f64..1.5,
    )
        .prop_map(|(rows, cols, d, r, theta)| {
            (
                ArrayGeometry::tile(rows, cols, d, r).unwrap(),
                PlaneWaveSource::new(theta, 2.1e9, 1.0).unwrap(),
            )
        })
}

proptest! {
    #[test]
    fn af_magnitude_ignores_global_phase(
        (geom, src) in geometry_strategy(),
        rot in 0.0f64..(2.0 * PI),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<Complex64> = (0..geom.n_elements())
            .map(|_| Complex64::from_polar(rng.random_range(0.1..2.0), rng.random_range(0.0..2.0 * PI)))
            .collect();
        let g = Complex64::from_polar(1.0, rot);
        let rotated: Vec<Complex64> = w.iter().map(|&x| x * g).collect();
        let a = array_factor(&geom, &src, &w).unwrap().norm();
        let b = array_factor(&geom, &src, &rotated).unwrap().norm();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn af_triangle_bound_tight_for_conjugate(
        (geom, src) in geometry_strategy(),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mags: Vec<f64> = (0..geom.n_elements()).map(|_| rng.random_range(0.1..2.0)).collect();
        let bound: f64 = mags.iter().sum();
        let random: Vec<Complex64> = mags
            .iter()
            .map(|&m| Complex64::from_polar(m, rng.random_range(0.0..2.0 * PI)))
            .collect();
        prop_assert!(array_factor(&geom, &src, &random).unwrap().norm() <= bound + 1e-12);
        let phases = geom.geometric_phases(src.aoa_theta(), src.freq_rf());
        let conj: Vec<Complex64> = mags
            .iter()
            .zip(&phases)
            .map(|(&m, &p)| Complex64::from_polar(m, -p))
            .collect();
        let af = array_factor(&geom, &src, &conj).unwrap().norm();
        prop_assert!((af - bound).abs() <= 1e-9);
    }

    #[test]
    fn element_angles_follow_arc_length(cols in 2usize..10, d in 0.01f64..0.2, r in 0.1f64..10.0) {
        prop_assume!((cols - 1) as f64 * d / r < 2.0 * PI);
        let g = ArrayGeometry::linear(cols, d, r).unwrap();
        let a = g.element_angles();
        prop_assert_eq!(a[0], 0.0);
        for n in 1..cols {
            prop_assert!(a[n] > a[n - 1]);
            prop_assert!((a[n] - n as f64 * d / r).abs() <= 1e-15 * (n as f64 * d / r).max(1.0));
        }
    }
}
