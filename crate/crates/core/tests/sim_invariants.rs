mod common;

use common::*;
use proptest::prelude::*;
use stripfold::paths::{run_path, GripperPath, PathKind, BASELINE_SPEED};
use stripfold::reward::RewardConfig;
use stripfold::sim::{b_min, folded_height, StripParams, StripSim, StripState, Vec2};
use stripfold::Error;

fn desk(k: f64, b_factor: f64) -> StripParams {
    StripParams::desk_scale().with_material(k, b_min(k) * b_factor)
}

#[test]
fn baseline_paths_keep_links_pin_and_desk() {
    for kind in [PathKind::Triangular, PathKind::Circular] {
        for (k, bf) in [(0.02, 1.0), (0.3, 50.0)] {
            let e = drive_extremes(&desk(k, bf), &GripperPath::of_kind(kind, 0.6), BASELINE_SPEED);
            assert!(e.link_error < 1e-6, "{kind:?} k={k}: link error {}", e.link_error);
            assert_eq!(e.pin_offset, 0.0);
            assert!(e.min_height >= 0.0005 - 1e-5, "{kind:?} k={k}: min z {}", e.min_height);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]
    #[test]
    fn random_polylines_keep_invariants(
        k in 0.02f64..0.3,
        bf in 1.0f64..50.0,
        xs in proptest::collection::vec(0.0f64..0.55, 3),
        zs in proptest::collection::vec(0.0f64..0.3, 3),
    ) {
        let params = desk(k, bf);
        let mut points = vec![Vec2::new(0.6, 0.0)];
        points.extend(xs.iter().zip(&zs).map(|(&x, &z)| Vec2::new(x, z)));
        let e = drive_extremes(&params, &GripperPath::polyline(&points), 0.1);
        prop_assert!(e.link_error < 1e-6, "link error {}", e.link_error);
        prop_assert_eq!(e.pin_offset, 0.0);
        prop_assert!(e.min_height >= params.sphere_radius - 1e-5);
    }
}

#[test]
fn pendulum_period_matches_point_pendulum() {
    for length in [0.01, 0.1] {
        let measured = pendulum_period(length, 0.1);
        let expected = analytic_pendulum_period(length, 9.81);
        assert!(
            (measured / expected - 1.0).abs() < 0.05,
            "l={length}: {measured} vs {expected}"
        );
    }
}

#[test]
fn released_strip_dissipates_energy() {
    for (k, bf) in [(0.1, 5.0), (0.3, 1.0), (0.02, 50.0)] {
        let (rise, first, last) = released_energy_rise(&desk(k, bf), 600);
        assert!(rise <= 1e-9, "k={k} b/bmin={bf}: energy rose by {rise:e} J in one step");
        assert!(last < first);
    }
}

#[test]
fn hanging_strip_settles_symmetric() {
    let asym = mirror_asymmetry(&desk(0.1, 50.0), 0.4, 40.0);
    assert!(asym < 1e-4, "asymmetry {asym}");
}

#[test]
fn resting_strip_is_an_equilibrium() {
    let params = desk(0.1, 1.0);
    let mut sim = StripSim::new(&params).unwrap();
    let mut state = StripState::flat(&params).unwrap();
    let start = state.clone();
    for _ in 0..20 {
        let hold = state.gripper;
        let f = sim.step_in_place(&mut state, hold).unwrap();
        assert!(f.f_x.abs() < 1e-3, "f_x = {}", f.f_x);
    }
    let drift = start
        .positions
        .iter()
        .zip(&state.positions)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(drift < 1e-9, "drift {drift:e}");
}

#[test]
fn stepping_is_deterministic() {
    let params = desk(0.17, 3.0);
    let path = GripperPath::triangular(0.6);
    let a = run_path(&path, &params, BASELINE_SPEED, &RewardConfig::default()).unwrap();
    let b = run_path(&path, &params, BASELINE_SPEED, &RewardConfig::default()).unwrap();
    assert_eq!(a.d.to_bits(), b.d.to_bits());
    assert_eq!(a.force_trace.len(), b.force_trace.len());
    assert!(a.force_trace.iter().zip(&b.force_trace).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn non_finite_state_is_reported() {
    let params = desk(0.1, 1.0);
    let mut sim = StripSim::new(&params).unwrap();
    let mut state = StripState::flat(&params).unwrap();
    state.velocities[7].y = f64::NAN;
    let hold = state.gripper;
    match sim.step_in_place(&mut state, hold) {
        Err(Error::Divergence { step: 0, .. }) => {}
        other => panic!("expected divergence, got {other:?}"),
    }
}

// Regression values from this simulator at b = b_min.
const FOLDED_HEIGHTS: [(f64, f64); 3] = [
    (0.02, 0.011237417335484485),
    (0.1, 0.02008519948540234),
    (0.3, 0.029928660946458262),
];

#[test]
fn folded_height_fixtures() {
    let mut prev = 0.0;
    for (k, expected) in FOLDED_HEIGHTS {
        let h = folded_height(&desk(k, 1.0)).unwrap();
        assert!(h > 0.0 && h <= 0.3);
        assert!((h - expected).abs() < 1e-9, "k={k}: h = {h:?}");
        assert!(h > prev, "stiffer strips fold taller");
        prev = h;
    }
}
