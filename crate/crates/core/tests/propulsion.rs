mod common;

use proptest::prelude::*;

use common::SplineOracle;
use vdt_core::propulsion::{PropulsionCommand, PropulsionError, ThrustCurve};

const MEASURED: [(f64, f64); 5] = [(0.0, 67.3), (5.0, 65.5), (10.0, 60.9), (15.0, 55.3), (20.0, 48.8)];

#[test]
fn measured_points_reproduced_exactly() {
    let curve = ThrustCurve::default();
    for (v, t) in MEASURED {
        assert_eq!(curve.max_thrust(v).unwrap(), t, "inflow {v}");
    }
}

#[test]
fn strictly_decreasing_over_validated_range() {
    let curve = ThrustCurve::default();
    let samples: Vec<f64> = (0..=200).map(|i| curve.max_thrust(i as f64 * 0.1).unwrap()).collect();
    for (i, w) in samples.windows(2).enumerate() {
        assert!(w[1] < w[0], "not decreasing at {:.1} m/s", i as f64 * 0.1);
    }
}

#[test]
fn matches_dense_spline_solve() {
    let curve = ThrustCurve::default();
    let oracle = SplineOracle::new(&MEASURED);
    for i in 0..=400 {
        let v = i as f64 * 0.05;
        let (a, b) = (curve.max_thrust(v).unwrap(), oracle.eval(v));
        assert!((a - b).abs() < 1e-9, "{v}: {a} vs {b}");
    }
}

#[test]
fn natural_end_conditions() {
    let c = ThrustCurve::default();
    let coef = c.coefficients();
    assert_eq!(coef[0][2], 0.0);
    let [_, _, c2, d] = coef[coef.len() - 1];
    // Second derivative at the right end: 2c + 6d·h.
    assert!((2.0 * c2 + 6.0 * d * 5.0).abs() < 1e-12);
}

#[test]
fn beyond_range_flagged_and_negative_rejected() {
    let curve = ThrustCurve::default();
    assert!(!curve.evaluate(20.0).unwrap().extrapolated);
    assert!(!curve.evaluate(25.0).unwrap().extrapolated);
    assert!(curve.evaluate(31.0).unwrap().extrapolated);
    assert!(matches!(curve.evaluate(-0.5), Err(PropulsionError::NegativeInflow(_))));
    assert!(curve.evaluate(f64::NAN).is_err());
}

#[test]
fn bad_commands_rejected() {
    assert!(PropulsionCommand::new([0.5, 0.5, 1.2, 0.5], 45.0).is_err());
    assert!(PropulsionCommand::new([0.5; 4], 95.0).is_err());
    assert!(PropulsionCommand::new([0.0, 1.0, 0.3, 0.7], 90.0).is_ok());
}

#[test]
fn custom_knots_validated() {
    assert!(ThrustCurve::new(vec![(0.0, 1.0)]).is_err());
    assert!(ThrustCurve::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
    assert!(ThrustCurve::new(vec![(0.0, 1.0), (1.0, f64::INFINITY)]).is_err());
}

proptest! {
    #[test]
    fn spline_interpolates_any_knots(ys in proptest::collection::vec(-100.0f64..100.0, 3..8)) {
        let knots: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, y)| (2.0 * i as f64, *y)).collect();
        let curve = ThrustCurve::new(knots.clone()).unwrap();
        let oracle = SplineOracle::new(&knots);
        for (x, y) in &knots {
            prop_assert!((curve.max_thrust(*x).unwrap() - y).abs() < 1e-9);
        }
        let end = knots.last().unwrap().0;
        for k in 0..50 {
            let x = end * k as f64 / 49.0;
            prop_assert!((curve.max_thrust(x).unwrap() - oracle.eval(x)).abs() < 1e-7);
        }
    }
}
