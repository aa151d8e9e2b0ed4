mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use common::nested_lerp;
use vdt_core::aerodb::{
    coefficient_buildup, database_with_default_increments, load_database, save_database, AeroDatabase, AeroError,
    AeroTable, Coefficient, FlightCondition, ReferenceGeometry, SPEED_OF_SOUND,
};
use vdt_core::datafusion::emulator::ground_truth;
use vdt_core::datafusion::GridSpec;

fn truth_db() -> AeroDatabase {
    let grid = GridSpec::default();
    let baselines = Coefficient::ALL
        .into_iter()
        .map(|c| {
            let t = AeroTable::from_fn(&["alpha", "beta"], vec![grid.alpha.clone(), grid.beta.clone()], |x| {
                ground_truth(x[0], x[1]).get(c)
            })
            .unwrap();
            (c, t)
        })
        .collect();
    database_with_default_increments(ReferenceGeometry::default(), baselines).unwrap()
}

fn level(alpha: f64, beta: f64, airspeed: f64) -> FlightCondition {
    FlightCondition {
        alpha,
        beta,
        airspeed,
        mach: airspeed / SPEED_OF_SOUND,
        p: 0.0,
        q: 0.0,
        r: 0.0,
        deflections: BTreeMap::new(),
        air_density: 1.225,
    }
}

#[test]
fn unperturbed_buildup_is_the_baseline() {
    let db = truth_db();
    for (alpha, beta) in [(3.3, 1.7), (-12.1, 8.8), (27.0, 19.9)] {
        let out = coefficient_buildup(&db, &level(alpha, beta, 20.0)).unwrap();
        assert!(!out.clamped);
        for c in Coefficient::ALL {
            let base = db.tables(c).baseline.interpolate(&[("alpha", alpha), ("beta", beta)]).unwrap();
            assert_eq!(out.coefficients.get(c), base.value, "{c} at ({alpha}, {beta})");
        }
    }
}

#[test]
fn grid_nodes_are_bit_exact() {
    let db = truth_db();
    let grid = GridSpec::default();
    for &alpha in &grid.alpha {
        for &beta in &grid.beta {
            let out = coefficient_buildup(&db, &level(alpha, beta, 20.0)).unwrap();
            let t = ground_truth(alpha, beta);
            for c in Coefficient::ALL {
                assert_eq!(out.coefficients.get(c), t.get(c), "{c} at ({alpha}, {beta})");
            }
        }
    }
}

#[test]
fn pitch_rate_increment_by_hand() {
    let db = truth_db();
    let mut cond = level(5.0, 0.0, 20.0);
    cond.q = 0.8;
    let out = coefficient_buildup(&db, &cond).unwrap().coefficients;
    let t = ground_truth(5.0, 0.0);
    // q̂ = c̄ q / 2U = 0.2995 · 0.8 / 40 = 0.00599
    assert!((out.CL - (t.CL + 5.5 * 0.00599)).abs() < 1e-12);
    assert!((out.Cm - (t.Cm - 12.0 * 0.00599)).abs() < 1e-12);
    assert_eq!(out.CY, t.CY);
    assert_eq!(out.Cn, t.Cn);
}

#[test]
fn roll_and_yaw_rate_use_span() {
    let db = truth_db();
    let mut cond = level(0.0, 0.0, 25.0);
    cond.p = 0.5;
    cond.r = -0.2;
    let out = coefficient_buildup(&db, &cond).unwrap().coefficients;
    // p̂ = 2 · 0.5 / 50 = 0.02, r̂ = 2 · (−0.2) / 50 = −0.008
    assert!((out.Cl - (-0.45 * 0.02 + 0.1 * -0.008)).abs() < 1e-12);
    assert!((out.Cn - (-0.04 * 0.02 - 0.12 * -0.008)).abs() < 1e-12);
}

#[test]
fn elevator_increment_in_radians() {
    let db = truth_db();
    let mut cond = level(2.5, 0.0, 20.0);
    cond.deflections.insert("elevator".into(), 10.0);
    let out = coefficient_buildup(&db, &cond).unwrap().coefficients;
    let t = ground_truth(2.5, 0.0);
    assert!((out.Cm - (t.Cm - 1.1 * 10f64.to_radians())).abs() < 1e-12);
    assert!((out.CL - (t.CL + 0.45 * 10f64.to_radians())).abs() < 1e-12);
}

#[test]
fn lateral_coefficients_flip_with_sideslip() {
    let db = truth_db();
    let pos = coefficient_buildup(&db, &level(4.0, 6.0, 20.0)).unwrap().coefficients;
    let neg = coefficient_buildup(&db, &level(4.0, -6.0, 20.0)).unwrap().coefficients;
    assert_eq!(pos.CL, neg.CL);
    assert_eq!(pos.CY, -neg.CY);
    assert_eq!(pos.Cl, -neg.Cl);
}

#[test]
fn outside_grid_is_flagged() {
    let db = truth_db();
    assert!(coefficient_buildup(&db, &level(35.0, 0.0, 20.0)).unwrap().clamped);
    let mut c = level(0.0, 0.0, 20.0);
    c.q = 3.0;
    assert!(coefficient_buildup(&db, &c).unwrap().clamped);
}

#[test]
fn bad_conditions_rejected() {
    let db = truth_db();
    let mut c = level(0.0, 0.0, 20.0);
    c.alpha = f64::NAN;
    assert!(matches!(coefficient_buildup(&db, &c), Err(AeroError::Argument(_))));
    assert!(coefficient_buildup(&db, &level(0.0, 0.0, -1.0)).is_err());
    let t = AeroTable::new(vec!["alpha".into()], vec![vec![0.0, 1.0]], vec![0.0, 1.0]).unwrap();
    assert!(matches!(t.interpolate(&[("beta", 0.5)]), Err(AeroError::MissingAxis(_))));
}

#[test]
fn disk_round_trip() {
    let db = truth_db();
    let dir = tempfile::tempdir().unwrap();
    save_database(&db, dir.path()).unwrap();
    assert_eq!(load_database(dir.path()).unwrap(), db);
}

#[test]
fn malformed_tables_rejected() {
    assert!(AeroTable::new(vec!["alpha".into()], vec![vec![0.0, 0.0]], vec![1.0, 2.0]).is_err());
    assert!(AeroTable::new(vec!["alpha".into()], vec![vec![0.0, 1.0]], vec![1.0]).is_err());
    assert!(AeroTable::new(vec!["speed".into()], vec![vec![0.0, 1.0]], vec![1.0, 2.0]).is_err());
}

fn grid_strategy() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.1f64..3.0, 1..5).prop_map(|steps| {
        let mut g = vec![-1.0];
        for s in steps {
            g.push(g.last().unwrap() + s);
        }
        g
    })
}

proptest! {
    #[test]
    fn interpolation_matches_nested_lerp(
        ga in grid_strategy(), gb in grid_strategy(), gm in grid_strategy(),
        seed in proptest::collection::vec(-5.0f64..5.0, 125),
        x in proptest::array::uniform3(-2.0f64..12.0),
    ) {
        let grids = vec![ga, gb, gm];
        let mut k = 0;
        let table = AeroTable::from_fn(&["alpha", "beta", "mach"], grids.clone(), |_| {
            k += 1;
            seed[k % seed.len()]
        }).unwrap();
        let got = table.interpolate(&[("alpha", x[0]), ("beta", x[1]), ("mach", x[2])]).unwrap().value;
        let want = nested_lerp(&grids, table.values(), &x);
        prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
    }
}
