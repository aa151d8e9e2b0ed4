use std::collections::BTreeMap;
use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};

use vdt_bench::{sample_loads, sample_state, small_campaign};
use vdt_core::aerodb::{coefficient_buildup, FlightCondition, SPEED_OF_SOUND};
use vdt_core::bridge::{decode_frame, encode_frame, Frame, Message, SetPositionTarget};
use vdt_core::datafusion::{fit_ehk, fit_kriging, lf_only_database, FusionConfig, GridSpec};
use vdt_core::flightsim::{step, Actuation, Plant, SimConfig};
use vdt_core::propulsion::{PropulsionCommand, ThrustCurve};
use vdt_core::vehicle::{state_derivative, VehicleParams};

fn dynamics(c: &mut Criterion) {
    let (s, fm, params) = (sample_state(), sample_loads(), VehicleParams::default());
    c.bench_function("state_derivative", |b| {
        b.iter(|| state_derivative(black_box(&s), black_box(&fm), &params).unwrap())
    });
    let plant = Arc::new(Plant::kp2(None));
    let act = Actuation::propulsion_only(PropulsionCommand::new([0.5; 4], 90.0).unwrap());
    let cfg = SimConfig::default();
    c.bench_function("rk4_step", |b| b.iter(|| step(&plant, black_box(&s), &act, &cfg).unwrap()));
    let curve = ThrustCurve::default();
    c.bench_function("thrust_spline", |b| b.iter(|| curve.max_thrust(black_box(12.3)).unwrap()));
}

fn aero(c: &mut Criterion) {
    let sc = small_campaign();
    let db = lf_only_database(&sc.lf[0], &GridSpec::default(), &FusionConfig::default()).unwrap();
    let cond = FlightCondition {
        alpha: 4.3,
        beta: 2.1,
        airspeed: 20.0,
        mach: 20.0 / SPEED_OF_SOUND,
        p: 0.1,
        q: 0.2,
        r: -0.1,
        deflections: BTreeMap::from([("elevator".to_string(), 3.0)]),
        air_density: 1.225,
    };
    c.bench_function("coefficient_buildup", |b| {
        b.iter(|| coefficient_buildup(&db, black_box(&cond)).unwrap())
    });
}

fn fusion(c: &mut Criterion) {
    let sc = small_campaign();
    let cfg = FusionConfig::default();
    let mut g = c.benchmark_group("fusion");
    g.sample_size(10);
    g.bench_function("kriging_fit_200", |b| b.iter(|| fit_kriging(&sc.lf[0], "CL", &cfg).unwrap()));
    let lf: Vec<_> = sc.lf.iter().map(|d| fit_kriging(d, "CL", &cfg).unwrap()).collect();
    g.bench_function("ehk_fit_25", |b| b.iter(|| fit_ehk(&sc.hf, "CL", lf.clone(), &cfg).unwrap()));
    g.finish();
}

fn codec(c: &mut Criterion) {
    let frame = Frame {
        sequence: 7,
        system_id: 1,
        component_id: 1,
        message: Message::SetPositionTarget(SetPositionTarget {
            type_mask: 0x9C7,
            vx: 1.5,
            vy: -2.0,
            vz: 0.25,
            yaw: 0.5,
            ..Default::default()
        }),
    };
    let bytes = encode_frame(&frame);
    c.bench_function("encode_frame", |b| b.iter(|| encode_frame(black_box(&frame))));
    c.bench_function("decode_frame", |b| b.iter(|| decode_frame(black_box(&bytes)).unwrap()));
}

criterion_group!(benches, dynamics, aero, fusion, codec);
criterion_main!(benches);
