use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::{ArgGroup, Args};
use serde::Serialize;

use vdt_core::aerodb::{load_database, AeroDatabase};
use vdt_core::flightsim::fidelity::{compare_databases, CruiseScenario};
use vdt_core::flightsim::{
    run_mission, square_pattern, ControllerGains, Integrator, MissionProfile, Plant, Segment, SimConfig, SimError,
};
use vdt_core::propulsion::ThrustCurve;
use vdt_core::vehicle::BodyState;

use crate::manifest::RunManifest;
use crate::{create_out_dir, input_error, write_json, write_jsonl, Classify, Failure, Outcome};

#[derive(Args)]
#[command(group(ArgGroup::new("profile").required(true).args(["square", "mission"])))]
pub struct SimulateArgs {
    /// Square pattern: side length (m), speed (m/s), altitude (m).
    #[arg(long, num_args = 3, value_names = ["SIDE", "SPEED", "ALTITUDE"])]
    square: Option<Vec<f64>>,
    /// Mission file (JSON).
    #[arg(long)]
    mission: Option<PathBuf>,
    /// Aerodynamic database directory; without one only rotor loads act.
    #[arg(long)]
    db: Option<PathBuf>,
    /// Controller gains (JSON).
    #[arg(long)]
    gains: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.004)]
    dt: f64,
    /// Forward Euler instead of RK4.
    #[arg(long)]
    euler: bool,
}

#[derive(Serialize)]
struct SimSummary {
    mission: String,
    ticks: usize,
    duration: f64,
    final_position: [f64; 3],
    /// Distance from the final position to the mission's end target.
    final_position_error: Option<f64>,
    rejected_setpoints: usize,
    aero_clamped_ticks: usize,
    halted: Option<String>,
}

#[derive(Serialize)]
struct HaltDump {
    time: f64,
    error: String,
    state: BodyState,
}

pub fn load_db(path: &PathBuf) -> Result<Arc<AeroDatabase>, Failure> {
    load_database(path)
        .with_context(|| format!("loading aerodynamic database {}", path.display()))
        .map(Arc::new)
        .or_input()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .or_input()?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .or_input()
}

/// Where the mission should end: the start of a square, or the last waypoint.
fn end_target(profile: &MissionProfile, square: bool) -> Option<[f64; 3]> {
    if square {
        return Some(profile.initial.position);
    }
    profile.segments.iter().rev().find_map(|s| match s {
        Segment::Waypoint { position, .. } => Some(*position),
        _ => None,
    })
}

pub fn run_simulate(args: SimulateArgs) -> Outcome {
    let (profile, is_square) = match (&args.square, &args.mission) {
        (Some(v), _) => {
            let [side, speed, alt] = v[..] else {
                return Err(input_error("--square takes SIDE SPEED ALTITUDE"));
            };
            if !(side > 0.0 && speed > 0.0 && alt.is_finite()) {
                return Err(input_error("--square needs positive side and speed"));
            }
            (square_pattern(side, speed, alt), true)
        }
        (None, Some(p)) => (
            MissionProfile::from_json_file(p)
                .with_context(|| format!("loading mission {}", p.display()))
                .or_input()?,
            false,
        ),
        (None, None) => return Err(input_error("either --square or --mission is required")),
    };
    let aero = args.db.as_ref().map(load_db).transpose()?;
    let gains = match &args.gains {
        Some(p) => read_json::<ControllerGains>(p)?,
        None => ControllerGains::default(),
    };
    gains.validate().map_err(input_error)?;
    let cfg = SimConfig {
        dt: args.dt,
        integrator: if args.euler { Integrator::Euler } else { Integrator::Rk4 },
        seed: args.seed,
        ..Default::default()
    };
    cfg.validate().or_input()?;
    create_out_dir(&args.out)?;

    let plant = Arc::new(Plant::kp2(aero));
    let run = run_mission(&profile, plant, &cfg, &gains).or_runtime()?;
    write_jsonl(&args.out.join("telemetry.jsonl"), &run.records)?;
    let last = run.final_state().copied().unwrap_or_default();
    let final_position: [f64; 3] = last.position_ned().into();
    let final_position_error = end_target(&profile, is_square).map(|t| {
        let d: f64 = (0..3).map(|k| (final_position[k] - t[k]).powi(2)).sum();
        d.sqrt()
    });
    let summary = SimSummary {
        mission: profile.name.clone(),
        ticks: run.records.len().saturating_sub(1),
        duration: run.records.last().map_or(0.0, |r| r.t),
        final_position,
        final_position_error,
        rejected_setpoints: run.rejected_setpoints,
        aero_clamped_ticks: run.records.iter().filter(|r| r.aero_clamped).count(),
        halted: run.error.as_ref().map(|e| e.to_string()),
    };
    write_json(&args.out.join("summary.json"), &summary)?;

    let mut halt_path = None;
    if let Some(SimError::Halted { time, state, source }) = &run.error {
        let path = args.out.join("halt_state.json");
        write_json(
            &path,
            &HaltDump {
                time: *time,
                error: source.to_string(),
                state: **state,
            },
        )?;
        halt_path = Some(path);
    }
    let mut config_paths = Vec::new();
    config_paths.extend(args.mission.iter().map(|p| p.display().to_string()));
    config_paths.extend(args.db.iter().map(|p| p.display().to_string()));
    config_paths.extend(args.gains.iter().map(|p| p.display().to_string()));
    RunManifest::new("simulate", config_paths, Some(args.seed), &args.out)
        .write()
        .or_runtime()?;

    println!("mission {} ({:.1} s, {} ticks)", summary.mission, summary.duration, summary.ticks);
    match summary.final_position_error {
        Some(e) => println!("final position error {e:.3} m"),
        None => println!("final position {:?}", summary.final_position),
    }
    println!(
        "rejected setpoints {}, aero table clamps {} ticks",
        summary.rejected_setpoints, summary.aero_clamped_ticks
    );
    if let Some(e) = run.error {
        let dump = halt_path.map_or(String::new(), |p| format!("; state written to {}", p.display()));
        return Err(Failure::Runtime(anyhow::anyhow!("{e}{dump}")));
    }
    Ok(())
}

#[derive(Args)]
pub struct CompareArgs {
    /// LABEL=PATH of each database to fly.
    #[arg(long = "db", required = true, value_parser = parse_labeled)]
    dbs: Vec<(String, PathBuf)>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 25.0)]
    speed: f64,
    #[arg(long, default_value_t = 0.3)]
    throttle: f64,
    #[arg(long, default_value_t = 4.0)]
    duration: f64,
}

fn parse_labeled(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((label, path)) if !label.is_empty() && !path.is_empty() => Ok((label.to_string(), path.into())),
        _ => Err(format!("`{s}` is not LABEL=PATH")),
    }
}

pub fn run_compare(args: CompareArgs) -> Outcome {
    let dbs: Vec<(String, Arc<AeroDatabase>)> = args
        .dbs
        .iter()
        .map(|(label, path)| Ok((label.clone(), load_db(path)?)))
        .collect::<Result<_, Failure>>()?;
    let scenario = CruiseScenario {
        speed: args.speed,
        throttle: args.throttle,
        duration: args.duration,
        ..Default::default()
    };
    create_out_dir(&args.out)?;
    let refs: Vec<(&str, Arc<AeroDatabase>)> = dbs.iter().map(|(l, d)| (l.as_str(), d.clone())).collect();
    let traces = compare_databases(&refs, &scenario, &SimConfig::default()).or_runtime()?;
    write_json(&args.out.join("fidelity.json"), &traces)?;
    for t in &traces {
        let halted = t.halted.as_deref().map_or(String::new(), |h| format!(" (halted: {h})"));
        println!("{:<12} steady pitch {:+.2} deg{halted}", t.label, t.steady_pitch_deg);
    }
    let paths = args.dbs.iter().map(|(_, p)| p.display().to_string()).collect();
    RunManifest::new("compare", paths, None, &args.out).write().or_runtime()?;
    Ok(())
}

#[derive(Args)]
pub struct ThrustArgs {
    /// Axial inflow speed, m/s.
    #[arg(long, allow_hyphen_values = true)]
    inflow: f64,
}

pub fn run_thrust(args: ThrustArgs) -> Outcome {
    if !(args.inflow >= 0.0) {
        return Err(input_error(format!("inflow {} must be ≥ 0", args.inflow)));
    }
    let thrust = ThrustCurve::default().max_thrust(args.inflow).or_input()?;
    println!("{thrust:.4}");
    Ok(())
}
