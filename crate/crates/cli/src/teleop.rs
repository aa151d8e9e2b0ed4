use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::Args;

use vdt_core::bridge::{LinkFaults, Transport, UdpTransport};
use vdt_core::flightsim::Plant;
use vdt_core::session::{square_commands, ScriptedCommand, Session, SessionConfig, SessionOutput, StreamOutage};
use vdt_gateway::Gateway;

use crate::manifest::RunManifest;
use crate::sim::load_db;
use crate::{create_out_dir, input_error, write_json, write_jsonl, Classify, Failure, Outcome};

#[derive(Args)]
pub struct TeleopArgs {
    /// Session length, s.
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    /// UDP address of the digital side (requires --physical-endpoint).
    #[arg(long, requires = "physical_endpoint")]
    digital_endpoint: Option<SocketAddr>,
    /// UDP address of the physical side.
    #[arg(long, requires = "digital_endpoint")]
    physical_endpoint: Option<SocketAddr>,
    /// Serve the operator gateway (WebSocket + HTTP) on this address.
    #[arg(long)]
    gateway: Option<SocketAddr>,
    /// One-way loopback delay, s.
    #[arg(long, default_value_t = 0.0)]
    delay: f64,
    /// Loopback drop probability.
    #[arg(long, default_value_t = 0.0)]
    loss: f64,
    /// Swap every n-th loopback datagram with the next one.
    #[arg(long)]
    reorder_every: Option<u64>,
    /// Stop the setpoint stream at this time, s.
    #[arg(long)]
    kill_at: Option<f64>,
    /// Restart the stream at this time, s.
    #[arg(long, requires = "kill_at")]
    resume_at: Option<f64>,
    /// Scripted operator square: side (m) and speed (m/s), starting at 2 s.
    #[arg(long, num_args = 2, value_names = ["SIDE", "SPEED"])]
    square: Option<Vec<f64>>,
    /// Operator script file (JSON list of {at, command}).
    #[arg(long, conflicts_with = "square")]
    script: Option<PathBuf>,
    /// No scripted commands (live gateway input only).
    #[arg(long, conflicts_with_all = ["square", "script"])]
    no_script: bool,
    /// Pace the loopback session to the wall clock.
    #[arg(long)]
    realtime: bool,
    /// Aerodynamic database for both twins.
    #[arg(long)]
    db: Option<PathBuf>,
    /// Session settings (JSON); flags override the matching fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn build_config(args: &TeleopArgs) -> Result<SessionConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .or_input()?;
            serde_json::from_str::<SessionConfig>(&text)
                .with_context(|| format!("parsing {}", p.display()))
                .or_input()?
        }
        None => SessionConfig::default(),
    };
    cfg.duration = args.duration;
    cfg.link = LinkFaults {
        delay: args.delay,
        loss: args.loss,
        reorder_every: args.reorder_every,
        seed: args.seed,
        ..cfg.link
    };
    cfg.sim.seed = args.seed;
    if let Some(start) = args.kill_at {
        if args.resume_at.is_some_and(|r| r <= start) {
            return Err(input_error("--resume-at must come after --kill-at"));
        }
        cfg.outage = Some(StreamOutage {
            start,
            end: args.resume_at,
        });
    }
    cfg.realtime = args.realtime || args.gateway.is_some() || args.digital_endpoint.is_some();
    cfg.validate().or_input()?;
    Ok(cfg)
}

fn build_script(args: &TeleopArgs) -> Result<Vec<ScriptedCommand>, Failure> {
    if args.no_script {
        return Ok(Vec::new());
    }
    if let Some(p) = &args.script {
        let text = std::fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))
            .or_input()?;
        return serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", p.display()))
            .or_input();
    }
    let (side, speed) = match args.square.as_deref() {
        Some(&[side, speed]) => (side, speed),
        _ => (20.0, 2.0),
    };
    if !(side > 0.0 && speed > 0.0) {
        return Err(input_error("--square needs positive side and speed"));
    }
    Ok(square_commands(side, speed, 2.0))
}

fn write_outputs(out: &SessionOutput, dir: &std::path::Path) -> Outcome {
    write_jsonl(&dir.join("digital.jsonl"), &out.digital)?;
    write_jsonl(&dir.join("physical.jsonl"), &out.physical)?;
    write_jsonl(&dir.join("sends.jsonl"), &out.sends)?;
    write_jsonl(&dir.join("arrivals.jsonl"), &out.arrivals)?;
    write_json(&dir.join("offboard_events.json"), &out.offboard_events)?;
    write_json(&dir.join("metrics.json"), &out.report.metrics)?;
    write_json(&dir.join("report.json"), &out.report)
}

pub fn run_teleop(args: TeleopArgs) -> Outcome {
    if args.delay > 0.0 && args.digital_endpoint.is_some() {
        log::warn!("--delay only applies to the loopback link");
    }
    let cfg = build_config(&args)?;
    let script = build_script(&args)?;
    let aero = args.db.as_ref().map(load_db).transpose()?;
    create_out_dir(&args.out)?;
    let plant = Arc::new(Plant::kp2(aero));
    let mut session = Session::new(cfg, plant).or_input()?.with_script(script);

    if let (Some(d), Some(p)) = (args.digital_endpoint, args.physical_endpoint) {
        let digital = UdpTransport::bind(d, p)
            .with_context(|| format!("binding digital endpoint {d}"))
            .or_runtime()?;
        let physical = UdpTransport::bind(p, d)
            .with_context(|| format!("binding physical endpoint {p}"))
            .or_runtime()?;
        session = session.with_links(
            Box::new(digital) as Box<dyn Transport>,
            Box::new(physical) as Box<dyn Transport>,
        );
    }

    let output = match args.gateway {
        Some(addr) => {
            let rt = tokio::runtime::Runtime::new().or_runtime()?;
            rt.block_on(async {
                let (listener, local) = vdt_gateway::bind(addr)
                    .await
                    .with_context(|| format!("binding gateway {addr}"))
                    .or_runtime()?;
                println!("gateway on ws://{local}/session");
                Gateway::new().run_session(listener, session).await.or_runtime()
            })?
        }
        None => session.run().or_runtime()?,
    };
    write_outputs(&output, &args.out)?;
    let mut config_paths = Vec::new();
    config_paths.extend(args.config.iter().map(|p| p.display().to_string()));
    config_paths.extend(args.script.iter().map(|p| p.display().to_string()));
    config_paths.extend(args.db.iter().map(|p| p.display().to_string()));
    RunManifest::new("teleop", config_paths, Some(args.seed), &args.out)
        .write()
        .or_runtime()?;

    let r = &output.report;
    println!(
        "sends {} (missed {}), clamped {}, unclamped {}, received {} (dup {}, late {}, missing {})",
        r.sends, r.missed_deadlines, r.clamp_events, r.unclamped_setpoints, r.received, r.duplicates, r.out_of_order, r.missing
    );
    if let Some(m) = &r.metrics.link {
        println!("link lag {:.3} s", m.lag_estimate);
    }
    if let Some(m) = &r.metrics.tracking {
        println!("physical tracking RMS {:.3} m/s (lag {:.3} s)", m.rms_velocity_norm(), m.lag_estimate);
    }
    if let Some(t) = r.lost_at {
        println!("offboard lost at {t:.3} s");
    }
    if let Some(h) = &r.halted {
        return Err(Failure::Runtime(anyhow::anyhow!("session halted: {h}")));
    }
    if r.starved() {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "physical side received no setpoints (stream starvation)"
        )));
    }
    Ok(())
}
