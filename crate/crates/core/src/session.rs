//! Teleoperation session: digital and physical twins joined by the bridge.
//!
//! One driver owns both simulators and advances them on a shared session
//! clock. The twins only exchange data through the bridge transports, so
//! the same loop runs over the in-process loopback (deterministic, faster
//! than real time) or over UDP sockets paced to the wall clock.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::Receiver;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::codec::{Attitude, LocalPosition, SetPositionTarget};
use crate::bridge::{
    clamp_setpoint, compute_sync_metrics, decode_frame, encode_frame, loopback_pair, offboard_watchdog, within_limit,
    BridgeConfig, BridgeError, Frame, LinkFaults, Message, OffboardMode, OffboardState, SequenceTracker,
    StreamScheduler, TimedSample, Transport, TwinSyncMetrics,
};
use crate::flightsim::{
    hover_throttle, type_mask, Actuation, CascadeController, ControllerGains, Plant, SimConfig, SimError, Setpoint,
    Simulator, TelemetryRecord,
};
use crate::propulsion::PropulsionCommand;
use crate::vehicle::BodyState;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Operator velocity request (NED, m/s) with a yaw rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OperatorCommand {
    pub velocity: [f64; 3],
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandAck {
    pub accepted: bool,
    /// Values applied after the clamp (the previous command when rejected).
    pub velocity: [f64; 3],
    pub yaw_rate: f64,
    pub clamped: bool,
    pub reason: Option<String>,
}

/// A command plus the channel for its acknowledgment.
pub struct CommandEnvelope {
    pub command: OperatorCommand,
    pub reply: Option<Box<dyn FnOnce(CommandAck) + Send>>,
}

impl CommandEnvelope {
    pub fn new(command: OperatorCommand, reply: impl FnOnce(CommandAck) + Send + 'static) -> Self {
        Self {
            command,
            reply: Some(Box::new(reply)),
        }
    }
}

/// Command issued at a fixed session time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedCommand {
    pub at: f64,
    pub command: OperatorCommand,
}

/// Operator script for a square at constant heading: north, east, south,
/// west legs starting at `start`, then a stop.
pub fn square_commands(side: f64, speed: f64, start: f64) -> Vec<ScriptedCommand> {
    let leg = side / speed;
    let dirs = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
    let mut out: Vec<ScriptedCommand> = dirs
        .iter()
        .enumerate()
        .map(|(i, d)| ScriptedCommand {
            at: start + i as f64 * leg,
            command: OperatorCommand {
                velocity: [speed * d[0], speed * d[1], 0.0],
                yaw_rate: 0.0,
            },
        })
        .collect();
    out.push(ScriptedCommand {
        at: start + 4.0 * leg,
        command: OperatorCommand::default(),
    });
    out
}

/// Interval during which the digital side stops streaming.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamOutage {
    pub start: f64,
    pub end: Option<f64>,
}

impl StreamOutage {
    fn covers(&self, t: f64) -> bool {
        t >= self.start && self.end.is_none_or(|e| t < e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub duration: f64,
    pub sim: SimConfig,
    pub bridge: BridgeConfig,
    pub gains: ControllerGains,
    /// Hover altitude both twins start at, m.
    pub altitude: f64,
    /// Operator snapshot rate, Hz.
    pub snapshot_rate: f64,
    /// Interval of the metrics-to-date updates, s.
    pub metrics_interval: f64,
    /// Faults on the digital→physical loopback direction.
    pub link: LinkFaults,
    pub outage: Option<StreamOutage>,
    /// Pace the session clock to the wall clock.
    pub realtime: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            duration: 60.0,
            sim: SimConfig::default(),
            bridge: BridgeConfig::default(),
            gains: ControllerGains::default(),
            altitude: 10.0,
            snapshot_rate: 10.0,
            metrics_interval: 1.0,
            link: LinkFaults::default(),
            outage: None,
            realtime: false,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        self.sim.validate()?;
        self.bridge.validate()?;
        self.gains.validate().map_err(SessionError::Config)?;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.duration) {
            return Err(SessionError::Config(format!("duration {} must be positive", self.duration)));
        }
        if !positive(self.snapshot_rate) || !positive(self.metrics_interval) {
            return Err(SessionError::Config("snapshot rate and metrics interval must be positive".into()));
        }
        if !(self.link.delay >= 0.0 && self.link.delay.is_finite()) || !(0.0..=1.0).contains(&self.link.loss) {
            return Err(SessionError::Config("link delay must be ≥ 0 and loss in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Compact state for operator displays.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateSummary {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// Roll, pitch, yaw, rad.
    pub attitude: [f64; 3],
}

impl From<&BodyState> for StateSummary {
    fn from(s: &BodyState) -> Self {
        Self {
            position: s.position_ned().into(),
            velocity: s.velocity_ned().into(),
            attitude: [s.phi, s.theta, s.psi],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySnapshot {
    /// Session time, s.
    pub timestamp: f64,
    pub digital: StateSummary,
    pub physical: StateSummary,
    pub offboard: OffboardState,
    /// The active command or the last streamed setpoint was clamped.
    pub clamp_flag: bool,
    /// Velocity setpoint currently driving the digital twin.
    pub command: OperatorCommand,
}

/// Sync metrics over the logs so far.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub timestamp: f64,
    /// Setpoints streamed by the digital side vs setpoints received by the physical side.
    pub link: Option<TwinSyncMetrics>,
    /// Received setpoints vs physical velocity.
    pub tracking: Option<TwinSyncMetrics>,
    /// Digital vs physical state.
    pub twin: Option<TwinSyncMetrics>,
}

/// Receives live session output. Called from the session thread.
pub trait SessionObserver: Send {
    fn snapshot(&mut self, _snapshot: &TelemetrySnapshot) {}
    fn metrics(&mut self, _metrics: &SessionMetrics) {}
}

impl SessionObserver for () {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SendRecord {
    pub t: f64,
    pub sequence: u8,
    /// Velocity as encoded on the wire.
    pub velocity: [f64; 3],
    pub position: [f64; 3],
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub t: f64,
    pub sequence: u8,
    pub timestamp_ms: u32,
    pub velocity: [f64; 3],
    pub position: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffboardEvent {
    pub t: f64,
    pub mode: OffboardMode,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionReport {
    pub duration: f64,
    pub sends: u64,
    pub missed_deadlines: u64,
    pub clamp_events: u64,
    /// Streamed setpoints found outside the clamp by a scan of the send log.
    pub unclamped_setpoints: u64,
    pub heartbeats: u64,
    pub received: u64,
    pub duplicates: u64,
    pub out_of_order: u64,
    pub missing: u64,
    pub decode_errors: u64,
    /// State reports received back on the digital side.
    pub telemetry_received: u64,
    pub commands_accepted: u64,
    pub commands_rejected: u64,
    pub command_clamps: u64,
    /// First entry into Lost, s.
    pub lost_at: Option<f64>,
    pub outage: Option<StreamOutage>,
    pub metrics: SessionMetrics,
    pub halted: Option<String>,
}

impl SessionReport {
    /// The physical side never received a setpoint.
    pub fn starved(&self) -> bool {
        self.received == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutput {
    pub report: SessionReport,
    pub digital: Vec<TelemetryRecord>,
    pub physical: Vec<TelemetryRecord>,
    pub sends: Vec<SendRecord>,
    pub arrivals: Vec<ArrivalRecord>,
    pub offboard_events: Vec<OffboardEvent>,
}

fn state_samples(records: &[TelemetryRecord]) -> Vec<TimedSample> {
    records
        .iter()
        .map(|r| TimedSample {
            t: r.t,
            velocity: r.state.velocity_ned().into(),
            position: r.state.position_ned().into(),
        })
        .collect()
}

fn metrics_of(
    t: f64,
    sends: &[SendRecord],
    arrivals: &[ArrivalRecord],
    digital: &[TelemetryRecord],
    physical: &[TelemetryRecord],
) -> SessionMetrics {
    let sent: Vec<TimedSample> = sends
        .iter()
        .map(|s| TimedSample {
            t: s.t,
            velocity: s.velocity,
            position: s.position,
        })
        .collect();
    // Frames delivered in the same tick share a timestamp; keep the last.
    let mut received: Vec<TimedSample> = Vec::with_capacity(arrivals.len());
    for a in arrivals {
        let s = TimedSample {
            t: a.t,
            velocity: a.velocity,
            position: a.position,
        };
        match received.last_mut() {
            Some(last) if last.t >= s.t => *last = s,
            _ => received.push(s),
        }
    }
    let phys = state_samples(physical);
    SessionMetrics {
        timestamp: t,
        link: compute_sync_metrics(&sent, &received).ok(),
        tracking: compute_sync_metrics(&received, &phys).ok(),
        twin: compute_sync_metrics(&state_samples(digital), &phys).ok(),
    }
}

/// One twin: simulator, controller, and its full-rate log.
struct Twin {
    sim: Simulator,
    controller: CascadeController,
    act: Actuation,
    records: Vec<TelemetryRecord>,
}

impl Twin {
    fn new(plant: &Arc<Plant>, cfg: &SessionConfig) -> Result<Self, SessionError> {
        let initial = BodyState::at_rest(0.0, 0.0, -cfg.altitude);
        let sim = Simulator::new(plant.clone(), cfg.sim.clone(), initial)?;
        let controller = CascadeController::new(cfg.gains.clone(), plant).map_err(SessionError::Config)?;
        let hover = hover_throttle(plant, &initial);
        let act = Actuation::propulsion_only(PropulsionCommand::saturating([hover; 4], 90.0));
        let loads = plant.loads(&initial, &act, &cfg.sim)?;
        let records = vec![sim.record(None, &act, &loads)?];
        Ok(Self {
            sim,
            controller,
            act,
            records,
        })
    }

    fn step(&mut self, sp: &Setpoint) -> Result<(), SimError> {
        let dt = self.sim.config().dt;
        let out = self.controller.update(self.sim.plant(), self.sim.state(), sp, dt);
        self.act = Actuation::propulsion_only(out.command);
        let loads = self.sim.step(&self.act)?;
        self.records.push(self.sim.record(Some(*sp), &self.act, &loads)?);
        Ok(())
    }
}

fn ms(t: f64) -> u64 {
    (t * 1000.0).round() as u64
}

/// Builder and driver for one session.
pub struct Session {
    cfg: SessionConfig,
    plant: Arc<Plant>,
    links: Option<(Box<dyn Transport>, Box<dyn Transport>)>,
    commands: Option<Receiver<CommandEnvelope>>,
    script: Vec<ScriptedCommand>,
    observer: Box<dyn SessionObserver>,
    stop: Option<Arc<AtomicBool>>,
}

impl Session {
    pub fn new(cfg: SessionConfig, plant: Arc<Plant>) -> Result<Self, SessionError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            plant,
            links: None,
            commands: None,
            script: Vec::new(),
            observer: Box::new(()),
            stop: None,
        })
    }

    /// Transports for the digital and physical ends. Defaults to a loopback
    /// pair with the configured faults.
    pub fn with_links(mut self, digital: Box<dyn Transport>, physical: Box<dyn Transport>) -> Self {
        self.links = Some((digital, physical));
        self
    }

    pub fn with_commands(mut self, rx: Receiver<CommandEnvelope>) -> Self {
        self.commands = Some(rx);
        self
    }

    pub fn with_script(mut self, mut script: Vec<ScriptedCommand>) -> Self {
        script.sort_by(|a, b| a.at.total_cmp(&b.at));
        self.script = script;
        self
    }

    pub fn with_observer(mut self, observer: impl SessionObserver + 'static) -> Self {
        self.observer = Box::new(observer);
        self
    }

    /// Flag that ends the session early when set.
    pub fn with_stop_flag(mut self, stop: Arc<AtomicBool>) -> Self {
        self.stop = Some(stop);
        self
    }

    pub fn run(self) -> Result<SessionOutput, SessionError> {
        let Session {
            cfg,
            plant,
            links,
            commands,
            script,
            mut observer,
            stop,
        } = self;
        let (mut digital_link, mut physical_link) = match links {
            Some(l) => l,
            None => {
                let (a, b) = loopback_pair(cfg.link.clone(), LinkFaults::default());
                (Box::new(a) as Box<dyn Transport>, Box::new(b) as Box<dyn Transport>)
            }
        };
        let dt = cfg.sim.dt;
        let limit = cfg.bridge.velocity_limit;
        let ticks = (cfg.duration / dt).round() as u64;

        let mut digital = Twin::new(&plant, &cfg)?;
        let mut physical = Twin::new(&plant, &cfg)?;

        let mut stream = StreamScheduler::new(cfg.bridge.stream_rate, 0.0);
        let mut heartbeat = StreamScheduler::new(1.0, 0.0);
        let mut reports = StreamScheduler::new(cfg.bridge.stream_rate, 0.0);
        let mut snapshots = StreamScheduler::new(cfg.snapshot_rate, 0.0);
        let mut metric_clock = StreamScheduler::new(1.0 / cfg.metrics_interval, cfg.metrics_interval);
        let mut tx_seq: u8 = 0;
        let mut rx_seq: u8 = 0;

        let mut report = SessionReport {
            duration: cfg.duration,
            outage: cfg.outage,
            ..Default::default()
        };
        let mut sends = Vec::new();
        let mut arrivals = Vec::new();
        let mut events = Vec::new();
        let mut tracker = SequenceTracker::default();
        let mut offboard = OffboardState::default();

        let mut command = OperatorCommand::default();
        let mut command_clamped = false;
        let mut yaw_target = 0.0;
        let mut last_send_clamped = false;
        let mut physical_sp = Setpoint::velocity([0.0; 3], 0.0);
        let mut script_pos = 0;

        let wall_start = Instant::now();
        for k in 0..ticks {
            let t = k as f64 * dt;
            let now_ms = ms(t);
            if stop.as_ref().is_some_and(|s| s.load(Ordering::Relaxed)) {
                report.duration = t;
                break;
            }

            // Operator input, scripted and live, through the same path.
            let mut accept = |cmd: &OperatorCommand| -> CommandAck {
                let ack = accept_command(cmd, &command, offboard.mode, limit);
                if ack.accepted {
                    command = OperatorCommand {
                        velocity: ack.velocity,
                        yaw_rate: ack.yaw_rate,
                    };
                    command_clamped = ack.clamped;
                    report.commands_accepted += 1;
                    report.command_clamps += u64::from(ack.clamped);
                } else {
                    report.commands_rejected += 1;
                }
                ack
            };
            while script_pos < script.len() && script[script_pos].at <= t + 1e-9 {
                let ack = accept(&script[script_pos].command);
                if let Some(reason) = &ack.reason {
                    log::warn!("scripted command at {:.3} s rejected: {reason}", script[script_pos].at);
                }
                script_pos += 1;
            }
            if let Some(rx) = &commands {
                while let Ok(env) = rx.try_recv() {
                    let ack = accept(&env.command);
                    if let Some(reply) = env.reply {
                        reply(ack);
                    }
                }
            }

            // Digital side: stream the latest digital state.
            let streaming = !cfg.outage.is_some_and(|o| o.covers(t));
            if heartbeat.poll(t) && streaming {
                let frame = Frame {
                    sequence: tx_seq,
                    system_id: cfg.bridge.system_id,
                    component_id: cfg.bridge.component_id,
                    message: Message::Heartbeat,
                };
                tx_seq = tx_seq.wrapping_add(1);
                digital_link.send(t, &encode_frame(&frame)).map_err(BridgeError::from)?;
                report.heartbeats += 1;
            }
            if stream.poll(t) && streaming {
                let ds = *digital.sim.state();
                let raw = Setpoint {
                    type_mask: type_mask::IGNORE_POSITION | type_mask::IGNORE_ACCELERATION | type_mask::IGNORE_YAW_RATE,
                    position: ds.position_ned().into(),
                    velocity: ds.velocity_ned().into(),
                    acceleration: [0.0; 3],
                    yaw: ds.psi,
                    yaw_rate: 0.0,
                    timestamp_ms: now_ms as u32,
                };
                let (sp, clamped) = clamp_setpoint(&raw, limit);
                let wire = SetPositionTarget::from_setpoint(&sp);
                let frame = Frame {
                    sequence: tx_seq,
                    system_id: cfg.bridge.system_id,
                    component_id: cfg.bridge.component_id,
                    message: Message::SetPositionTarget(wire),
                };
                digital_link.send(t, &encode_frame(&frame)).map_err(BridgeError::from)?;
                let on_wire = wire.to_setpoint();
                sends.push(SendRecord {
                    t,
                    sequence: tx_seq,
                    velocity: on_wire.velocity,
                    position: on_wire.position,
                    clamped,
                });
                tx_seq = tx_seq.wrapping_add(1);
                report.sends += 1;
                report.clamp_events += u64::from(clamped);
                last_send_clamped = clamped;
            }
            while let Some(bytes) = digital_link.recv(t).map_err(BridgeError::from)? {
                match decode_frame(&bytes) {
                    Ok(Frame {
                        message: Message::LocalPosition(_) | Message::Attitude(_),
                        ..
                    }) => report.telemetry_received += 1,
                    Ok(_) => {}
                    Err(e) => {
                        log::debug!("digital side dropped frame: {e}");
                        report.decode_errors += 1;
                    }
                }
            }

            // Physical side: ingest, watchdog, report back.
            while let Some(bytes) = physical_link.recv(t).map_err(BridgeError::from)? {
                let frame = match decode_frame(&bytes) {
                    Ok(f) => f,
                    Err(e) => {
                        log::debug!("physical side dropped frame: {e}");
                        report.decode_errors += 1;
                        continue;
                    }
                };
                if !tracker.observe(frame.sequence) {
                    continue;
                }
                if let Message::SetPositionTarget(wire) = frame.message {
                    let sp = wire.to_setpoint();
                    if !sp.is_valid() {
                        report.decode_errors += 1;
                        continue;
                    }
                    let was = offboard.mode;
                    offboard = offboard.on_setpoint(now_ms);
                    if was != OffboardMode::Active {
                        events.push(OffboardEvent {
                            t,
                            mode: OffboardMode::Active,
                        });
                    }
                    physical_sp = sp;
                    arrivals.push(ArrivalRecord {
                        t,
                        sequence: frame.sequence,
                        timestamp_ms: wire.timestamp_ms,
                        velocity: sp.velocity,
                        position: sp.position,
                    });
                }
            }
            let before = offboard.mode;
            offboard = offboard_watchdog(offboard, now_ms, cfg.bridge.offboard_timeout_ms);
            if offboard.mode == OffboardMode::Lost && before != OffboardMode::Lost {
                log::warn!("offboard setpoint stream lost at {t:.3} s, holding position");
                events.push(OffboardEvent {
                    t,
                    mode: OffboardMode::Lost,
                });
                report.lost_at.get_or_insert(t);
                physical_sp = Setpoint::velocity([0.0; 3], physical.sim.state().psi);
            }
            if offboard.mode == OffboardMode::Inactive {
                physical_sp = Setpoint::velocity([0.0; 3], 0.0);
            }
            if reports.poll(t) {
                let ps = physical.sim.state();
                let (p, v) = (ps.position_ned(), ps.velocity_ned());
                for message in [
                    Message::LocalPosition(LocalPosition {
                        timestamp_ms: now_ms as u32,
                        x: p.x as f32,
                        y: p.y as f32,
                        z: p.z as f32,
                        vx: v.x as f32,
                        vy: v.y as f32,
                        vz: v.z as f32,
                    }),
                    Message::Attitude(Attitude {
                        timestamp_ms: now_ms as u32,
                        roll: ps.phi as f32,
                        pitch: ps.theta as f32,
                        yaw: ps.psi as f32,
                        rollspeed: ps.p as f32,
                        pitchspeed: ps.q as f32,
                        yawspeed: ps.r as f32,
                    }),
                ] {
                    let frame = Frame {
                        sequence: rx_seq,
                        system_id: cfg.bridge.system_id,
                        component_id: cfg.bridge.component_id.wrapping_add(1),
                        message,
                    };
                    rx_seq = rx_seq.wrapping_add(1);
                    physical_link.send(t, &encode_frame(&frame)).map_err(BridgeError::from)?;
                }
            }

            // Advance both twins.
            yaw_target = crate::vehicle::wrap_angle(yaw_target + command.yaw_rate * dt);
            let digital_sp = Setpoint::velocity(command.velocity, yaw_target).with_timestamp(now_ms as u32);
            let stepped = digital.step(&digital_sp).and_then(|_| physical.step(&physical_sp));
            if let Err(e) = stepped {
                log::error!("{e}");
                report.halted = Some(e.to_string());
                report.duration = t;
                break;
            }
            let t_next = (k + 1) as f64 * dt;

            if snapshots.poll(t_next) {
                observer.snapshot(&TelemetrySnapshot {
                    timestamp: t_next,
                    digital: digital.sim.state().into(),
                    physical: physical.sim.state().into(),
                    offboard,
                    clamp_flag: command_clamped || last_send_clamped,
                    command,
                });
            }
            if metric_clock.poll(t_next) {
                observer.metrics(&metrics_of(t_next, &sends, &arrivals, &digital.records, &physical.records));
            }
            if cfg.realtime {
                let target = Duration::from_secs_f64(t_next);
                let elapsed = wall_start.elapsed();
                if target > elapsed {
                    std::thread::sleep(target - elapsed);
                }
            }
        }

        report.missed_deadlines = stream.missed();
        report.unclamped_setpoints = sends.iter().filter(|s| !within_limit(s.velocity, limit)).count() as u64;
        report.received = tracker.received;
        report.duplicates = tracker.duplicates;
        report.out_of_order = tracker.out_of_order;
        report.missing = tracker.missing;
        report.metrics = metrics_of(report.duration, &sends, &arrivals, &digital.records, &physical.records);
        observer.metrics(&report.metrics);
        Ok(SessionOutput {
            report,
            digital: digital.records,
            physical: physical.records,
            sends,
            arrivals,
            offboard_events: events,
        })
    }
}

/// Validates and clamps an operator command. `current` is returned in the
/// ack when the command is rejected.
pub fn accept_command(
    cmd: &OperatorCommand,
    current: &OperatorCommand,
    offboard: OffboardMode,
    limit: f64,
) -> CommandAck {
    let reject = |reason: &str| CommandAck {
        accepted: false,
        velocity: current.velocity,
        yaw_rate: current.yaw_rate,
        clamped: false,
        reason: Some(reason.to_string()),
    };
    if cmd.velocity.iter().any(|v| !v.is_finite()) || !cmd.yaw_rate.is_finite() {
        return reject("non-finite command");
    }
    if offboard == OffboardMode::Lost {
        return reject("offboard lost");
    }
    let (sp, clamped) = clamp_setpoint(&Setpoint::velocity_yaw_rate(cmd.velocity, cmd.yaw_rate), limit);
    CommandAck {
        accepted: true,
        velocity: sp.velocity,
        yaw_rate: sp.yaw_rate,
        clamped,
        reason: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_guards() {
        let cur = OperatorCommand::default();
        let ack = accept_command(
            &OperatorCommand {
                velocity: [5.0, 0.0, 0.0],
                yaw_rate: 0.0,
            },
            &cur,
            OffboardMode::Active,
            3.0,
        );
        assert!(ack.accepted && ack.clamped);
        assert_eq!(ack.velocity, [3.0, 0.0, 0.0]);
        let ack = accept_command(&cur, &cur, OffboardMode::Inactive, 3.0);
        assert!(ack.accepted && !ack.clamped);
        let ack = accept_command(&cur, &cur, OffboardMode::Lost, 3.0);
        assert_eq!(ack.reason.as_deref(), Some("offboard lost"));
        let nan = OperatorCommand {
            velocity: [f64::NAN, 0.0, 0.0],
            yaw_rate: 0.0,
        };
        assert!(!accept_command(&nan, &cur, OffboardMode::Active, 3.0).accepted);
    }

    #[test]
    fn square_script_closes() {
        let s = square_commands(20.0, 2.0, 1.0);
        assert_eq!(s.len(), 5);
        assert_eq!(s[4].at, 41.0);
        let mut p = [0.0; 2];
        for w in s.windows(2) {
            let d = w[1].at - w[0].at;
            p[0] += w[0].command.velocity[0] * d;
            p[1] += w[0].command.velocity[1] * d;
        }
        assert!(p[0].abs() < 1e-12 && p[1].abs() < 1e-12);
    }

    #[test]
    fn short_session_streams_and_tracks() {
        let cfg = SessionConfig {
            duration: 8.0,
            ..Default::default()
        };
        let out = Session::new(cfg, Arc::new(Plant::kp2(None)))
            .unwrap()
            .with_script(vec![ScriptedCommand {
                at: 1.0,
                command: OperatorCommand {
                    velocity: [1.0, 0.0, 0.0],
                    yaw_rate: 0.0,
                },
            }])
            .run()
            .unwrap();
        let r = &out.report;
        assert_eq!(r.sends, 240);
        assert_eq!(r.received, r.sends + r.heartbeats);
        assert_eq!(r.unclamped_setpoints, 0);
        assert!(r.halted.is_none());
        let link = r.metrics.link.as_ref().unwrap();
        assert_eq!(link.lag_estimate, 0.0);
        assert!(out.physical.last().unwrap().state.velocity_ned().x > 0.8);
    }
}
