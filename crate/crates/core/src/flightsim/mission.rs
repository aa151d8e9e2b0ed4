use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::controller::hover_throttle;
use super::{
    Actuation, CascadeController, ControllerGains, Deflections, Plant, SimConfig, SimError, Simulator, Setpoint,
    TelemetryRecord,
};
use crate::propulsion::PropulsionCommand;
use crate::vehicle::BodyState;

/// One leg of a mission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    /// Fly to and hold a NED position (closed loop, VTOL).
    Waypoint { position: [f64; 3], yaw: f64, duration: f64 },
    /// Track a NED velocity (closed loop, VTOL).
    Velocity { velocity: [f64; 3], yaw: f64, duration: f64 },
    /// Open-loop tilt/throttle/surface schedule for transition and cruise.
    Scripted {
        tilt_deg: f64,
        throttles: [f64; 4],
        #[serde(default)]
        deflections: Deflections,
        duration: f64,
    },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::Waypoint { duration, .. }
            | Segment::Velocity { duration, .. }
            | Segment::Scripted { duration, .. } => *duration,
        }
    }
}

/// Starting condition of a mission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    /// NED position, m.
    pub position: [f64; 3],
    /// Body-axis velocity (u, v, w), m/s.
    #[serde(default)]
    pub body_velocity: [f64; 3],
    /// Roll, pitch, yaw, rad.
    #[serde(default)]
    pub attitude: [f64; 3],
}

impl InitialCondition {
    pub fn state(&self) -> BodyState {
        let [u, v, w] = self.body_velocity;
        let [phi, theta, psi] = self.attitude;
        let [pos_n, pos_e, pos_d] = self.position;
        BodyState {
            u,
            v,
            w,
            phi,
            theta,
            psi,
            pos_n,
            pos_e,
            pos_d,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionProfile {
    pub name: String,
    pub initial: InitialCondition,
    pub segments: Vec<Segment>,
}

impl MissionProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.segments.is_empty() {
            return Err(SimError::Mission("mission has no segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            let d = s.duration();
            if !(d > 0.0 && d.is_finite()) {
                return Err(SimError::Mission(format!("segment {i}: duration {d} must be positive")));
            }
            if let Segment::Scripted { tilt_deg, throttles, .. } = s {
                PropulsionCommand::new(*throttles, *tilt_deg)
                    .map_err(|e| SimError::Mission(format!("segment {i}: {e}")))?;
            }
        }
        self.initial
            .state()
            .check()
            .map_err(|e| SimError::Mission(format!("initial condition: {e}")))
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Mission(format!("{}: {e}", path.display())))?;
        let m: Self =
            serde_json::from_str(&text).map_err(|e| SimError::Mission(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }
}

/// Square flown with four velocity legs (heading along each leg) starting
/// north, then a zero-velocity hold, from a hover at `altitude` m.
pub fn square_pattern(side_length: f64, speed: f64, altitude: f64) -> MissionProfile {
    let leg = side_length / speed;
    let headings = [0.0, FRAC_PI_2, std::f64::consts::PI, -FRAC_PI_2];
    let mut segments: Vec<Segment> = headings
        .iter()
        .map(|&yaw| Segment::Velocity {
            velocity: [speed * yaw.cos(), speed * yaw.sin(), 0.0],
            yaw,
            duration: leg,
        })
        .collect();
    // Clean up round-off in the cos/sin of the headings.
    for s in &mut segments {
        if let Segment::Velocity { velocity, .. } = s {
            for v in velocity.iter_mut() {
                *v = (*v / speed).round() * speed;
            }
        }
    }
    segments.push(Segment::Velocity {
        velocity: [0.0; 3],
        yaw: -FRAC_PI_2,
        duration: 5.0,
    });
    MissionProfile {
        name: format!("square_{side_length}m_{speed}mps_{altitude}m"),
        initial: InitialCondition {
            position: [0.0, 0.0, -altitude],
            body_velocity: [0.0; 3],
            attitude: [0.0; 3],
        },
        segments,
    }
}

/// Telemetry of a mission; `error` is set when the run halted early.
#[derive(Debug)]
pub struct MissionRun {
    pub records: Vec<TelemetryRecord>,
    pub error: Option<SimError>,
    /// Setpoints rejected by the controller.
    pub rejected_setpoints: usize,
}

impl MissionRun {
    pub fn final_state(&self) -> Option<&BodyState> {
        self.records.last().map(|r| &r.state)
    }

    /// Distance between the first and last recorded positions, m.
    pub fn net_displacement(&self) -> Option<f64> {
        let first = self.records.first()?.state.position_ned();
        let last = self.records.last()?.state.position_ned();
        Some((last - first).norm())
    }

    pub fn write_jsonl(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Flies every segment in order, recording one telemetry line per tick
/// (plus the initial state).
pub fn run_mission(
    profile: &MissionProfile,
    plant: Arc<Plant>,
    cfg: &SimConfig,
    gains: &ControllerGains,
) -> Result<MissionRun, SimError> {
    profile.validate()?;
    let mut sim = Simulator::new(plant.clone(), cfg.clone(), profile.initial.state())?;
    let mut controller = CascadeController::new(gains.clone(), &plant).map_err(SimError::Config)?;
    let hover = hover_throttle(&plant, sim.state());
    let mut act = Actuation::propulsion_only(PropulsionCommand::saturating([hover; 4], 90.0));
    if let Some(Segment::Scripted {
        tilt_deg,
        throttles,
        deflections,
        ..
    }) = profile.segments.first()
    {
        act = Actuation {
            propulsion: PropulsionCommand::saturating(*throttles, *tilt_deg),
            deflections: *deflections,
        };
    }
    let initial_loads = plant.loads(sim.state(), &act, cfg)?;
    let mut records = vec![sim.record(None, &act, &initial_loads)?];
    let mut rejected_setpoints = 0;
    let mut segment_end = 0.0;
    for segment in &profile.segments {
        segment_end += segment.duration();
        let end_tick = (segment_end / cfg.dt).round() as u64;
        while sim.tick() < end_tick {
            let ms = (sim.time() * 1000.0).round() as u32;
            let setpoint = match segment {
                Segment::Waypoint { position, yaw, .. } => Some(Setpoint::position(*position, *yaw).with_timestamp(ms)),
                Segment::Velocity { velocity, yaw, .. } => Some(Setpoint::velocity(*velocity, *yaw).with_timestamp(ms)),
                Segment::Scripted { .. } => None,
            };
            act = match (segment, &setpoint) {
                (
                    Segment::Scripted {
                        tilt_deg,
                        throttles,
                        deflections,
                        ..
                    },
                    _,
                ) => Actuation {
                    propulsion: PropulsionCommand::saturating(*throttles, *tilt_deg),
                    deflections: *deflections,
                },
                (_, Some(sp)) => {
                    let out = controller.update(&plant, sim.state(), sp, cfg.dt);
                    rejected_setpoints += usize::from(out.rejected);
                    Actuation::propulsion_only(out.command)
                }
                (_, None) => act,
            };
            match sim.step(&act) {
                Ok(loads) => records.push(sim.record(setpoint, &act, &loads)?),
                Err(e) => {
                    log::error!("{e}");
                    return Ok(MissionRun {
                        records,
                        error: Some(e),
                        rejected_setpoints,
                    });
                }
            }
        }
    }
    Ok(MissionRun {
        records,
        error: None,
        rejected_setpoints,
    })
}
