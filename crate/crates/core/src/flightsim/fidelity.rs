//! Same open-loop cruise mission flown under different aerodynamic
//! databases, reduced to aligned pitch / altitude / moment traces.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{run_mission, ControllerGains, InitialCondition, MissionProfile, Plant, Segment, SimConfig, SimError};
use crate::aerodb::AeroDatabase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CruiseScenario {
    /// Initial forward speed, m/s.
    pub speed: f64,
    pub altitude: f64,
    /// Front-rotor throttle (rear rotors idle, tilt 0).
    pub throttle: f64,
    pub duration: f64,
    /// Trailing window averaged for the steady pitch, s.
    pub steady_window: f64,
}

impl Default for CruiseScenario {
    fn default() -> Self {
        Self {
            speed: 25.0,
            altitude: 120.0,
            throttle: 0.3,
            duration: 4.0,
            steady_window: 1.5,
        }
    }
}

impl CruiseScenario {
    pub fn mission(&self) -> MissionProfile {
        MissionProfile {
            name: format!("cruise_{}mps", self.speed),
            initial: InitialCondition {
                position: [0.0, 0.0, -self.altitude],
                body_velocity: [self.speed, 0.0, 0.0],
                attitude: [0.0; 3],
            },
            segments: vec![Segment::Scripted {
                tilt_deg: 0.0,
                throttles: [self.throttle, self.throttle, 0.0, 0.0],
                deflections: Default::default(),
                duration: self.duration,
            }],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub pitch_deg: f64,
    /// Height above the NED origin, m.
    pub altitude: f64,
    /// Aerodynamic pitching moment, N·m.
    pub pitch_moment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityTrace {
    pub label: String,
    pub points: Vec<TracePoint>,
    /// Mean pitch over the trailing window, deg.
    pub steady_pitch_deg: f64,
    /// Set when the run halted before the end of the mission.
    pub halted: Option<String>,
}

/// Flies `scenario` once per database.
pub fn compare_databases(
    databases: &[(&str, Arc<AeroDatabase>)],
    scenario: &CruiseScenario,
    cfg: &SimConfig,
) -> Result<Vec<FidelityTrace>, SimError> {
    let mission = scenario.mission();
    databases
        .iter()
        .map(|(label, db)| {
            let plant = Arc::new(Plant::kp2(Some(db.clone())));
            let run = run_mission(&mission, plant, cfg, &ControllerGains::default())?;
            let points: Vec<TracePoint> = run
                .records
                .iter()
                .map(|r| TracePoint {
                    t: r.t,
                    pitch_deg: r.state.theta.to_degrees(),
                    altitude: -r.state.pos_d,
                    pitch_moment: r.aero.m_mom,
                })
                .collect();
            let t_end = points.last().map_or(0.0, |p| p.t);
            let window: Vec<f64> = points
                .iter()
                .filter(|p| p.t >= t_end - scenario.steady_window)
                .map(|p| p.pitch_deg)
                .collect();
            let steady_pitch_deg = window.iter().sum::<f64>() / window.len().max(1) as f64;
            Ok(FidelityTrace {
                label: label.to_string(),
                points,
                steady_pitch_deg,
                halted: run.error.map(|e| e.to_string()),
            })
        })
        .collect()
}
