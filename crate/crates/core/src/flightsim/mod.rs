//! Time-stepped simulation of one twin.

mod controller;
pub mod fidelity;
mod mission;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aerodb::{coefficient_buildup, coefficients_to_forces, AeroDatabase, AeroError, FlightCondition};
use crate::propulsion::{rotor_forces, PropulsionCommand, PropulsionError, RotorGeometry, ThrustCurve};
use crate::vehicle::{
    body_to_ned_matrix, derivative_with, flight_mode, BodyState, BodyStateDerivative, FlightMode, ForcesMoments,
    InertiaInverse, VehicleError, VehicleParams,
};

pub use controller::{hover_throttle, type_mask, CascadeController, ControlOutput, ControllerGains, Setpoint};
pub use mission::{run_mission, square_pattern, InitialCondition, MissionProfile, MissionRun, Segment};

/// Airspeed below which aerodynamic forces are not evaluated.
pub const AERO_MIN_AIRSPEED: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("vehicle: {0}")]
    Vehicle(#[from] VehicleError),
    #[error("propulsion: {0}")]
    Propulsion(#[from] PropulsionError),
    #[error("aerodynamics: {0}")]
    Aero(#[from] AeroError),
    #[error("simulation halted at t = {time:.3} s: {source}")]
    Halted {
        time: f64,
        state: Box<BodyState>,
        #[source]
        source: Box<SimError>,
    },
    #[error("invalid mission: {0}")]
    Mission(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrator {
    #[serde(rename = "RK4")]
    Rk4,
    #[serde(rename = "Euler")]
    Euler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub integrator: Integrator,
    pub air_density: f64,
    /// Steady wind, NED m/s.
    pub wind: [f64; 3],
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.004,
            integrator: Integrator::Rk4,
            air_density: 1.225,
            wind: [0.0; 3],
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt <= 0.02) {
            return Err(SimError::Config(format!("dt = {} outside (0, 0.02]", self.dt)));
        }
        if !(self.air_density >= 0.0 && self.air_density.is_finite()) || self.wind.iter().any(|w| !w.is_finite()) {
            return Err(SimError::Config("air density and wind must be finite".into()));
        }
        Ok(())
    }
}

/// Control-surface deflections, deg.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Deflections {
    pub elevator: f64,
    pub aileron: f64,
    pub rudder: f64,
}

impl Deflections {
    fn to_map(self) -> BTreeMap<String, f64> {
        [
            ("elevator".to_string(), self.elevator),
            ("aileron".to_string(), self.aileron),
            ("rudder".to_string(), self.rudder),
        ]
        .into_iter()
        .collect()
    }
}

/// Everything the vehicle is commanded with during one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Actuation {
    pub propulsion: PropulsionCommand,
    pub deflections: Deflections,
}

impl Actuation {
    pub fn propulsion_only(propulsion: PropulsionCommand) -> Self {
        Self {
            propulsion,
            deflections: Deflections::default(),
        }
    }
}

/// Vehicle model: mass properties, rotors and (optionally) aerodynamics.
#[derive(Debug, Clone)]
pub struct Plant {
    pub params: VehicleParams,
    pub geometry: RotorGeometry,
    pub curve: ThrustCurve,
    pub aero: Option<Arc<AeroDatabase>>,
    inertia: InertiaInverse,
}

/// Forces acting during one derivative evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LoadBreakdown {
    pub aero: ForcesMoments,
    pub propulsion: ForcesMoments,
    /// Some aerodynamic lookup extrapolated beyond its table.
    pub aero_clamped: bool,
}

impl Plant {
    pub fn new(
        params: VehicleParams,
        geometry: RotorGeometry,
        curve: ThrustCurve,
        aero: Option<Arc<AeroDatabase>>,
    ) -> Result<Self, SimError> {
        params.validate()?;
        geometry.validate()?;
        Ok(Self {
            inertia: InertiaInverse::new(&params),
            params,
            geometry,
            curve,
            aero,
        })
    }

    /// Default KP-2 vehicle, with or without aerodynamics.
    pub fn kp2(aero: Option<Arc<AeroDatabase>>) -> Self {
        Self::new(VehicleParams::default(), RotorGeometry::default(), ThrustCurve::default(), aero)
            .expect("default vehicle is valid")
    }

    pub fn loads(&self, state: &BodyState, act: &Actuation, cfg: &SimConfig) -> Result<LoadBreakdown, SimError> {
        let propulsion = rotor_forces(&act.propulsion, state, &self.geometry, &self.curve);
        let mut out = LoadBreakdown {
            propulsion,
            ..Default::default()
        };
        if let Some(db) = &self.aero {
            let wind_body = body_to_ned_matrix(state.phi, state.theta, state.psi).transpose() * Vector3::from(cfg.wind);
            let air = state.body_velocity() - wind_body;
            if air.norm() >= AERO_MIN_AIRSPEED {
                let mut cond = FlightCondition::from_air_velocity(air, state.body_rates(), cfg.air_density);
                cond.deflections = act.deflections.to_map();
                let buildup = coefficient_buildup(db, &cond)?;
                out.aero = coefficients_to_forces(&buildup.coefficients, &cond, &self.params);
                out.aero_clamped = buildup.clamped;
            }
        }
        Ok(out)
    }

    pub fn derivative(
        &self,
        state: &BodyState,
        act: &Actuation,
        cfg: &SimConfig,
    ) -> Result<(BodyStateDerivative, LoadBreakdown), SimError> {
        state.check()?;
        let loads = self.loads(state, act, cfg)?;
        let total = loads.aero + loads.propulsion;
        Ok((derivative_with(state, &total, &self.params, &self.inertia), loads))
    }
}

fn add_scaled(s: &BodyState, d: &BodyStateDerivative, h: f64) -> BodyState {
    let a = s.to_array();
    let b = d.to_array();
    BodyState::from_array(std::array::from_fn(|i| a[i] + h * b[i]))
}

/// One integration step; returns the new state and the loads at the start
/// of the step.
pub fn step(
    plant: &Plant,
    state: &BodyState,
    act: &Actuation,
    cfg: &SimConfig,
) -> Result<(BodyState, LoadBreakdown), SimError> {
    let h = cfg.dt;
    let (k1, loads) = plant.derivative(state, act, cfg)?;
    let next = match cfg.integrator {
        Integrator::Euler => add_scaled(state, &k1, h),
        Integrator::Rk4 => {
            let (k2, _) = plant.derivative(&add_scaled(state, &k1, h / 2.0), act, cfg)?;
            let (k3, _) = plant.derivative(&add_scaled(state, &k2, h / 2.0), act, cfg)?;
            let (k4, _) = plant.derivative(&add_scaled(state, &k3, h), act, cfg)?;
            let s = state.to_array();
            let [a, b, c, d] = [k1.to_array(), k2.to_array(), k3.to_array(), k4.to_array()];
            BodyState::from_array(std::array::from_fn(|i| {
                s[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i])
            }))
        }
    };
    next.check()?;
    Ok((next.normalized(), loads))
}

/// Per-tick record written to the JSON-lines telemetry log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub t: f64,
    pub state: BodyState,
    pub setpoint: Option<Setpoint>,
    pub command: PropulsionCommand,
    pub deflections: Deflections,
    pub mode: FlightMode,
    pub aero: ForcesMoments,
    pub aero_clamped: bool,
}

/// A simulation instance: plant, clock and state, advanced one tick at a time.
#[derive(Debug, Clone)]
pub struct Simulator {
    plant: Arc<Plant>,
    cfg: SimConfig,
    state: BodyState,
    tick: u64,
}

impl Simulator {
    pub fn new(plant: Arc<Plant>, cfg: SimConfig, initial: BodyState) -> Result<Self, SimError> {
        cfg.validate()?;
        initial.check()?;
        Ok(Self {
            plant,
            cfg,
            state: initial,
            tick: 0,
        })
    }

    pub fn state(&self) -> &BodyState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.dt
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    /// Advances one `dt`. Failures carry the state at the time of the halt.
    pub fn step(&mut self, act: &Actuation) -> Result<LoadBreakdown, SimError> {
        match step(&self.plant, &self.state, act, &self.cfg) {
            Ok((next, loads)) => {
                self.state = next;
                self.tick += 1;
                Ok(loads)
            }
            Err(e) => Err(SimError::Halted {
                time: self.time(),
                state: Box::new(self.state),
                source: Box::new(e),
            }),
        }
    }

    pub fn record(&self, setpoint: Option<Setpoint>, act: &Actuation, loads: &LoadBreakdown) -> Result<TelemetryRecord, SimError> {
        Ok(TelemetryRecord {
            t: self.time(),
            state: self.state,
            setpoint,
            command: act.propulsion,
            deflections: act.deflections,
            mode: flight_mode(act.propulsion.tilt_deg())?,
            aero: loads.aero,
            aero_clamped: loads.aero_clamped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_command_falls() {
        let mut sim = Simulator::new(Arc::new(Plant::kp2(None)), SimConfig::default(), BodyState::at_rest(0.0, 0.0, 0.0)).unwrap();
        let idle = Actuation::propulsion_only(PropulsionCommand::idle());
        for _ in 0..250 {
            sim.step(&idle).unwrap();
        }
        // Free fall for 1 s.
        assert!((sim.state().pos_d - 0.5 * 9.80665).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_dt() {
        let cfg = SimConfig {
            dt: 0.05,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn halt_reports_state() {
        let mut sim = Simulator::new(Arc::new(Plant::kp2(None)), SimConfig::default(), BodyState::at_rest(0.0, 0.0, 0.0)).unwrap();
        sim.state.q = 500.0;
        let idle = Actuation::propulsion_only(PropulsionCommand::idle());
        let err = (0..100).find_map(|_| sim.step(&idle).err()).expect("pitch passes the gimbal guard");
        assert!(matches!(err, SimError::Halted { .. }), "{err}");
    }
}
