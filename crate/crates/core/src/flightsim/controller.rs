use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::propulsion::{axial_inflow, PropulsionCommand};
use crate::vehicle::{wrap_angle, BodyState};

use super::Plant;

/// Bits of [`Setpoint::type_mask`]; a set bit means "ignore this member".
pub mod type_mask {
    pub const IGNORE_PX: u16 = 1 << 0;
    pub const IGNORE_PY: u16 = 1 << 1;
    pub const IGNORE_PZ: u16 = 1 << 2;
    pub const IGNORE_VX: u16 = 1 << 3;
    pub const IGNORE_VY: u16 = 1 << 4;
    pub const IGNORE_VZ: u16 = 1 << 5;
    pub const IGNORE_AX: u16 = 1 << 6;
    pub const IGNORE_AY: u16 = 1 << 7;
    pub const IGNORE_AZ: u16 = 1 << 8;
    pub const IGNORE_YAW: u16 = 1 << 10;
    pub const IGNORE_YAW_RATE: u16 = 1 << 11;

    pub const IGNORE_POSITION: u16 = IGNORE_PX | IGNORE_PY | IGNORE_PZ;
    pub const IGNORE_VELOCITY: u16 = IGNORE_VX | IGNORE_VY | IGNORE_VZ;
    pub const IGNORE_ACCELERATION: u16 = IGNORE_AX | IGNORE_AY | IGNORE_AZ;
}

use type_mask::*;

/// Local-NED target with member selection by `type_mask`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoint {
    pub type_mask: u16,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub acceleration: [f64; 3],
    pub yaw: f64,
    pub yaw_rate: f64,
    pub timestamp_ms: u32,
}

impl Setpoint {
    pub fn position(position: [f64; 3], yaw: f64) -> Self {
        Self {
            type_mask: IGNORE_VELOCITY | IGNORE_ACCELERATION | IGNORE_YAW_RATE,
            position,
            velocity: [0.0; 3],
            acceleration: [0.0; 3],
            yaw,
            yaw_rate: 0.0,
            timestamp_ms: 0,
        }
    }

    pub fn velocity(velocity: [f64; 3], yaw: f64) -> Self {
        Self {
            type_mask: IGNORE_POSITION | IGNORE_ACCELERATION | IGNORE_YAW_RATE,
            position: [0.0; 3],
            velocity,
            acceleration: [0.0; 3],
            yaw,
            yaw_rate: 0.0,
            timestamp_ms: 0,
        }
    }

    pub fn velocity_yaw_rate(velocity: [f64; 3], yaw_rate: f64) -> Self {
        Self {
            type_mask: IGNORE_POSITION | IGNORE_ACCELERATION | IGNORE_YAW,
            yaw_rate,
            ..Self::velocity(velocity, 0.0)
        }
    }

    pub fn with_timestamp(mut self, timestamp_ms: u32) -> Self {
        self.timestamp_ms = timestamp_ms;
        self
    }

    fn active(&self, bit: u16) -> bool {
        self.type_mask & bit == 0
    }

    pub fn position_active(&self, axis: usize) -> bool {
        self.active(IGNORE_PX << axis)
    }

    pub fn velocity_active(&self, axis: usize) -> bool {
        self.active(IGNORE_VX << axis)
    }

    pub fn acceleration_active(&self, axis: usize) -> bool {
        self.active(IGNORE_AX << axis)
    }

    pub fn yaw_active(&self) -> bool {
        self.active(IGNORE_YAW)
    }

    pub fn yaw_rate_active(&self) -> bool {
        self.active(IGNORE_YAW_RATE)
    }

    /// At least one member group is active.
    pub fn has_target(&self) -> bool {
        (0..3).any(|k| self.position_active(k) || self.velocity_active(k) || self.acceleration_active(k))
            || self.yaw_active()
            || self.yaw_rate_active()
    }

    /// Active members are finite and at least one group is active.
    pub fn is_valid(&self) -> bool {
        let groups_finite = (0..3).all(|k| {
            (!self.position_active(k) || self.position[k].is_finite())
                && (!self.velocity_active(k) || self.velocity[k].is_finite())
                && (!self.acceleration_active(k) || self.acceleration[k].is_finite())
        });
        groups_finite
            && (!self.yaw_active() || self.yaw.is_finite())
            && (!self.yaw_rate_active() || self.yaw_rate.is_finite())
            && self.has_target()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    /// Position error to velocity, 1/s.
    pub pos_p: [f64; 3],
    pub vel_p: [f64; 3],
    pub vel_i: [f64; 3],
    /// Velocity command limits: horizontal norm, vertical, m/s.
    pub max_velocity: (f64, f64),
    /// Roll, pitch, yaw angle error to rate, 1/s.
    pub att_p: [f64; 3],
    pub rate_p: [f64; 3],
    pub rate_d: [f64; 3],
    pub max_tilt_deg: f64,
    /// Commanded yaw-rate limit, rad/s.
    pub max_yaw_rate: f64,
    /// Velocity errors above this (m/s) are not integrated, so step
    /// changes in the setpoint do not wind the integrator up.
    pub integration_band: f64,
    /// Lower bound of commanded specific thrust as a fraction of g.
    pub min_thrust_fraction: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            pos_p: [0.9, 0.9, 1.2],
            vel_p: [2.2, 2.2, 4.0],
            vel_i: [0.4, 0.4, 1.0],
            max_velocity: (5.0, 3.0),
            att_p: [7.0, 7.0, 2.5],
            rate_p: [22.0, 22.0, 8.0],
            rate_d: [0.4, 0.4, 0.0],
            max_tilt_deg: 35.0,
            max_yaw_rate: 1.0,
            integration_band: 0.5,
            min_thrust_fraction: 0.2,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), String> {
        let all = self
            .pos_p
            .iter()
            .chain(&self.vel_p)
            .chain(&self.vel_i)
            .chain(&self.att_p)
            .chain(&self.rate_p)
            .chain(&self.rate_d)
            .chain([
                &self.max_velocity.0,
                &self.max_velocity.1,
                &self.max_tilt_deg,
                &self.max_yaw_rate,
                &self.integration_band,
                &self.min_thrust_fraction,
            ]);
        if all.clone().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err("controller gains must be finite and non-negative".into());
        }
        if !(self.max_tilt_deg > 0.0 && self.max_tilt_deg < 90.0) {
            return Err("max_tilt_deg must be in (0, 90)".into());
        }
        Ok(())
    }
}

/// Result of one controller update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlOutput {
    pub command: PropulsionCommand,
    /// Any throttle hit 0 or 1.
    pub saturated: bool,
    /// The setpoint was rejected and the previous command held.
    pub rejected: bool,
    /// Desired roll and pitch, rad.
    pub attitude_target: [f64; 2],
    /// Commanded NED acceleration, m/s².
    pub acceleration: [f64; 3],
}

/// Cascaded position → velocity → attitude → rate controller for VTOL
/// mode (front rotors at 90°), with quad mixing.
#[derive(Debug, Clone)]
pub struct CascadeController {
    gains: ControllerGains,
    integrator: Vector3<f64>,
    prev_rate_error: Option<Vector3<f64>>,
    last: Option<ControlOutput>,
    mixer_inverse: Matrix4<f64>,
    inertia: Matrix3<f64>,
}

impl CascadeController {
    pub fn new(gains: ControllerGains, plant: &Plant) -> Result<Self, String> {
        gains.validate()?;
        // Rows: collective thrust, roll, pitch and yaw moment per unit rotor thrust.
        let mut mixer = Matrix4::zeros();
        for (i, rotor) in plant.geometry.rotors.iter().enumerate() {
            let [x, y, _] = rotor.position;
            mixer[(0, i)] = 1.0;
            mixer[(1, i)] = -y;
            mixer[(2, i)] = x;
            mixer[(3, i)] = -f64::from(rotor.spin_direction) * rotor.torque_coefficient;
        }
        let mixer_inverse = mixer.try_inverse().ok_or("rotor layout cannot be mixed")?;
        Ok(Self {
            gains,
            integrator: Vector3::zeros(),
            prev_rate_error: None,
            last: None,
            mixer_inverse,
            inertia: plant.params.inertia_tensor(),
        })
    }

    pub fn gains(&self) -> &ControllerGains {
        &self.gains
    }

    /// Velocity-loop integrator state.
    pub fn integrator(&self) -> [f64; 3] {
        self.integrator.into()
    }

    pub fn reset(&mut self) {
        self.integrator = Vector3::zeros();
        self.prev_rate_error = None;
        self.last = None;
    }

    fn hold_previous(&self, plant: &Plant, state: &BodyState) -> ControlOutput {
        match self.last {
            Some(out) => ControlOutput { rejected: true, ..out },
            None => {
                let hover = hover_throttle(plant, state);
                ControlOutput {
                    command: PropulsionCommand::saturating([hover; 4], 90.0),
                    saturated: false,
                    rejected: true,
                    attitude_target: [0.0; 2],
                    acceleration: [0.0; 3],
                }
            }
        }
    }

    pub fn update(&mut self, plant: &Plant, state: &BodyState, sp: &Setpoint, dt: f64) -> ControlOutput {
        if !sp.is_valid() {
            log::warn!("non-finite or empty setpoint rejected; holding previous command");
            return self.hold_previous(plant, state);
        }
        let g = &self.gains;
        let grav = plant.params.gravity;
        let mass = plant.params.mass;
        let pos = state.position_ned();
        let vel = state.velocity_ned();

        let mut v_cmd: Vector3<f64> = Vector3::zeros();
        for k in 0..3 {
            if sp.position_active(k) {
                v_cmd[k] += g.pos_p[k] * (sp.position[k] - pos[k]);
            }
            if sp.velocity_active(k) {
                v_cmd[k] += sp.velocity[k];
            }
        }
        let horiz = v_cmd.xy().norm();
        if horiz > g.max_velocity.0 {
            let s = g.max_velocity.0 / horiz;
            v_cmd.x *= s;
            v_cmd.y *= s;
        }
        v_cmd.z = v_cmd.z.clamp(-g.max_velocity.1, g.max_velocity.1);

        let v_err = v_cmd - vel;
        let frozen = self.last.is_some_and(|o| o.saturated);
        if !frozen {
            for k in 0..3 {
                if v_err[k].abs() <= g.integration_band {
                    self.integrator[k] += v_err[k] * dt;
                }
            }
        }
        let mut acc: Vector3<f64> = Vector3::zeros();
        for k in 0..3 {
            acc[k] = g.vel_p[k] * v_err[k] + g.vel_i[k] * self.integrator[k];
            if sp.acceleration_active(k) {
                acc[k] += sp.acceleration[k];
            }
        }

        // Desired attitude from the acceleration expressed in the heading frame.
        let (s_psi, c_psi) = state.psi.sin_cos();
        let ax = c_psi * acc.x + s_psi * acc.y;
        let ay = -s_psi * acc.x + c_psi * acc.y;
        let lift = (grav - acc.z).max(g.min_thrust_fraction * grav);
        let tilt_max = g.max_tilt_deg.to_radians();
        let theta_d = (-ax / lift).atan().clamp(-tilt_max, tilt_max);
        let phi_d = (ay * theta_d.cos() / lift).atan().clamp(-tilt_max, tilt_max);
        let collective = mass * lift / (phi_d.cos() * theta_d.cos());

        // Attitude P → Euler-rate targets → body rates.
        let phi_rate = g.att_p[0] * (phi_d - state.phi);
        let theta_rate = g.att_p[1] * (theta_d - state.theta);
        let psi_rate = if sp.yaw_active() {
            g.att_p[2] * wrap_angle(sp.yaw - state.psi)
        } else if sp.yaw_rate_active() {
            sp.yaw_rate
        } else {
            0.0
        }
        .clamp(-g.max_yaw_rate, g.max_yaw_rate);
        let (sf, cf) = state.phi.sin_cos();
        let (st, ct) = state.theta.sin_cos();
        let rate_cmd = Vector3::new(
            phi_rate - st * psi_rate,
            cf * theta_rate + sf * ct * psi_rate,
            -sf * theta_rate + cf * ct * psi_rate,
        );
        let rates = state.body_rates();
        let rate_err = rate_cmd - rates;
        let d_err = self
            .prev_rate_error
            .map_or(Vector3::zeros(), |prev| (rate_err - prev) / dt);
        self.prev_rate_error = Some(rate_err);
        let ang_acc = Vector3::from_fn(|k, _| g.rate_p[k] * rate_err[k] + g.rate_d[k] * d_err[k]);
        let moment = self.inertia * ang_acc + rates.cross(&(self.inertia * rates));

        // Yaw has the lowest priority: its share is scaled down to whatever
        // headroom collective, roll and pitch leave on every rotor.
        let base = self.mixer_inverse * Vector4::new(collective, moment.x, moment.y, 0.0);
        let yaw = self.mixer_inverse * Vector4::new(0.0, 0.0, 0.0, moment.z);
        let tmax: [f64; 4] = std::array::from_fn(|i| {
            let axis = plant.geometry.thrust_axis(i, 90.0);
            plant.curve.max_thrust(axial_inflow(state, &axis)).unwrap_or(0.0).max(0.0)
        });
        let mut yaw_scale: f64 = 1.0;
        for i in 0..4 {
            if yaw[i] > 0.0 {
                yaw_scale = yaw_scale.min(((tmax[i] - base[i]) / yaw[i]).max(0.0));
            } else if yaw[i] < 0.0 {
                yaw_scale = yaw_scale.min((base[i] / -yaw[i]).max(0.0));
            }
        }
        let mut throttles = [0.0; 4];
        let mut saturated = false;
        for (i, t) in throttles.iter_mut().enumerate() {
            let thrust = base[i] + yaw_scale * yaw[i];
            let raw = if tmax[i] > 0.0 { thrust / tmax[i] } else { 1.0 };
            *t = raw.clamp(0.0, 1.0);
            saturated |= raw <= 0.0 || raw >= 1.0;
        }
        let out = ControlOutput {
            command: PropulsionCommand::saturating(throttles, 90.0),
            saturated,
            rejected: false,
            attitude_target: [phi_d, theta_d],
            acceleration: acc.into(),
        };
        self.last = Some(out);
        out
    }
}

/// Per-rotor throttle that balances weight with all four rotors vertical.
pub fn hover_throttle(plant: &Plant, state: &BodyState) -> f64 {
    let axis = plant.geometry.thrust_axis(0, 90.0);
    let tmax = plant.curve.max_thrust(axial_inflow(state, &axis)).unwrap_or(f64::NAN);
    plant.params.weight() / (4.0 * tmax)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hover_state() -> BodyState {
        BodyState::at_rest(0.0, 0.0, -10.0)
    }

    #[test]
    fn at_setpoint_gives_hover_throttle() {
        let plant = Plant::kp2(None);
        let mut c = CascadeController::new(ControllerGains::default(), &plant).unwrap();
        let out = c.update(&plant, &hover_state(), &Setpoint::position([0.0, 0.0, -10.0], 0.0), 0.004);
        let expected = 11.828 * 9.80665 / (4.0 * 67.3);
        for t in out.command.throttles() {
            assert!((t - expected).abs() < 1e-9, "{t} vs {expected}");
        }
        assert!((expected - 0.431).abs() < 1e-3);
    }

    #[test]
    fn forward_velocity_pitches_nose_down() {
        let plant = Plant::kp2(None);
        let mut c = CascadeController::new(ControllerGains::default(), &plant).unwrap();
        let out = c.update(&plant, &hover_state(), &Setpoint::velocity([1.0, 0.0, 0.0], 0.0), 0.004);
        assert!(out.attitude_target[1] < 0.0);
        // Nose-down moment: rear rotors push harder than front ones.
        let t = out.command.throttles();
        assert!(t[2] + t[3] > t[0] + t[1], "{t:?}");
    }

    #[test]
    fn yaw_command_follows_spin_directions() {
        let plant = Plant::kp2(None);
        let mut c = CascadeController::new(ControllerGains::default(), &plant).unwrap();
        let out = c.update(
            &plant,
            &hover_state(),
            &Setpoint::position([0.0, 0.0, -10.0], std::f64::consts::FRAC_PI_2),
            0.004,
        );
        // Positive yaw moment needs more thrust on the rotors whose reaction
        // torque is positive about body z (spin −1).
        let t = out.command.throttles();
        assert!(t[1] > t[0] && t[3] > t[2], "{t:?}");
    }

    #[test]
    fn non_finite_setpoint_holds_previous() {
        let plant = Plant::kp2(None);
        let mut c = CascadeController::new(ControllerGains::default(), &plant).unwrap();
        let good = c.update(&plant, &hover_state(), &Setpoint::velocity([1.0, 0.0, 0.0], 0.0), 0.004);
        let mut bad = Setpoint::velocity([f64::NAN, 0.0, 0.0], 0.0);
        let out = c.update(&plant, &hover_state(), &bad, 0.004);
        assert!(out.rejected);
        assert_eq!(out.command, good.command);
        bad.type_mask |= IGNORE_VX;
        assert!(!c.update(&plant, &hover_state(), &bad, 0.004).rejected);
    }

    #[test]
    fn integrator_frozen_while_saturated() {
        let plant = Plant::kp2(None);
        let mut c = CascadeController::new(ControllerGains::default(), &plant).unwrap();
        // Large climb demand saturates every rotor.
        let sp = Setpoint::velocity([0.0, 0.0, -3.0], 0.0);
        let mut state = hover_state();
        state.w = 3.0;
        let first = c.update(&plant, &state, &sp, 0.004);
        assert!(first.saturated);
        let before = c.integrator();
        for _ in 0..10 {
            let out = c.update(&plant, &state, &sp, 0.004);
            assert!(out.saturated);
            assert_eq!(c.integrator(), before);
        }
    }

    #[test]
    fn type_mask_bits() {
        let sp = Setpoint::velocity([1.0, 2.0, 3.0], 0.5);
        assert!(!sp.position_active(0) && sp.velocity_active(2) && sp.yaw_active() && !sp.yaw_rate_active());
        let empty = Setpoint {
            type_mask: u16::MAX,
            ..sp
        };
        assert!(!empty.is_valid());
    }
}
