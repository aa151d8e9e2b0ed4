//! Rigid-body flight dynamics of the KP-2 tilt-rotor.
//!
//! Body axes are x forward, y right, z down; the navigation frame is NED.
//! The rotational equations carry the full inertia tensor (the KP-2 has a
//! non-negligible `Ixz`), attitude is propagated as ZYX Euler angles.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard gravity in m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Distance from ±π/2 pitch at which the Euler kinematics are refused.
pub const GIMBAL_MARGIN: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum VehicleError {
    #[error("gimbal lock: |theta| = {theta:.6} rad is within {margin} of pi/2")]
    GimbalLock { theta: f64, margin: f64 },
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("tilt angle {0} deg outside [0, 90]")]
    TiltOutOfRange(f64),
    #[error("non-finite state component `{0}`")]
    NonFinite(&'static str),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed vehicle parameters in {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Mass, inertia and reference geometry of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub mass: f64,
    pub gravity: f64,
    #[serde(rename = "Ixx")]
    pub ixx: f64,
    #[serde(rename = "Iyy")]
    pub iyy: f64,
    #[serde(rename = "Izz")]
    pub izz: f64,
    #[serde(rename = "Ixz")]
    pub ixz: f64,
    #[serde(rename = "Ixy")]
    pub ixy: f64,
    #[serde(rename = "Iyz")]
    pub iyz: f64,
    pub wing_area: f64,
    pub wingspan: f64,
    pub mean_chord: f64,
    pub cruise_speed: f64,
}

impl Default for VehicleParams {
    /// KP-2 specification.
    fn default() -> Self {
        Self {
            mass: 11.828,
            gravity: STANDARD_GRAVITY,
            ixx: 0.7816,
            iyy: 2.073,
            izz: 1.423,
            ixz: -0.1564,
            ixy: 0.0,
            iyz: 0.0,
            wing_area: 0.8544,
            wingspan: 2.0,
            mean_chord: 0.2995,
            cruise_speed: 25.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), VehicleError> {
        let all = [
            self.mass,
            self.gravity,
            self.ixx,
            self.iyy,
            self.izz,
            self.ixz,
            self.ixy,
            self.iyz,
            self.wing_area,
            self.wingspan,
            self.mean_chord,
            self.cruise_speed,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(VehicleError::InvalidParams("non-finite field".into()));
        }
        if self.mass <= 0.0 {
            return Err(VehicleError::InvalidParams("mass must be positive".into()));
        }
        if self.ixx <= 0.0 || self.iyy <= 0.0 || self.izz <= 0.0 {
            return Err(VehicleError::InvalidParams(
                "principal moments must be positive".into(),
            ));
        }
        // Sylvester's criterion on the tensor with negated products of inertia.
        let t = self.inertia_tensor();
        let m1 = t[(0, 0)];
        let m2 = t[(0, 0)] * t[(1, 1)] - t[(0, 1)] * t[(1, 0)];
        let m3 = t.determinant();
        if m1 <= 0.0 || m2 <= 0.0 || m3 <= 0.0 {
            return Err(VehicleError::InvalidParams(
                "inertia tensor is not positive definite".into(),
            ));
        }
        Ok(())
    }

    /// Inertia tensor with the products of inertia entering negatively.
    pub fn inertia_tensor(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.ixx, -self.ixy, -self.ixz, //
            -self.ixy, self.iyy, -self.iyz, //
            -self.ixz, -self.iyz, self.izz,
        )
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, VehicleError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| VehicleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let params: Self = serde_json::from_str(&text).map_err(|source| VehicleError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        params.validate()?;
        Ok(params)
    }
}

/// Full rigid-body state of one twin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyState {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub pos_n: f64,
    pub pos_e: f64,
    pub pos_d: f64,
}

impl BodyState {
    pub const DIM: usize = 12;

    pub fn at_rest(pos_n: f64, pos_e: f64, pos_d: f64) -> Self {
        Self {
            pos_n,
            pos_e,
            pos_d,
            ..Default::default()
        }
    }

    pub fn to_array(&self) -> [f64; 12] {
        [
            self.u, self.v, self.w, self.p, self.q, self.r, self.phi, self.theta, self.psi,
            self.pos_n, self.pos_e, self.pos_d,
        ]
    }

    pub fn from_array(a: [f64; 12]) -> Self {
        Self {
            u: a[0],
            v: a[1],
            w: a[2],
            p: a[3],
            q: a[4],
            r: a[5],
            phi: a[6],
            theta: a[7],
            psi: a[8],
            pos_n: a[9],
            pos_e: a[10],
            pos_d: a[11],
        }
    }

    pub fn body_velocity(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.w)
    }

    pub fn body_rates(&self) -> Vector3<f64> {
        Vector3::new(self.p, self.q, self.r)
    }

    pub fn position_ned(&self) -> Vector3<f64> {
        Vector3::new(self.pos_n, self.pos_e, self.pos_d)
    }

    pub fn velocity_ned(&self) -> Vector3<f64> {
        body_to_ned_matrix(self.phi, self.theta, self.psi) * self.body_velocity()
    }

    /// Checks finiteness and the pitch guard.
    pub fn check(&self) -> Result<(), VehicleError> {
        const NAMES: [&str; 12] = [
            "u", "v", "w", "p", "q", "r", "phi", "theta", "psi", "pos_n", "pos_e", "pos_d",
        ];
        for (value, name) in self.to_array().iter().zip(NAMES) {
            if !value.is_finite() {
                return Err(VehicleError::NonFinite(name));
            }
        }
        if self.theta.abs() >= PI / 2.0 - GIMBAL_MARGIN {
            return Err(VehicleError::GimbalLock {
                theta: self.theta.abs(),
                margin: GIMBAL_MARGIN,
            });
        }
        Ok(())
    }

    /// Wraps roll and yaw into (−π, π].
    pub fn normalized(mut self) -> Self {
        self.phi = wrap_angle(self.phi);
        self.psi = wrap_angle(self.psi);
        self
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Body-axis forces (N) and moments (N·m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForcesMoments {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub l_mom: f64,
    pub m_mom: f64,
    pub n_mom: f64,
}

impl ForcesMoments {
    pub fn new(force: Vector3<f64>, moment: Vector3<f64>) -> Self {
        Self {
            fx: force.x,
            fy: force.y,
            fz: force.z,
            l_mom: moment.x,
            m_mom: moment.y,
            n_mom: moment.z,
        }
    }

    pub fn force(&self) -> Vector3<f64> {
        Vector3::new(self.fx, self.fy, self.fz)
    }

    pub fn moment(&self) -> Vector3<f64> {
        Vector3::new(self.l_mom, self.m_mom, self.n_mom)
    }

    pub fn is_finite(&self) -> bool {
        [self.fx, self.fy, self.fz, self.l_mom, self.m_mom, self.n_mom]
            .iter()
            .all(|v| v.is_finite())
    }
}

impl std::ops::Add for ForcesMoments {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            fx: self.fx + o.fx,
            fy: self.fy + o.fy,
            fz: self.fz + o.fz,
            l_mom: self.l_mom + o.l_mom,
            m_mom: self.m_mom + o.m_mom,
            n_mom: self.n_mom + o.n_mom,
        }
    }
}

impl std::ops::AddAssign for ForcesMoments {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// Time derivative of every [`BodyState`] component, in the same order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyStateDerivative {
    pub u_dot: f64,
    pub v_dot: f64,
    pub w_dot: f64,
    pub p_dot: f64,
    pub q_dot: f64,
    pub r_dot: f64,
    pub phi_dot: f64,
    pub theta_dot: f64,
    pub psi_dot: f64,
    pub n_dot: f64,
    pub e_dot: f64,
    pub d_dot: f64,
}

impl BodyStateDerivative {
    pub fn to_array(&self) -> [f64; 12] {
        [
            self.u_dot,
            self.v_dot,
            self.w_dot,
            self.p_dot,
            self.q_dot,
            self.r_dot,
            self.phi_dot,
            self.theta_dot,
            self.psi_dot,
            self.n_dot,
            self.e_dot,
            self.d_dot,
        ]
    }
}

/// Flight mode implied by the front-rotor tilt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlightMode {
    #[serde(rename = "VTOL")]
    Vtol,
    Transition,
    Cruise,
}

/// 90° is VTOL, 0° is cruise, anything in between is transition.
pub fn flight_mode(tilt_deg: f64) -> Result<FlightMode, VehicleError> {
    if !(0.0..=90.0).contains(&tilt_deg) {
        return Err(VehicleError::TiltOutOfRange(tilt_deg));
    }
    Ok(if tilt_deg == 90.0 {
        FlightMode::Vtol
    } else if tilt_deg == 0.0 {
        FlightMode::Cruise
    } else {
        FlightMode::Transition
    })
}

/// ZYX (yaw, pitch, roll) rotation taking body vectors to NED.
pub fn body_to_ned_matrix(phi: f64, theta: f64, psi: f64) -> Matrix3<f64> {
    let (sf, cf) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    Matrix3::new(
        ct * cp,
        sf * st * cp - cf * sp,
        cf * st * cp + sf * sp,
        ct * sp,
        sf * st * sp + cf * cp,
        cf * st * sp - sf * cp,
        -st,
        sf * ct,
        cf * ct,
    )
}

/// NED velocity of the body.
pub fn body_to_ned(state: &BodyState) -> Vector3<f64> {
    state.velocity_ned()
}

/// Inverse of the inertia tensor, expanded by cofactors.
#[derive(Debug, Clone, Copy)]
pub struct InertiaInverse {
    tensor: [[f64; 3]; 3],
    inverse: [[f64; 3]; 3],
}

impl InertiaInverse {
    pub fn new(params: &VehicleParams) -> Self {
        let (a, b, c) = (params.ixx, params.iyy, params.izz);
        let (xy, xz, yz) = (-params.ixy, -params.ixz, -params.iyz);
        let tensor = [[a, xy, xz], [xy, b, yz], [xz, yz, c]];
        let c00 = b * c - yz * yz;
        let c01 = xz * yz - xy * c;
        let c02 = xy * yz - b * xz;
        let c11 = a * c - xz * xz;
        let c12 = xy * xz - a * yz;
        let c22 = a * b - xy * xy;
        let det = a * c00 + xy * c01 + xz * c02;
        let inverse = [
            [c00 / det, c01 / det, c02 / det],
            [c01 / det, c11 / det, c12 / det],
            [c02 / det, c12 / det, c22 / det],
        ];
        Self { tensor, inverse }
    }

    /// ω̇ = I⁻¹ (M − ω × Iω).
    pub fn angular_acceleration(&self, rates: [f64; 3], moment: [f64; 3]) -> [f64; 3] {
        let t = &self.tensor;
        let [p, q, r] = rates;
        let h = [
            t[0][0] * p + t[0][1] * q + t[0][2] * r,
            t[1][0] * p + t[1][1] * q + t[1][2] * r,
            t[2][0] * p + t[2][1] * q + t[2][2] * r,
        ];
        let rhs = [
            moment[0] - (q * h[2] - r * h[1]),
            moment[1] - (r * h[0] - p * h[2]),
            moment[2] - (p * h[1] - q * h[0]),
        ];
        let i = &self.inverse;
        [
            i[0][0] * rhs[0] + i[0][1] * rhs[1] + i[0][2] * rhs[2],
            i[1][0] * rhs[0] + i[1][1] * rhs[1] + i[1][2] * rhs[2],
            i[2][0] * rhs[0] + i[2][1] * rhs[1] + i[2][2] * rhs[2],
        ]
    }
}

/// Time derivatives of the 12-component rigid-body state.
///
/// Translational rows use the standard body-frame form (`ẇ = qu − pv + …`),
/// gravity enters through the Euler angles.
pub fn state_derivative(
    state: &BodyState,
    fm: &ForcesMoments,
    params: &VehicleParams,
) -> Result<BodyStateDerivative, VehicleError> {
    state.check()?;
    let inertia = InertiaInverse::new(params);
    Ok(derivative_with(state, fm, params, &inertia))
}

/// Same as [`state_derivative`] with a precomputed inertia inverse and no checks.
pub(crate) fn derivative_with(
    s: &BodyState,
    fm: &ForcesMoments,
    params: &VehicleParams,
    inertia: &InertiaInverse,
) -> BodyStateDerivative {
    let g = params.gravity;
    let m = params.mass;
    let (sf, cf) = s.phi.sin_cos();
    let (st, ct) = s.theta.sin_cos();

    let u_dot = s.r * s.v - s.q * s.w - g * st + fm.fx / m;
    let v_dot = s.p * s.w - s.u * s.r + g * sf * ct + fm.fy / m;
    let w_dot = s.q * s.u - s.p * s.v + g * cf * ct + fm.fz / m;

    let [p_dot, q_dot, r_dot] =
        inertia.angular_acceleration([s.p, s.q, s.r], [fm.l_mom, fm.m_mom, fm.n_mom]);

    let tan_t = st / ct;
    let phi_dot = s.p + (s.q * sf + s.r * cf) * tan_t;
    let theta_dot = s.q * cf - s.r * sf;
    let psi_dot = (s.q * sf + s.r * cf) / ct;

    let ned = body_to_ned_matrix(s.phi, s.theta, s.psi) * s.body_velocity();

    BodyStateDerivative {
        u_dot,
        v_dot,
        w_dot,
        p_dot,
        q_dot,
        r_dot,
        phi_dot,
        theta_dot,
        psi_dot,
        n_dot: ned.x,
        e_dot: ned.y,
        d_dot: ned.z,
    }
}
