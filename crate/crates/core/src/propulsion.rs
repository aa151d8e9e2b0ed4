//! Rotor thrust from wind-tunnel data and per-rotor force/moment accumulation.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vehicle::{BodyState, ForcesMoments};

/// Inflow speed above which the extrapolated curve is flagged as unvalidated.
pub const EXTRAPOLATION_WARN_SPEED: f64 = 30.0;

#[derive(Debug, Error)]
pub enum PropulsionError {
    #[error("negative inflow speed {0} m/s")]
    NegativeInflow(f64),
    #[error("thrust curve needs at least 2 knots with strictly increasing speeds")]
    BadKnots,
    #[error("throttle {index} = {value} outside [0, 1]")]
    Throttle { index: usize, value: f64 },
    #[error("tilt {0} deg outside [0, 90]")]
    Tilt(f64),
    #[error("rotor geometry must have exactly 4 rotors, got {0}")]
    RotorCount(usize),
    #[error("rotor {0} has an invalid field")]
    BadRotor(usize),
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

/// Natural cubic spline of maximum thrust (N) against axial inflow (m/s).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThrustCurve {
    knots: Vec<(f64, f64)>,
    #[serde(skip)]
    coefficients: Vec<[f64; 4]>,
}

#[derive(Deserialize)]
struct ThrustCurveFile {
    knots: Vec<(f64, f64)>,
}

impl<'de> Deserialize<'de> for ThrustCurve {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = ThrustCurveFile::deserialize(d)?;
        ThrustCurve::new(raw.knots).map_err(serde::de::Error::custom)
    }
}

/// A thrust evaluation, flagged when beyond the validated speed range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustSample {
    pub thrust: f64,
    pub extrapolated: bool,
}

impl Default for ThrustCurve {
    /// Wind-tunnel maximum thrust of a single KP-2 propulsion module.
    fn default() -> Self {
        Self::new(vec![
            (0.0, 67.3),
            (5.0, 65.5),
            (10.0, 60.9),
            (15.0, 55.3),
            (20.0, 48.8),
        ])
        .expect("embedded thrust table is valid")
    }
}

impl ThrustCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, PropulsionError> {
        if knots.len() < 2
            || knots.windows(2).any(|w| w[1].0 <= w[0].0)
            || knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(PropulsionError::BadKnots);
        }
        let coefficients = natural_spline(&knots);
        Ok(Self {
            knots,
            coefficients,
        })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Per-interval `[a, b, c, d]` with `s(x) = a + b·h + c·h² + d·h³`, `h = x − x_i`.
    pub fn coefficients(&self) -> &[[f64; 4]] {
        &self.coefficients
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, PropulsionError> {
        let path = path.as_ref();
        let err = |message: String| PropulsionError::File {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn evaluate(&self, inflow: f64) -> Result<ThrustSample, PropulsionError> {
        if inflow < 0.0 || inflow.is_nan() {
            return Err(PropulsionError::NegativeInflow(inflow));
        }
        let x0 = self.knots[0].0;
        let inflow = inflow.max(x0);
        let last = self.knots.len() - 2;
        let i = match self.knots.iter().rposition(|(x, _)| *x <= inflow) {
            Some(i) => i.min(last),
            None => 0,
        };
        let h = inflow - self.knots[i].0;
        let [a, b, c, d] = self.coefficients[i];
        let thrust = a + h * (b + h * (c + h * d));
        Ok(ThrustSample {
            thrust,
            extrapolated: inflow > EXTRAPOLATION_WARN_SPEED,
        })
    }

    pub fn max_thrust(&self, inflow: f64) -> Result<f64, PropulsionError> {
        self.evaluate(inflow).map(|s| s.thrust)
    }
}

fn natural_spline(knots: &[(f64, f64)]) -> Vec<[f64; 4]> {
    let n = knots.len();
    let h: Vec<f64> = knots.windows(2).map(|w| w[1].0 - w[0].0).collect();
    // Second derivatives at the knots; zero at both ends.
    let mut m = vec![0.0; n];
    if n > 2 {
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for j in 0..k {
            let i = j + 1;
            diag[j] = 2.0 * (h[i - 1] + h[i]);
            upper[j] = h[i];
            rhs[j] = 6.0
                * ((knots[i + 1].1 - knots[i].1) / h[i] - (knots[i].1 - knots[i - 1].1) / h[i - 1]);
        }
        // Thomas algorithm; the sub-diagonal equals h[j] for row j.
        for j in 1..k {
            let w = h[j] / diag[j - 1];
            diag[j] -= w * upper[j - 1];
            rhs[j] -= w * rhs[j - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for j in (0..k - 1).rev() {
            m[j + 1] = (rhs[j] - upper[j] * m[j + 2]) / diag[j];
        }
    }
    (0..n - 1)
        .map(|i| {
            let a = knots[i].1;
            let b = (knots[i + 1].1 - knots[i].1) / h[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0;
            let c = m[i] / 2.0;
            let d = (m[i + 1] - m[i]) / (6.0 * h[i]);
            [a, b, c, d]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotor {
    /// Hub position in body axes, m.
    pub position: [f64; 3],
    pub tiltable: bool,
    /// +1 or −1; sign of the reaction torque about the thrust axis.
    pub spin_direction: i8,
    /// Reaction torque per unit thrust, N·m/N.
    pub torque_coefficient: f64,
}

/// Four-rotor layout. Indices are front-right, front-left, rear-left, rear-right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotorGeometry {
    pub rotors: Vec<Rotor>,
}

impl Default for RotorGeometry {
    /// Symmetric 0.6 m × 0.6 m layout, front pair tiltable, diagonal pairs co-rotating.
    fn default() -> Self {
        let k = 0.03;
        let rotor = |x: f64, y: f64, tiltable: bool, spin: i8| Rotor {
            position: [x, y, 0.0],
            tiltable,
            spin_direction: spin,
            torque_coefficient: k,
        };
        Self {
            rotors: vec![
                rotor(0.3, 0.3, true, 1),
                rotor(0.3, -0.3, true, -1),
                rotor(-0.3, -0.3, false, 1),
                rotor(-0.3, 0.3, false, -1),
            ],
        }
    }
}

impl RotorGeometry {
    pub fn validate(&self) -> Result<(), PropulsionError> {
        if self.rotors.len() != 4 {
            return Err(PropulsionError::RotorCount(self.rotors.len()));
        }
        for (i, r) in self.rotors.iter().enumerate() {
            if r.position.iter().any(|v| !v.is_finite())
                || !r.torque_coefficient.is_finite()
                || r.spin_direction.abs() != 1
            {
                return Err(PropulsionError::BadRotor(i));
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, PropulsionError> {
        let path = path.as_ref();
        let err = |message: String| PropulsionError::File {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let geom: Self = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        geom.validate()?;
        Ok(geom)
    }

    /// Unit thrust direction of rotor `i` at the given tilt.
    pub fn thrust_axis(&self, i: usize, tilt_deg: f64) -> Vector3<f64> {
        if self.rotors[i].tiltable {
            let t = tilt_deg.to_radians();
            Vector3::new(t.cos(), 0.0, -t.sin())
        } else {
            Vector3::new(0.0, 0.0, -1.0)
        }
    }
}

/// Throttles and front-rotor tilt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropulsionCommand {
    throttles: [f64; 4],
    tilt_deg: f64,
}

impl PropulsionCommand {
    pub fn new(throttles: [f64; 4], tilt_deg: f64) -> Result<Self, PropulsionError> {
        for (index, &value) in throttles.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(PropulsionError::Throttle { index, value });
            }
        }
        if !(0.0..=90.0).contains(&tilt_deg) {
            return Err(PropulsionError::Tilt(tilt_deg));
        }
        Ok(Self {
            throttles,
            tilt_deg,
        })
    }

    /// Clamps into range instead of failing; NaN throttles become 0.
    pub fn saturating(throttles: [f64; 4], tilt_deg: f64) -> Self {
        let clamp = |t: f64| if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        Self {
            throttles: throttles.map(clamp),
            tilt_deg: if tilt_deg.is_nan() {
                90.0
            } else {
                tilt_deg.clamp(0.0, 90.0)
            },
        }
    }

    pub fn idle() -> Self {
        Self {
            throttles: [0.0; 4],
            tilt_deg: 90.0,
        }
    }

    pub fn throttles(&self) -> [f64; 4] {
        self.throttles
    }

    pub fn tilt_deg(&self) -> f64 {
        self.tilt_deg
    }
}

/// Axial inflow seen by rotor `i`: body velocity projected on its thrust axis, floored at 0.
pub fn axial_inflow(state: &BodyState, axis: &Vector3<f64>) -> f64 {
    state.body_velocity().dot(axis).max(0.0)
}

/// Sums thrust forces, lever-arm moments and reaction torques of all rotors.
pub fn rotor_forces(
    cmd: &PropulsionCommand,
    state: &BodyState,
    geom: &RotorGeometry,
    curve: &ThrustCurve,
) -> ForcesMoments {
    let mut force = Vector3::zeros();
    let mut moment = Vector3::zeros();
    for (i, rotor) in geom.rotors.iter().enumerate() {
        let axis = geom.thrust_axis(i, cmd.tilt_deg);
        let inflow = axial_inflow(state, &axis);
        let tmax = curve.max_thrust(inflow).unwrap_or(0.0).max(0.0);
        let thrust = cmd.throttles[i] * tmax;
        let f = axis * thrust;
        let r = Vector3::from(rotor.position);
        force += f;
        moment += r.cross(&f);
        moment += axis * (f64::from(rotor.spin_direction) * rotor.torque_coefficient * thrust);
    }
    ForcesMoments::new(force, moment)
}
