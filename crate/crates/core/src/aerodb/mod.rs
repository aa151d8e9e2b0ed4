//! Aerodynamic database: baseline and increment tables per coefficient,
//! component buildup and conversion to body-axis forces and moments.
//!
//! Each coefficient is accumulated from a clean baseline over (alpha, beta)
//! plus separable increments:
//!
//! ```text
//! C_i = C_i0(α, β) + ΔC_iq(α, q)·c·q/(2U) + Σ ΔC_iδ(α, δ)·δ            i ∈ {CL, CD, Cm}
//! C_i = C_i0(α, β) + ΔC_ip(α, p)·b·p/(2U) + ΔC_ir(α, r)·b·r/(2U)
//!                  + Σ ΔC_iδ(α, δ)·δ                                  i ∈ {CY, Cl, Cn}
//! ```
//!
//! Angles are tabulated in degrees; deflections enter the products in radians.

mod io;
mod table;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vehicle::{ForcesMoments, VehicleParams};

pub use io::{load_database, save_database, MANIFEST_NAME};
pub use table::{AeroTable, Lookup};

/// Speed of sound used for the Mach number of a flight condition, m/s.
pub const SPEED_OF_SOUND: f64 = 340.29;

#[derive(Debug, Error)]
pub enum AeroError {
    #[error("missing value for axis `{0}`")]
    MissingAxis(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid table: {0}")]
    Table(String),
    #[error("axis `{axis}`: {message}")]
    Axis { axis: String, message: String },
    #[error("invalid database: {0}")]
    Database(String),
    #[error("{file}: {message}")]
    Load { file: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Coefficient {
    CL,
    CD,
    Cm,
    CY,
    Cl,
    Cn,
}

impl Coefficient {
    pub const ALL: [Coefficient; 6] = [
        Coefficient::CL,
        Coefficient::CD,
        Coefficient::Cm,
        Coefficient::CY,
        Coefficient::Cl,
        Coefficient::Cn,
    ];

    pub fn is_longitudinal(self) -> bool {
        matches!(self, Coefficient::CL | Coefficient::CD | Coefficient::Cm)
    }

    pub fn name(self) -> &'static str {
        match self {
            Coefficient::CL => "CL",
            Coefficient::CD => "CD",
            Coefficient::Cm => "Cm",
            Coefficient::CY => "CY",
            Coefficient::Cl => "Cl",
            Coefficient::Cn => "Cn",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Rates whose increments this coefficient carries.
    pub fn rate_axes(self) -> &'static [RateAxis] {
        if self.is_longitudinal() {
            &[RateAxis::Q]
        } else {
            &[RateAxis::P, RateAxis::R]
        }
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateAxis {
    P,
    Q,
    R,
}

impl RateAxis {
    pub fn axis_name(self) -> &'static str {
        match self {
            RateAxis::P => "p",
            RateAxis::Q => "q",
            RateAxis::R => "r",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "p" => Some(RateAxis::P),
            "q" => Some(RateAxis::Q),
            "r" => Some(RateAxis::R),
            _ => None,
        }
    }
}

/// Reference lengths and area used for nondimensionalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceGeometry {
    pub wingspan: f64,
    pub mean_chord: f64,
    pub wing_area: f64,
}

impl From<&VehicleParams> for ReferenceGeometry {
    fn from(p: &VehicleParams) -> Self {
        Self {
            wingspan: p.wingspan,
            mean_chord: p.mean_chord,
            wing_area: p.wing_area,
        }
    }
}

impl Default for ReferenceGeometry {
    fn default() -> Self {
        Self::from(&VehicleParams::default())
    }
}

/// Tables of one coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTables {
    pub baseline: AeroTable,
    pub rate_increments: BTreeMap<RateAxis, AeroTable>,
    pub control_increments: BTreeMap<String, AeroTable>,
}

impl CoefficientTables {
    pub fn baseline_only(baseline: AeroTable) -> Self {
        Self {
            baseline,
            rate_increments: BTreeMap::new(),
            control_increments: BTreeMap::new(),
        }
    }
}

/// Baseline and increment tables for all six coefficients.
///
/// Immutable after construction; lookups borrow it read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct AeroDatabase {
    geometry: ReferenceGeometry,
    /// Baselines tabulated for β ≥ 0 only; negative sideslip mirrors them
    /// (longitudinal even, lateral odd).
    symmetric_beta: bool,
    coefficients: BTreeMap<Coefficient, CoefficientTables>,
}

impl AeroDatabase {
    pub fn new(
        geometry: ReferenceGeometry,
        coefficients: BTreeMap<Coefficient, CoefficientTables>,
    ) -> Result<Self, AeroError> {
        for c in Coefficient::ALL {
            let tables = coefficients
                .get(&c)
                .ok_or_else(|| AeroError::Database(format!("missing coefficient {c}")))?;
            let names = tables.baseline.axis_names();
            if !names.iter().any(|n| n == "alpha") || !names.iter().any(|n| n == "beta") {
                return Err(AeroError::Database(format!(
                    "{c} baseline must be tabulated over alpha and beta"
                )));
            }
            if names.iter().any(|n| n != "alpha" && n != "beta" && n != "mach") {
                return Err(AeroError::Database(format!(
                    "{c} baseline may only use alpha, beta and mach axes"
                )));
            }
            for (rate, table) in &tables.rate_increments {
                if !c.rate_axes().contains(rate) {
                    return Err(AeroError::Database(format!(
                        "{c} cannot carry a {}-rate increment",
                        rate.axis_name()
                    )));
                }
                check_increment_axes(c, table, rate.axis_name())?;
            }
            for (surface, table) in &tables.control_increments {
                check_increment_axes(c, table, &format!("delta_{surface}"))?;
            }
        }
        let symmetric_beta = coefficients
            .values()
            .all(|t| t.baseline.grid("beta").is_some_and(|g| g[0] >= 0.0));
        Ok(Self {
            geometry,
            symmetric_beta,
            coefficients,
        })
    }

    pub fn geometry(&self) -> &ReferenceGeometry {
        &self.geometry
    }

    pub fn symmetric_beta(&self) -> bool {
        self.symmetric_beta
    }

    pub fn tables(&self, c: Coefficient) -> &CoefficientTables {
        &self.coefficients[&c]
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (Coefficient, &CoefficientTables)> {
        self.coefficients.iter().map(|(c, t)| (*c, t))
    }

    /// Replaces every baseline, keeping the increments.
    pub fn with_baselines(
        &self,
        baselines: BTreeMap<Coefficient, AeroTable>,
    ) -> Result<Self, AeroError> {
        let mut coefficients = self.coefficients.clone();
        for (c, table) in baselines {
            coefficients
                .get_mut(&c)
                .ok_or_else(|| AeroError::Database(format!("missing coefficient {c}")))?
                .baseline = table;
        }
        Self::new(self.geometry, coefficients)
    }

    /// Control surfaces referenced by any increment table.
    pub fn surfaces(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .coefficients
            .values()
            .flat_map(|t| t.control_increments.keys().cloned())
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

fn check_increment_axes(c: Coefficient, table: &AeroTable, perturbation: &str) -> Result<(), AeroError> {
    let names = table.axis_names();
    let ok = names.iter().any(|n| n == perturbation)
        && names
            .iter()
            .all(|n| n == "alpha" || n == "mach" || n == perturbation);
    if ok {
        Ok(())
    } else {
        Err(AeroError::Database(format!(
            "{c} increment over {names:?} must use alpha (and optionally mach) with `{perturbation}`"
        )))
    }
}

/// Aerodynamic state used for the coefficient lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightCondition {
    /// Angle of attack, deg.
    pub alpha: f64,
    /// Sideslip, deg.
    pub beta: f64,
    /// True airspeed U∞, m/s.
    pub airspeed: f64,
    pub mach: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    /// Surface deflections, deg.
    pub deflections: BTreeMap<String, f64>,
    pub air_density: f64,
}

impl FlightCondition {
    /// Condition from air-relative body velocity (m/s) and body rates (rad/s).
    pub fn from_air_velocity(air: Vector3<f64>, rates: Vector3<f64>, air_density: f64) -> Self {
        let airspeed = air.norm();
        let (alpha, beta) = if airspeed > 0.0 {
            (
                air.z.atan2(air.x).to_degrees(),
                (air.y / airspeed).clamp(-1.0, 1.0).asin().to_degrees(),
            )
        } else {
            (0.0, 0.0)
        };
        Self {
            alpha,
            beta,
            airspeed,
            mach: airspeed / SPEED_OF_SOUND,
            p: rates.x,
            q: rates.y,
            r: rates.z,
            deflections: BTreeMap::new(),
            air_density,
        }
    }

    pub fn validate(&self) -> Result<(), AeroError> {
        let scalars = [
            self.alpha,
            self.beta,
            self.airspeed,
            self.mach,
            self.p,
            self.q,
            self.r,
            self.air_density,
        ];
        if scalars.iter().any(|v| !v.is_finite()) || self.deflections.values().any(|v| !v.is_finite()) {
            return Err(AeroError::Argument("non-finite flight condition".into()));
        }
        if self.airspeed < 0.0 {
            return Err(AeroError::Argument("negative airspeed".into()));
        }
        if self.air_density <= 0.0 {
            return Err(AeroError::Argument("air density must be positive".into()));
        }
        Ok(())
    }

    pub fn dynamic_pressure(&self) -> f64 {
        0.5 * self.air_density * self.airspeed * self.airspeed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CoefficientSet {
    pub CL: f64,
    pub CD: f64,
    pub Cm: f64,
    pub CY: f64,
    pub Cl: f64,
    pub Cn: f64,
}

impl CoefficientSet {
    pub fn get(&self, c: Coefficient) -> f64 {
        match c {
            Coefficient::CL => self.CL,
            Coefficient::CD => self.CD,
            Coefficient::Cm => self.Cm,
            Coefficient::CY => self.CY,
            Coefficient::Cl => self.Cl,
            Coefficient::Cn => self.Cn,
        }
    }

    pub fn set(&mut self, c: Coefficient, v: f64) {
        match c {
            Coefficient::CL => self.CL = v,
            Coefficient::CD => self.CD = v,
            Coefficient::Cm => self.Cm = v,
            Coefficient::CY => self.CY = v,
            Coefficient::Cl => self.Cl = v,
            Coefficient::Cn => self.Cn = v,
        }
    }
}

/// Output of [`coefficient_buildup`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Buildup {
    pub coefficients: CoefficientSet,
    /// Zero airspeed: only baselines were used.
    pub hover_fallback: bool,
    /// Some lookup extrapolated outside its grid.
    pub clamped: bool,
}

/// Accumulates baseline, rate and control increments for every coefficient.
pub fn coefficient_buildup(db: &AeroDatabase, cond: &FlightCondition) -> Result<Buildup, AeroError> {
    cond.validate()?;
    let hover_fallback = cond.airspeed == 0.0;
    let mirrored = db.symmetric_beta && cond.beta < 0.0;
    let beta = if mirrored { -cond.beta } else { cond.beta };
    let base_point = [("alpha", cond.alpha), ("beta", beta), ("mach", cond.mach)];
    let geo = &db.geometry;

    let mut out = CoefficientSet::default();
    let mut clamped = false;
    for (c, tables) in &db.coefficients {
        let base = tables.baseline.interpolate(&base_point)?;
        clamped |= base.clamped;
        let mut value = if mirrored && !c.is_longitudinal() {
            -base.value
        } else {
            base.value
        };
        if !hover_fallback {
            for (rate, table) in &tables.rate_increments {
                let (omega, length) = match rate {
                    RateAxis::P => (cond.p, geo.wingspan),
                    RateAxis::Q => (cond.q, geo.mean_chord),
                    RateAxis::R => (cond.r, geo.wingspan),
                };
                let inc = table.interpolate(&[
                    ("alpha", cond.alpha),
                    ("mach", cond.mach),
                    (rate.axis_name(), omega),
                ])?;
                clamped |= inc.clamped;
                value += inc.value * length * omega / (2.0 * cond.airspeed);
            }
            for (surface, table) in &tables.control_increments {
                let delta = cond.deflections.get(surface).copied().unwrap_or(0.0);
                let axis = format!("delta_{surface}");
                let inc = table.interpolate(&[
                    ("alpha", cond.alpha),
                    ("mach", cond.mach),
                    (axis.as_str(), delta),
                ])?;
                clamped |= inc.clamped;
                value += inc.value * delta.to_radians();
            }
        }
        out.set(*c, value);
    }
    Ok(Buildup {
        coefficients: out,
        hover_fallback,
        clamped,
    })
}

/// Rotation taking wind-axis vectors to body axes.
pub fn wind_to_body(alpha_deg: f64, beta_deg: f64) -> Matrix3<f64> {
    let (sa, ca) = alpha_deg.to_radians().sin_cos();
    let (sb, cb) = beta_deg.to_radians().sin_cos();
    Matrix3::new(
        ca * cb,
        -ca * sb,
        -sa,
        sb,
        cb,
        0.0,
        sa * cb,
        -sa * sb,
        ca,
    )
}

/// Dimensional body-axis forces and moments from coefficients.
pub fn coefficients_to_forces(
    coeffs: &CoefficientSet,
    cond: &FlightCondition,
    params: &VehicleParams,
) -> ForcesMoments {
    let qbar = cond.dynamic_pressure();
    if qbar == 0.0 {
        return ForcesMoments::default();
    }
    let qs = qbar * params.wing_area;
    let wind = Vector3::new(-coeffs.CD * qs, coeffs.CY * qs, -coeffs.CL * qs);
    let force = wind_to_body(cond.alpha, cond.beta) * wind;
    let moment = Vector3::new(
        qs * params.wingspan * coeffs.Cl,
        qs * params.mean_chord * coeffs.Cm,
        qs * params.wingspan * coeffs.Cn,
    );
    ForcesMoments::new(force, moment)
}

/// Default dynamic-derivative and control increments: constant slopes over
/// alpha ∈ [−20, 30] deg, rates ±2 rad/s and deflections ±25 deg.
pub fn default_increments() -> BTreeMap<Coefficient, (BTreeMap<RateAxis, AeroTable>, BTreeMap<String, AeroTable>)> {
    let alpha = vec![-20.0, 0.0, 30.0];
    let rate_grid = vec![-2.0, 0.0, 2.0];
    let delta_grid = vec![-25.0, 0.0, 25.0];
    let constant = |axis: &str, grid: &Vec<f64>, value: f64| {
        AeroTable::from_fn(&["alpha", axis], vec![alpha.clone(), grid.clone()], |_| value)
            .expect("constant increment table")
    };
    let mut out = BTreeMap::new();
    // (q, p, r) dynamic derivatives and (elevator, aileron, rudder) control derivatives.
    let slopes: [(Coefficient, [f64; 3], [f64; 3]); 6] = [
        (Coefficient::CL, [5.5, 0.0, 0.0], [0.45, 0.0, 0.0]),
        (Coefficient::CD, [0.0, 0.0, 0.0], [0.02, 0.0, 0.0]),
        (Coefficient::Cm, [-12.0, 0.0, 0.0], [-1.1, 0.0, 0.0]),
        (Coefficient::CY, [0.0, -0.05, 0.25], [0.0, 0.0, 0.18]),
        (Coefficient::Cl, [0.0, -0.45, 0.1], [0.0, 0.22, 0.01]),
        (Coefficient::Cn, [0.0, -0.04, -0.12], [0.0, -0.01, -0.08]),
    ];
    for (c, [dq, dp, dr], [de, da, drud]) in slopes {
        let mut rates = BTreeMap::new();
        let mut controls = BTreeMap::new();
        if c.is_longitudinal() {
            rates.insert(RateAxis::Q, constant("q", &rate_grid, dq));
            controls.insert("elevator".to_string(), constant("delta_elevator", &delta_grid, de));
        } else {
            rates.insert(RateAxis::P, constant("p", &rate_grid, dp));
            rates.insert(RateAxis::R, constant("r", &rate_grid, dr));
            controls.insert("aileron".to_string(), constant("delta_aileron", &delta_grid, da));
            controls.insert("rudder".to_string(), constant("delta_rudder", &delta_grid, drud));
        }
        out.insert(c, (rates, controls));
    }
    out
}

/// Database from baselines plus [`default_increments`].
pub fn database_with_default_increments(
    geometry: ReferenceGeometry,
    baselines: BTreeMap<Coefficient, AeroTable>,
) -> Result<AeroDatabase, AeroError> {
    let mut increments = default_increments();
    let mut coefficients = BTreeMap::new();
    for (c, baseline) in baselines {
        let (rate_increments, control_increments) = increments
            .remove(&c)
            .ok_or_else(|| AeroError::Database(format!("no increments for {c}")))?;
        coefficients.insert(
            c,
            CoefficientTables {
                baseline,
                rate_increments,
                control_increments,
            },
        );
    }
    AeroDatabase::new(geometry, coefficients)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_baselines(f: impl Fn(Coefficient, f64, f64) -> f64) -> BTreeMap<Coefficient, AeroTable> {
        Coefficient::ALL
            .into_iter()
            .map(|c| {
                let t = AeroTable::from_fn(
                    &["alpha", "beta"],
                    vec![vec![-20.0, -5.0, 0.0, 10.0, 30.0], vec![-20.0, -4.0, 0.0, 4.0, 20.0]],
                    |x| f(c, x[0], x[1]),
                )
                .unwrap();
                (c, t)
            })
            .collect()
    }

    fn cond(alpha: f64, beta: f64) -> FlightCondition {
        FlightCondition {
            alpha,
            beta,
            airspeed: 25.0,
            mach: 25.0 / SPEED_OF_SOUND,
            p: 0.0,
            q: 0.0,
            r: 0.0,
            deflections: BTreeMap::new(),
            air_density: 1.225,
        }
    }

    #[test]
    fn zero_perturbation_returns_baseline_exactly() {
        let base = flat_baselines(|c, a, b| 0.01 * a + 0.003 * b * b + c.index() as f64);
        let db = database_with_default_increments(ReferenceGeometry::default(), base.clone()).unwrap();
        let cnd = cond(3.7, 2.2);
        let out = coefficient_buildup(&db, &cnd).unwrap();
        for c in Coefficient::ALL {
            let expected = base[&c]
                .interpolate(&[("alpha", 3.7), ("beta", 2.2)])
                .unwrap()
                .value;
            assert_eq!(out.coefficients.get(c), expected);
        }
    }

    #[test]
    fn increment_sets_are_enforced() {
        let base = flat_baselines(|_, _, _| 0.0);
        let mut coefficients: BTreeMap<Coefficient, CoefficientTables> = base
            .into_iter()
            .map(|(c, t)| (c, CoefficientTables::baseline_only(t)))
            .collect();
        let inc = AeroTable::from_fn(&["alpha", "p"], vec![vec![0.0, 1.0], vec![-1.0, 1.0]], |_| 1.0).unwrap();
        coefficients
            .get_mut(&Coefficient::Cm)
            .unwrap()
            .rate_increments
            .insert(RateAxis::P, inc);
        let err = AeroDatabase::new(ReferenceGeometry::default(), coefficients).unwrap_err();
        assert!(err.to_string().contains("Cm cannot carry a p-rate"));
    }

    #[test]
    fn zero_airspeed_falls_back_to_baseline() {
        let base = flat_baselines(|_, a, _| a);
        let db = database_with_default_increments(ReferenceGeometry::default(), base).unwrap();
        let mut c = cond(2.0, 0.0);
        c.airspeed = 0.0;
        c.q = 1.0;
        let out = coefficient_buildup(&db, &c).unwrap();
        assert!(out.hover_fallback);
        assert_eq!(out.coefficients.Cm, 2.0);
    }

    #[test]
    fn negative_sideslip_mirrors_half_tables() {
        let base: BTreeMap<_, _> = Coefficient::ALL
            .into_iter()
            .map(|c| {
                let t = AeroTable::from_fn(&["alpha", "beta"], vec![vec![-20.0, 30.0], vec![0.0, 20.0]], |x| {
                    if c.is_longitudinal() {
                        1.0 + 0.01 * x[1]
                    } else {
                        0.02 * x[1]
                    }
                })
                .unwrap();
                (c, t)
            })
            .collect();
        let db = database_with_default_increments(ReferenceGeometry::default(), base).unwrap();
        assert!(db.symmetric_beta());
        let pos = coefficient_buildup(&db, &cond(0.0, 5.0)).unwrap().coefficients;
        let neg = coefficient_buildup(&db, &cond(0.0, -5.0)).unwrap().coefficients;
        assert_eq!(pos.CY, -neg.CY);
        assert_eq!(pos.CL, neg.CL);
    }

    #[test]
    fn zero_dynamic_pressure_gives_zero_forces() {
        let mut c = cond(5.0, 0.0);
        c.airspeed = 0.0;
        let coeffs = CoefficientSet {
            CL: 1.0,
            CD: 0.1,
            Cm: 0.2,
            ..Default::default()
        };
        assert_eq!(
            coefficients_to_forces(&coeffs, &c, &VehicleParams::default()),
            ForcesMoments::default()
        );
    }

    #[test]
    fn flight_condition_from_air_velocity() {
        let c = FlightCondition::from_air_velocity(Vector3::new(10.0, 0.0, 10.0), Vector3::zeros(), 1.225);
        assert!((c.alpha - 45.0).abs() < 1e-12);
        assert_eq!(c.beta, 0.0);
        let c = FlightCondition::from_air_velocity(Vector3::zeros(), Vector3::zeros(), 1.225);
        assert_eq!((c.alpha, c.beta, c.airspeed), (0.0, 0.0, 0.0));
    }
}
