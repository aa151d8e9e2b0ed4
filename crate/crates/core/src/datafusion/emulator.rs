//! Synthetic stand-ins for the aerodynamic tools: an analytic ground truth
//! plays the CFD role and three distorted variants play the low-fidelity
//! solvers, so that fusion can be exercised and scored without the tools.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{lhs_sample, Dataset, Fidelity, FusionError, AERO_INPUTS};
use crate::aerodb::{Coefficient, CoefficientSet};

/// Sampling box of the emulated campaign: α ∈ [−20, 30] deg, β ∈ [0, 20] deg.
pub const CAMPAIGN_BOUNDS: [(f64, f64); 2] = [(-20.0, 30.0), (0.0, 20.0)];

/// Analytic reference coefficients (α, β in degrees).
pub fn ground_truth(alpha_deg: f64, beta_deg: f64) -> CoefficientSet {
    let a = alpha_deg.to_radians();
    let b = beta_deg.to_radians();
    let cl_lin = 0.25 + 4.6 * a;
    CoefficientSet {
        CL: cl_lin - 2.8 * a.powi(3) - 0.4 * b * b,
        CD: 0.035 + 0.045 * cl_lin * cl_lin + 0.25 * b * b,
        Cm: 0.03 - 0.85 * a + 0.6 * a.powi(3) - 0.05 * b * b,
        CY: -0.55 * b + 0.15 * a * b,
        Cl: -0.09 * b - 0.25 * a * b,
        Cn: 0.11 * b - 0.04 * a * b,
    }
}

/// Low-fidelity tool emulators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LfTool {
    /// Semi-empirical handbook method: scaled responses, wrong curvature.
    Hetlas,
    /// Vortex lattice: linear in α, too much lift and a nose-down bias.
    Avl,
    /// Panel method with viscous correction: smooth oscillating error plus
    /// solver noise.
    Xflr5,
}

impl LfTool {
    pub const ALL: [LfTool; 3] = [LfTool::Hetlas, LfTool::Avl, LfTool::Xflr5];

    pub fn name(self) -> &'static str {
        match self {
            LfTool::Hetlas => "hetlas-emulator",
            LfTool::Avl => "avl-emulator",
            LfTool::Xflr5 => "xflr5-emulator",
        }
    }

    /// Noise-free part of the tool response.
    pub fn evaluate(self, alpha_deg: f64, beta_deg: f64) -> CoefficientSet {
        let t = ground_truth(alpha_deg, beta_deg);
        let a = alpha_deg.to_radians();
        let b = beta_deg.to_radians();
        match self {
            LfTool::Hetlas => CoefficientSet {
                CL: 0.88 * t.CL + 0.04 + 0.3 * a * a,
                CD: 0.8 * t.CD + 0.012,
                Cm: 0.9 * t.Cm - 0.015 + 0.08 * a,
                CY: 0.85 * t.CY - 0.03 * a * b,
                Cl: 0.8 * t.Cl + 0.02 * b,
                Cn: 0.9 * t.Cn - 0.015 * b,
            },
            LfTool::Avl => {
                let cl_lin = 0.25 + 4.6 * a;
                CoefficientSet {
                    CL: 1.25 * cl_lin + 0.12,
                    CD: 0.02 + 0.035 * cl_lin * cl_lin,
                    Cm: 0.03 - 0.85 * a - 0.09,
                    CY: -0.6 * b,
                    Cl: -0.09 * b - 0.2 * a * b,
                    Cn: 0.12 * b,
                }
            }
            LfTool::Xflr5 => {
                let wave = |amp: f64, phase: f64| amp * (2.5 * a + 1.7 * b + phase).sin();
                CoefficientSet {
                    CL: t.CL + wave(0.06, 0.0),
                    CD: t.CD + wave(0.008, 0.5),
                    Cm: t.Cm + wave(0.02, 1.0),
                    CY: t.CY + wave(0.01, 1.5),
                    Cl: t.Cl + wave(0.004, 2.0),
                    Cn: t.Cn + wave(0.004, 2.5),
                }
            }
        }
    }

    /// Standard deviation of the additive solver noise per coefficient.
    fn noise(self, c: Coefficient) -> f64 {
        match self {
            LfTool::Xflr5 => match c {
                Coefficient::CL => 3e-3,
                Coefficient::CD => 4e-4,
                Coefficient::Cm => 1e-3,
                Coefficient::CY => 5e-4,
                Coefficient::Cl | Coefficient::Cn => 2e-4,
            },
            _ => 0.0,
        }
    }
}

fn aero_dataset(
    tool: &str,
    fidelity: Fidelity,
    inputs: DMatrix<f64>,
    mut f: impl FnMut(f64, f64) -> CoefficientSet,
) -> Result<Dataset, FusionError> {
    let n = inputs.nrows();
    let values: Vec<CoefficientSet> = (0..n).map(|i| f(inputs[(i, 0)], inputs[(i, 1)])).collect();
    let responses: BTreeMap<String, DVector<f64>> = Coefficient::ALL
        .into_iter()
        .map(|c| (c.name().to_string(), DVector::from_fn(n, |i, _| values[i].get(c))))
        .collect();
    Dataset::new(
        tool,
        fidelity,
        AERO_INPUTS.iter().map(|s| s.to_string()).collect(),
        inputs,
        CAMPAIGN_BOUNDS.to_vec(),
        responses,
    )
}

/// High-fidelity samples of the ground truth at `n` LHS points.
pub fn hf_dataset(n: usize, seed: u64) -> Result<Dataset, FusionError> {
    let x = lhs_sample(&CAMPAIGN_BOUNDS, n, seed)?;
    aero_dataset("cfd-emulator", Fidelity::High, x, ground_truth)
}

/// Low-fidelity samples of one emulated tool at `n` LHS points.
pub fn lf_dataset(tool: LfTool, n: usize, seed: u64) -> Result<Dataset, FusionError> {
    let x = lhs_sample(&CAMPAIGN_BOUNDS, n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    aero_dataset(tool.name(), Fidelity::Low, x, |alpha, beta| {
        let mut out = tool.evaluate(alpha, beta);
        for c in Coefficient::ALL {
            let sd = tool.noise(c);
            if sd > 0.0 {
                let e = Normal::new(0.0, sd).expect("positive sd").sample(&mut rng);
                out.set(c, out.get(c) + e);
            }
        }
        out
    })
}

/// The reference fusion campaign: three LF tools with 1200 samples each and
/// 25 CFD samples.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub hf: Dataset,
    pub lf: Vec<Dataset>,
}

pub fn reference_scenario(seed: u64) -> Result<Scenario, FusionError> {
    scenario(25, 1200, seed)
}

pub fn scenario(n_hf: usize, n_lf: usize, seed: u64) -> Result<Scenario, FusionError> {
    let hf = hf_dataset(n_hf, seed)?;
    let lf = LfTool::ALL
        .iter()
        .enumerate()
        .map(|(k, &tool)| lf_dataset(tool, n_lf, seed.wrapping_add(101 * (k as u64 + 1))))
        .collect::<Result<_, _>>()?;
    Ok(Scenario { hf, lf })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_is_symmetric_in_sideslip() {
        let t = ground_truth(4.0, 0.0);
        assert_eq!((t.CY, t.Cl, t.Cn), (0.0, 0.0, 0.0));
        let p = ground_truth(4.0, 6.0);
        let m = ground_truth(4.0, -6.0);
        assert_eq!(p.CL, m.CL);
        assert_eq!(p.CY, -m.CY);
    }

    #[test]
    fn avl_trims_nose_down_of_truth() {
        // Pitch-moment zero crossing: negative α for the vortex-lattice
        // emulator, positive for the reference.
        let zero = |f: &dyn Fn(f64) -> f64| {
            let (mut lo, mut hi) = (-20.0, 30.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        assert!(zero(&|a| LfTool::Avl.evaluate(a, 0.0).Cm) < 0.0);
        assert!(zero(&|a| ground_truth(a, 0.0).Cm) > 0.0);
    }

    #[test]
    fn datasets_are_reproducible() {
        let a = lf_dataset(LfTool::Xflr5, 40, 3).unwrap();
        let b = lf_dataset(LfTool::Xflr5, 40, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 40);
        assert_eq!(hf_dataset(25, 1).unwrap().fidelity, Fidelity::High);
    }
}
