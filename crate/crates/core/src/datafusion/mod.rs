//! Multi-fidelity surrogate modeling.
//!
//! Low-fidelity datasets are each fitted with an ordinary-kriging surrogate.
//! Extended Hierarchical Kriging then models the high-fidelity response as a
//! scaled sum of those surrogates plus a zero-mean Gaussian discrepancy
//! process, `f_HF(x) = ρᵀ f_LF(x) + Z_d(x)`, with ρ and σ_d² in closed form
//! for each candidate correlation length and θ_d chosen by maximum
//! likelihood. Fused predictions are compiled into aero-database baselines.

mod dataset;
mod ehk;
pub mod emulator;
mod fuse;
mod kernel;
mod kriging;
mod lhs;
mod optimize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{Dataset, Fidelity, AERO_INPUTS};
pub use ehk::{fit_ehk, EhkModel};
pub use fuse::{fuse_aerodb, lf_only_database, CoefficientReport, FusionOutput, FusionReport, GridSpec};
pub use kernel::{correlation, correlation_matrix};
pub use kriging::{fit_kriging, KrigingModel};
pub use lhs::lhs_sample;
pub use optimize::{maximize, SearchResult};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("invalid bounds: {0}")]
    Bounds(String),
    #[error("invalid dataset `{tool}`: {message}")]
    Dataset { tool: String, message: String },
    #[error("correlation matrix could not be factorized even with nugget {nugget:e} (n = {n})")]
    Conditioning { nugget: f64, n: usize },
    #[error("need at least as many HF samples ({n_hf}) as LF models ({n_lf})")]
    Underdetermined { n_hf: usize, n_lf: usize },
    #[error("LF models {first} and {second} are collinear at the HF samples")]
    Collinear { first: usize, second: usize },
    #[error("input dimension mismatch: {0}")]
    Dimension(String),
    #[error("fit of {coefficient} failed: {source}")]
    Coefficient {
        coefficient: String,
        #[source]
        source: Box<FusionError>,
    },
    #[error("{file}: {message}")]
    File { file: String, message: String },
    #[error(transparent)]
    Aero(#[from] crate::aerodb::AeroError),
}

/// Hyperparameter search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Diagonal regularization of correlation matrices; escalated ×10 up to
    /// [`FusionConfig::max_nugget`] when a factorization fails.
    pub nugget: f64,
    pub max_nugget: f64,
    /// Search box for each θ_k (applied in log space).
    pub theta_bounds: (f64, f64),
    pub multistart_count: usize,
    /// Maximum likelihood evaluations per fit, shared across starts.
    pub optimizer_budget: usize,
    /// Largest sample count used during the likelihood search; the final
    /// model always uses every sample.
    pub mle_subsample: usize,
    pub rng_seed: u64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            nugget: 1e-8,
            max_nugget: 1e-4,
            theta_bounds: (1e-3, 1e3),
            multistart_count: 8,
            optimizer_budget: 400,
            mle_subsample: 250,
            rng_seed: 7,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        let (lo, hi) = self.theta_bounds;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(FusionError::Bounds(format!("theta bounds ({lo}, {hi})")));
        }
        if self.multistart_count == 0 {
            return Err(FusionError::Bounds("multistart_count must be >= 1".into()));
        }
        if !(self.nugget >= 0.0 && self.max_nugget >= self.nugget) {
            return Err(FusionError::Bounds("nugget range".into()));
        }
        Ok(())
    }

    pub(crate) fn log_theta_box(&self, dims: usize) -> Vec<(f64, f64)> {
        vec![(self.theta_bounds.0.log10(), self.theta_bounds.1.log10()); dims]
    }
}
