use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FusionError;

/// Latin hypercube design: `n` rows, one per equal-width stratum in every
/// dimension, jittered uniformly inside the stratum.
pub fn lhs_sample(bounds: &[(f64, f64)], n: usize, seed: u64) -> Result<DMatrix<f64>, FusionError> {
    if n == 0 {
        return Err(FusionError::Bounds("sample count must be >= 1".into()));
    }
    if bounds.is_empty() {
        return Err(FusionError::Bounds("no dimensions".into()));
    }
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(FusionError::Bounds(format!("dimension {k}: [{lo}, {hi}] is degenerate")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(n, bounds.len());
    let mut strata: Vec<usize> = (0..n).collect();
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        strata.shuffle(&mut rng);
        let width = (hi - lo) / n as f64;
        for (row, &s) in strata.iter().enumerate() {
            let u: f64 = rng.random();
            out[(row, k)] = (lo + (s as f64 + u) * width).min(hi);
        }
    }
    Ok(out)
}
