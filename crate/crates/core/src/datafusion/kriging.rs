use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kernel::{correlation_matrix, correlation_vector, factorize, log_det};
use super::lhs::lhs_sample;
use super::optimize::maximize;
use super::{Dataset, FusionConfig, FusionError};

/// Smallest process variance used inside the log-likelihood; a perfectly
/// explained response would otherwise give `ln 0`.
const SIGMA2_FLOOR: f64 = 1e-300;

/// Gaussian process with generalized-least-squares trend `Fβ`.
///
/// Ordinary kriging uses a single column of ones; Extended Hierarchical
/// Kriging uses one column per low-fidelity surrogate.
#[derive(Debug, Clone)]
pub(crate) struct GlsProcess {
    pub train: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub nugget: f64,
    pub beta: DVector<f64>,
    pub sigma2: f64,
    pub log_likelihood: f64,
    chol: Cholesky<f64, Dyn>,
    /// `R⁻¹ (y − Fβ)`.
    weights: DVector<f64>,
    /// `R⁻¹ F`.
    r_inv_f: DMatrix<f64>,
    /// `(Fᵀ R⁻¹ F)⁻¹`.
    gram_inv: DMatrix<f64>,
}

struct Profile {
    chol: Cholesky<f64, Dyn>,
    nugget: f64,
    beta: DVector<f64>,
    sigma2: f64,
    weights: DVector<f64>,
    r_inv_f: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    log_likelihood: f64,
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), m, |i, k| rows[i][k])
}

/// Closed-form β and σ² for fixed θ, and the concentrated log-likelihood
/// `−(n/2) ln σ² − ½ ln |R|`.
fn profile(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    f: &DMatrix<f64>,
    theta: &[f64],
    nugget: f64,
    max_nugget: f64,
) -> Result<Profile, FusionError> {
    let n = y.len();
    let r = correlation_matrix(x, theta);
    let (chol, nugget) = factorize(&r, nugget, max_nugget)?;
    let r_inv_f = chol.solve(f);
    let gram = f.transpose() * &r_inv_f;
    let gram_inv = gram
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(FusionError::Conditioning { nugget, n })?;
    let mut beta = &gram_inv * (r_inv_f.transpose() * y);
    // One refinement pass: the normal equations square the conditioning of
    // nearly collinear trend columns.
    beta += &gram_inv * (r_inv_f.transpose() * (y - f * &beta));
    let resid = y - f * &beta;
    let weights = chol.solve(&resid);
    let sigma2 = (resid.dot(&weights) / n as f64).max(0.0);
    let log_likelihood = -0.5 * n as f64 * sigma2.max(SIGMA2_FLOOR).ln() - 0.5 * log_det(&chol);
    Ok(Profile {
        chol,
        nugget,
        beta,
        sigma2,
        weights,
        r_inv_f,
        gram_inv,
        log_likelihood,
    })
}

impl GlsProcess {
    /// Chooses θ by multistart likelihood maximization in log space (first
    /// start at θ = 1) on at most `cfg.mle_subsample` rows, then factorizes
    /// the full correlation matrix at that θ.
    pub fn fit(rows: Vec<Vec<f64>>, y: &DVector<f64>, f: &DMatrix<f64>, cfg: &FusionConfig) -> Result<Self, FusionError> {
        cfg.validate()?;
        let n = rows.len();
        let dims = rows.first().map_or(0, Vec::len);
        let x_full = to_matrix(&rows);

        let search_idx: Vec<usize> = if n > cfg.mle_subsample {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.rng_seed));
            let mut keep = idx[..cfg.mle_subsample].to_vec();
            keep.sort_unstable();
            keep
        } else {
            (0..n).collect()
        };
        let x_s = DMatrix::from_fn(search_idx.len(), dims, |i, k| x_full[(search_idx[i], k)]);
        let y_s = DVector::from_fn(search_idx.len(), |i, _| y[search_idx[i]]);
        let f_s = DMatrix::from_fn(search_idx.len(), f.ncols(), |i, j| f[(search_idx[i], j)]);

        let log_box = cfg.log_theta_box(dims);
        let mut starts = vec![vec![0.0; dims]];
        if cfg.multistart_count > 1 {
            let design = lhs_sample(&log_box, cfg.multistart_count - 1, cfg.rng_seed)?;
            starts.extend((0..design.nrows()).map(|i| design.row(i).iter().copied().collect::<Vec<_>>()));
        }
        let objective = |log_theta: &[f64]| {
            let theta: Vec<f64> = log_theta.iter().map(|v| 10f64.powf(*v)).collect();
            profile(&x_s, &y_s, &f_s, &theta, cfg.nugget, cfg.max_nugget)
                .map_or(f64::NEG_INFINITY, |p| p.log_likelihood)
        };
        let best = maximize(objective, &log_box, &starts, cfg.optimizer_budget);
        if !best.value.is_finite() {
            return Err(FusionError::Conditioning {
                nugget: cfg.max_nugget,
                n: search_idx.len(),
            });
        }
        let theta: Vec<f64> = best.x.iter().map(|v| 10f64.powf(*v)).collect();
        log::debug!(
            "theta {:?} after {} likelihood evaluations (lnL {:.3})",
            theta,
            best.evaluations,
            best.value
        );
        // The full matrix is at least as ill-conditioned as the subsample, so
        // start its nugget escalation where the subsample ended.
        let start_nugget = if search_idx.len() < n {
            profile(&x_s, &y_s, &f_s, &theta, cfg.nugget, cfg.max_nugget)?.nugget
        } else {
            cfg.nugget
        };
        let p = profile(&x_full, y, f, &theta, start_nugget, cfg.max_nugget)?;
        Ok(Self {
            train: rows,
            theta,
            nugget: p.nugget,
            beta: p.beta,
            sigma2: p.sigma2,
            log_likelihood: p.log_likelihood,
            chol: p.chol,
            weights: p.weights,
            r_inv_f: p.r_inv_f,
            gram_inv: p.gram_inv,
        })
    }

    /// Mean and variance at a normalized point with trend regressors `fx`.
    pub fn predict(&self, x: &[f64], fx: &DVector<f64>) -> (f64, f64) {
        let r = correlation_vector(&self.train, x, &self.theta, self.nugget);
        let mean = fx.dot(&self.beta) + r.dot(&self.weights);
        let r_inv_r = self.chol.solve(&r);
        let u = self.r_inv_f.transpose() * &r - fx;
        let var = self.sigma2 * (1.0 + self.nugget - r.dot(&r_inv_r) + u.dot(&(&self.gram_inv * &u)));
        (mean, var.max(0.0))
    }

    /// Mean only; skips the triangular solves needed for the variance.
    pub fn predict_mean(&self, x: &[f64], fx: &DVector<f64>) -> f64 {
        let r = correlation_vector(&self.train, x, &self.theta, self.nugget);
        fx.dot(&self.beta) + r.dot(&self.weights)
    }

    /// Leave-one-out residuals `(R⁻¹d)_i / (R⁻¹)_ii`.
    pub fn loo_residuals(&self) -> DVector<f64> {
        let inv = self.chol.inverse();
        DVector::from_fn(self.weights.len(), |i, _| self.weights[i] / inv[(i, i)])
    }
}

/// Ordinary-kriging surrogate over a box-normalized input space.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    bounds: Vec<(f64, f64)>,
    process: GlsProcess,
}

pub(crate) fn normalize(x: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter().zip(bounds).map(|(v, (lo, hi))| (v - lo) / (hi - lo)).collect()
}

impl KrigingModel {
    /// Fits a model to the rows of `inputs` (`n × m`) and responses `y`.
    pub fn fit(
        inputs: &DMatrix<f64>,
        y: &DVector<f64>,
        bounds: &[(f64, f64)],
        cfg: &FusionConfig,
    ) -> Result<Self, FusionError> {
        let (n, m) = inputs.shape();
        if bounds.len() != m || y.len() != n {
            return Err(FusionError::Dimension(format!(
                "{n}×{m} inputs, {} responses, {} bounds",
                y.len(),
                bounds.len()
            )));
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| normalize(&inputs.row(i).iter().copied().collect::<Vec<_>>(), bounds))
            .collect();
        let ones = DMatrix::from_element(n, 1, 1.0);
        let process = GlsProcess::fit(rows, y, &ones, cfg)?;
        Ok(Self {
            bounds: bounds.to_vec(),
            process,
        })
    }

    /// Concentrated log-likelihood of the data at a given θ (no search).
    pub fn log_likelihood_at(
        inputs: &DMatrix<f64>,
        y: &DVector<f64>,
        bounds: &[(f64, f64)],
        theta: &[f64],
        cfg: &FusionConfig,
    ) -> Result<f64, FusionError> {
        let rows: Vec<Vec<f64>> = (0..inputs.nrows())
            .map(|i| normalize(&inputs.row(i).iter().copied().collect::<Vec<_>>(), bounds))
            .collect();
        let ones = DMatrix::from_element(rows.len(), 1, 1.0);
        Ok(profile(&to_matrix(&rows), y, &ones, theta, cfg.nugget, cfg.max_nugget)?.log_likelihood)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.process
            .predict_mean(&normalize(x, &self.bounds), &DVector::from_element(1, 1.0))
    }

    pub fn predict_with_variance(&self, x: &[f64]) -> (f64, f64) {
        self.process
            .predict(&normalize(x, &self.bounds), &DVector::from_element(1, 1.0))
    }

    pub fn theta(&self) -> &[f64] {
        &self.process.theta
    }

    pub fn nugget(&self) -> f64 {
        self.process.nugget
    }

    /// Constant trend μ.
    pub fn mean(&self) -> f64 {
        self.process.beta[0]
    }

    pub fn sigma2(&self) -> f64 {
        self.process.sigma2
    }

    pub fn log_likelihood(&self) -> f64 {
        self.process.log_likelihood
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
}

/// Fits one response of a dataset.
pub fn fit_kriging(data: &Dataset, response: &str, cfg: &FusionConfig) -> Result<KrigingModel, FusionError> {
    data.validate()?;
    KrigingModel::fit(&data.inputs, data.response(response)?, &data.bounds, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_data(n: usize) -> (DMatrix<f64>, DVector<f64>) {
        let x = DMatrix::from_fn(n, 1, |i, _| 2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64);
        let y = DVector::from_fn(n, |i, _| x[(i, 0)].sin());
        (x, y)
    }

    #[test]
    fn sine_interpolation() {
        let (x, y) = sine_data(10);
        let bounds = [(0.0, 2.0 * std::f64::consts::PI)];
        let m = KrigingModel::fit(&x, &y, &bounds, &FusionConfig::default()).unwrap();
        for i in 0..10 {
            let xi = x[(i, 0)];
            assert!((m.predict(&[xi]) - y[i]).abs() < 1e-6);
        }
        for k in 0..50 {
            let xi = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / 50.0;
            assert!((m.predict(&[xi]) - xi.sin()).abs() < 1e-2, "x = {xi}");
        }
    }

    #[test]
    fn constant_field_predicts_constant() {
        let x = DMatrix::from_row_slice(5, 2, &[0.0, 0.0, 1.0, 0.2, 0.3, 0.9, 0.6, 0.4, 0.8, 1.0]);
        let y = DVector::from_element(5, 3.0);
        let m = KrigingModel::fit(&x, &y, &[(0.0, 1.0), (0.0, 1.0)], &FusionConfig::default()).unwrap();
        for p in [[0.5, 0.5], [0.1, 0.9], [0.95, 0.05]] {
            assert!((m.predict(&p) - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn selected_theta_not_worse_than_unit_theta() {
        let (x, y) = sine_data(12);
        let bounds = [(0.0, 2.0 * std::f64::consts::PI)];
        let cfg = FusionConfig::default();
        let m = KrigingModel::fit(&x, &y, &bounds, &cfg).unwrap();
        let at_one = KrigingModel::log_likelihood_at(&x, &y, &bounds, &[1.0], &cfg).unwrap();
        assert!(m.log_likelihood() >= at_one - 1e-9);
    }

    #[test]
    fn variance_vanishes_at_samples() {
        let (x, y) = sine_data(8);
        let bounds = [(0.0, 2.0 * std::f64::consts::PI)];
        let m = KrigingModel::fit(&x, &y, &bounds, &FusionConfig::default()).unwrap();
        let (_, v_at) = m.predict_with_variance(&[x[(3, 0)]]);
        let (_, v_mid) = m.predict_with_variance(&[0.5 * (x[(3, 0)] + x[(4, 0)])]);
        assert!(v_at < 1e-6 * m.sigma2().max(1e-12) + 1e-12);
        assert!(v_mid > v_at);
    }
}
