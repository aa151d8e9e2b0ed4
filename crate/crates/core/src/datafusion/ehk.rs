use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::kriging::{normalize, GlsProcess};
use super::{Dataset, FusionConfig, FusionError, KrigingModel};

/// Normalized column Gram matrices with an eigenvalue below this are
/// treated as rank deficient.
const COLLINEAR_TOL: f64 = 1e-10;

/// Extended Hierarchical Kriging model: `ŷ(x) = ρᵀ f̂_LF(x) + Z_d(x)`.
#[derive(Debug, Clone)]
pub struct EhkModel {
    bounds: Vec<(f64, f64)>,
    lf: Vec<KrigingModel>,
    process: GlsProcess,
    loo_rmse: f64,
}

/// Fails when the columns of `f` are (numerically) linearly dependent,
/// naming the pair of columns with the largest absolute cosine.
fn check_collinearity(f: &DMatrix<f64>) -> Result<(), FusionError> {
    let l = f.ncols();
    let norms: Vec<f64> = (0..l).map(|j| f.column(j).norm()).collect();
    let mut cos = DMatrix::identity(l, l);
    for i in 0..l {
        for j in 0..i {
            let c = if norms[i] > 0.0 && norms[j] > 0.0 {
                f.column(i).dot(&f.column(j)) / (norms[i] * norms[j])
            } else {
                1.0
            };
            cos[(i, j)] = c;
            cos[(j, i)] = c;
        }
    }
    let zero_column = norms.contains(&0.0);
    let min_eig = SymmetricEigen::new(cos.clone()).eigenvalues.min();
    if l > 1 && (zero_column || min_eig < COLLINEAR_TOL) {
        let mut pair = (0, 1);
        let mut worst = -1.0;
        for i in 0..l {
            for j in (i + 1)..l {
                if cos[(i, j)].abs() > worst {
                    worst = cos[(i, j)].abs();
                    pair = (i, j);
                }
            }
        }
        return Err(FusionError::Collinear {
            first: pair.0,
            second: pair.1,
        });
    }
    if l == 1 && zero_column {
        return Err(FusionError::Collinear { first: 0, second: 0 });
    }
    Ok(())
}

impl EhkModel {
    /// Fits the discrepancy process to HF samples given LF surrogates.
    pub fn fit(
        inputs: &DMatrix<f64>,
        y: &DVector<f64>,
        bounds: &[(f64, f64)],
        lf: Vec<KrigingModel>,
        cfg: &FusionConfig,
    ) -> Result<Self, FusionError> {
        let (n, m) = inputs.shape();
        let l = lf.len();
        if l == 0 {
            return Err(FusionError::Dimension("no LF surrogates".into()));
        }
        if n < l {
            return Err(FusionError::Underdetermined { n_hf: n, n_lf: l });
        }
        if bounds.len() != m || y.len() != n {
            return Err(FusionError::Dimension(format!(
                "{n}×{m} inputs, {} responses, {} bounds",
                y.len(),
                bounds.len()
            )));
        }
        if let Some(bad) = lf.iter().position(|s| s.bounds().len() != m) {
            return Err(FusionError::Dimension(format!("LF surrogate {bad} has a different input dimension")));
        }
        let raw: Vec<Vec<f64>> = (0..n).map(|i| inputs.row(i).iter().copied().collect()).collect();
        let f = DMatrix::from_fn(n, l, |i, j| lf[j].predict(&raw[i]));
        check_collinearity(&f)?;
        let rows = raw.iter().map(|x| normalize(x, bounds)).collect();
        let process = GlsProcess::fit(rows, y, &f, cfg)?;
        let loo = process.loo_residuals();
        let loo_rmse = (loo.norm_squared() / n as f64).sqrt();
        Ok(Self {
            bounds: bounds.to_vec(),
            lf,
            process,
            loo_rmse,
        })
    }

    /// LF surrogate predictions `f̂_LF(x)`.
    pub fn lf_predictions(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.lf.len(), self.lf.iter().map(|s| s.predict(x)))
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.process
            .predict_mean(&normalize(x, &self.bounds), &self.lf_predictions(x))
    }

    /// Mean and kriging variance of the discrepancy process (including the
    /// uncertainty of the estimated ρ).
    pub fn predict_with_variance(&self, x: &[f64]) -> (f64, f64) {
        self.process
            .predict(&normalize(x, &self.bounds), &self.lf_predictions(x))
    }

    pub fn rho(&self) -> &[f64] {
        self.process.beta.as_slice()
    }

    pub fn sigma2_d(&self) -> f64 {
        self.process.sigma2
    }

    pub fn theta_d(&self) -> &[f64] {
        &self.process.theta
    }

    pub fn nugget(&self) -> f64 {
        self.process.nugget
    }

    pub fn log_likelihood(&self) -> f64 {
        self.process.log_likelihood
    }

    /// Leave-one-out cross-validation RMSE over the HF samples.
    pub fn loo_rmse(&self) -> f64 {
        self.loo_rmse
    }

    pub fn lf_surrogates(&self) -> &[KrigingModel] {
        &self.lf
    }
}

/// Fits one HF response given already-fitted LF surrogates for it.
pub fn fit_ehk(
    hf: &Dataset,
    response: &str,
    lf: Vec<KrigingModel>,
    cfg: &FusionConfig,
) -> Result<EhkModel, FusionError> {
    hf.validate()?;
    EhkModel::fit(&hf.inputs, hf.response(response)?, &hf.bounds, lf, cfg)
}
