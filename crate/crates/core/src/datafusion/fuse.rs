use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Dataset, EhkModel, Fidelity, FusionConfig, FusionError, KrigingModel, AERO_INPUTS};
use crate::aerodb::{database_with_default_increments, AeroDatabase, AeroTable, Coefficient, ReferenceGeometry};

/// Baseline grid of the compiled database, degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Default for GridSpec {
    /// α from −20 to 30 and β from 0 to 20, both every 2.5 deg.
    fn default() -> Self {
        Self {
            alpha: (0..=20).map(|i| -20.0 + 2.5 * i as f64).collect(),
            beta: (0..=8).map(|i| 2.5 * i as f64).collect(),
        }
    }
}

/// Fit summary for one coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    /// Scaling factor per LF source, in input order.
    pub rho: Vec<f64>,
    pub sigma2_d: f64,
    pub theta_d: Vec<f64>,
    pub nugget: f64,
    pub log_likelihood: f64,
    /// Leave-one-out RMSE of the fused model over the HF samples.
    pub loo_rmse: f64,
    /// RMSE of each LF surrogate against the HF samples.
    pub lf_rmse_at_hf: BTreeMap<String, f64>,
    /// LF surrogate hyperparameters, per source.
    pub lf_theta: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub hf_tool: String,
    pub hf_samples: usize,
    pub lf_tools: Vec<String>,
    pub lf_samples: Vec<usize>,
    pub grid: GridSpec,
    pub config: FusionConfig,
    /// What the `variance` of a fused prediction means.
    pub variance_kind: String,
    pub coefficients: BTreeMap<String, CoefficientReport>,
}

/// Fused database, report and the fitted per-coefficient models.
#[derive(Debug, Clone)]
pub struct FusionOutput {
    pub database: AeroDatabase,
    pub report: FusionReport,
    pub models: BTreeMap<Coefficient, EhkModel>,
}

impl FusionOutput {
    /// Fused coefficient prediction at (α, β) in degrees.
    pub fn predict(&self, c: Coefficient, alpha: f64, beta: f64) -> f64 {
        self.models[&c].predict(&[alpha, beta])
    }
}

fn check_aero(d: &Dataset) -> Result<(), FusionError> {
    d.validate()?;
    if d.input_names != AERO_INPUTS {
        return Err(FusionError::Dataset {
            tool: d.tool.clone(),
            message: format!("inputs {:?}, expected {AERO_INPUTS:?}", d.input_names),
        });
    }
    for c in Coefficient::ALL {
        d.response(c.name())?;
    }
    Ok(())
}

fn fit_all(d: &Dataset, cfg: &FusionConfig) -> Result<BTreeMap<Coefficient, KrigingModel>, FusionError> {
    Coefficient::ALL
        .into_iter()
        .map(|c| {
            let started = Instant::now();
            let m = KrigingModel::fit(&d.inputs, d.response(c.name())?, &d.bounds, cfg).map_err(|e| {
                FusionError::Coefficient {
                    coefficient: format!("{c} ({})", d.tool),
                    source: Box::new(e),
                }
            })?;
            log::info!(
                "{} {c}: theta {:?}, nugget {:e} ({:.2} s)",
                d.tool,
                m.theta(),
                m.nugget(),
                started.elapsed().as_secs_f64()
            );
            Ok((c, m))
        })
        .collect()
}

fn tabulate(grid: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<AeroTable, FusionError> {
    Ok(AeroTable::from_fn(
        &["alpha", "beta"],
        vec![grid.alpha.clone(), grid.beta.clone()],
        |x| f(x[0], x[1]),
    )?)
}

/// Fits LF surrogates and EHK models for every coefficient and compiles the
/// fused predictions into database baselines (default increments attached).
pub fn fuse_aerodb(
    hf: &Dataset,
    lf: &[Dataset],
    grid: &GridSpec,
    cfg: &FusionConfig,
) -> Result<FusionOutput, FusionError> {
    cfg.validate()?;
    check_aero(hf)?;
    if hf.fidelity != Fidelity::High {
        log::warn!("dataset `{}` used as HF is tagged low fidelity", hf.tool);
    }
    for d in lf {
        check_aero(d)?;
    }
    if hf.len() < lf.len() {
        return Err(FusionError::Underdetermined {
            n_hf: hf.len(),
            n_lf: lf.len(),
        });
    }
    let mut surrogates: Vec<BTreeMap<Coefficient, KrigingModel>> =
        lf.iter().map(|d| fit_all(d, cfg)).collect::<Result<_, _>>()?;

    let mut models = BTreeMap::new();
    let mut reports = BTreeMap::new();
    let mut baselines = BTreeMap::new();
    for c in Coefficient::ALL {
        let lf_models: Vec<KrigingModel> = surrogates
            .iter_mut()
            .map(|m| m.remove(&c).expect("fitted for every coefficient"))
            .collect();
        let y = hf.response(c.name())?;
        let mut lf_rmse_at_hf = BTreeMap::new();
        let mut lf_theta = BTreeMap::new();
        for (d, m) in lf.iter().zip(&lf_models) {
            let sse: f64 = (0..hf.len()).map(|i| (m.predict(&hf.row(i)) - y[i]).powi(2)).sum();
            lf_rmse_at_hf.insert(d.tool.clone(), (sse / hf.len() as f64).sqrt());
            lf_theta.insert(d.tool.clone(), m.theta().to_vec());
        }
        let model = EhkModel::fit(&hf.inputs, y, &hf.bounds, lf_models, cfg).map_err(|e| {
            FusionError::Coefficient {
                coefficient: c.to_string(),
                source: Box::new(e),
            }
        })?;
        log::info!(
            "{c}: rho {:?}, sigma2_d {:.3e}, theta_d {:?}, LOO RMSE {:.3e}",
            model.rho(),
            model.sigma2_d(),
            model.theta_d(),
            model.loo_rmse()
        );
        baselines.insert(c, tabulate(grid, |a, b| model.predict(&[a, b]))?);
        reports.insert(
            c.name().to_string(),
            CoefficientReport {
                rho: model.rho().to_vec(),
                sigma2_d: model.sigma2_d(),
                theta_d: model.theta_d().to_vec(),
                nugget: model.nugget(),
                log_likelihood: model.log_likelihood(),
                loo_rmse: model.loo_rmse(),
                lf_rmse_at_hf,
                lf_theta,
            },
        );
        models.insert(c, model);
    }
    let database = database_with_default_increments(ReferenceGeometry::default(), baselines)?;
    let report = FusionReport {
        hf_tool: hf.tool.clone(),
        hf_samples: hf.len(),
        lf_tools: lf.iter().map(|d| d.tool.clone()).collect(),
        lf_samples: lf.iter().map(Dataset::len).collect(),
        grid: grid.clone(),
        config: cfg.clone(),
        variance_kind: "kriging variance of the discrepancy process, including uncertainty of rho".into(),
        coefficients: reports,
    };
    Ok(FusionOutput {
        database,
        report,
        models,
    })
}

/// Database whose baselines come from a single LF source's surrogates.
pub fn lf_only_database(lf: &Dataset, grid: &GridSpec, cfg: &FusionConfig) -> Result<AeroDatabase, FusionError> {
    cfg.validate()?;
    check_aero(lf)?;
    let models = fit_all(lf, cfg)?;
    let baselines = models
        .iter()
        .map(|(c, m)| Ok((*c, tabulate(grid, |a, b| m.predict(&[a, b]))?)))
        .collect::<Result<BTreeMap<_, _>, FusionError>>()?;
    Ok(database_with_default_increments(ReferenceGeometry::default(), baselines)?)
}
