use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;

use vdt_core::aerodb::save_database;
use vdt_core::datafusion::emulator::{hf_dataset, lf_dataset, LfTool};
use vdt_core::datafusion::{fuse_aerodb, lf_only_database, Dataset, FusionConfig, FusionError, GridSpec};

use crate::manifest::RunManifest;
use crate::{create_out_dir, input_error, write_json, Classify, Failure, Outcome};

#[derive(Args)]
pub struct FuseArgs {
    /// High-fidelity dataset (CSV with a JSON sidecar).
    #[arg(long, required_unless_present = "lf_only")]
    hf: Option<PathBuf>,
    /// Low-fidelity datasets.
    #[arg(long, required = true, num_args = 1..)]
    lf: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Seed for the hyperparameter multistart.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Fusion settings (JSON); the seed flag overrides its rng_seed.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Angle-of-attack grid as START:END:STEP, deg.
    #[arg(long, default_value = "-20:30:2.5", allow_hyphen_values = true)]
    alpha: String,
    /// Sideslip grid as START:END:STEP, deg.
    #[arg(long, default_value = "0:20:2.5")]
    beta: String,
    /// Compile the database from the single LF dataset's surrogates instead.
    #[arg(long)]
    lf_only: bool,
}

fn parse_axis(spec: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| input_error(format!("grid `{spec}`: {e}")))?;
    let [start, end, step] = parts[..] else {
        return Err(input_error(format!("grid `{spec}` must be START:END:STEP")));
    };
    if !(step > 0.0 && end > start) {
        return Err(input_error(format!("grid `{spec}` needs END > START and STEP > 0")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    if !path.is_file() {
        return Err(input_error(format!("dataset not found: {}", path.display())));
    }
    Dataset::load(path)
        .with_context(|| format!("loading {}", path.display()))
        .or_input()
}

fn fit_failure(e: FusionError) -> Failure {
    match e {
        FusionError::Dataset { .. } | FusionError::File { .. } | FusionError::Bounds(_) => Failure::Input(e.into()),
        other => Failure::Runtime(anyhow::Error::new(other).context("fusion failed")),
    }
}

pub fn run_fuse(args: FuseArgs) -> Outcome {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .or_input()?;
            serde_json::from_str::<FusionConfig>(&text)
                .with_context(|| format!("parsing {}", p.display()))
                .or_input()?
        }
        None => FusionConfig::default(),
    };
    cfg.rng_seed = args.seed;
    cfg.validate().or_input()?;
    let grid = GridSpec {
        alpha: parse_axis(&args.alpha)?,
        beta: parse_axis(&args.beta)?,
    };
    let lf: Vec<Dataset> = args.lf.iter().map(|p| load_dataset(p)).collect::<Result<_, _>>()?;
    create_out_dir(&args.out)?;
    let db_dir = args.out.join("db");
    let mut config_paths: Vec<String> = args.lf.iter().map(|p| p.display().to_string()).collect();

    if args.lf_only {
        let [single] = &lf[..] else {
            return Err(input_error("--lf-only takes exactly one --lf dataset"));
        };
        let db = lf_only_database(single, &grid, &cfg).map_err(fit_failure)?;
        save_database(&db, &db_dir).or_runtime()?;
        println!("LF-only database from {} written to {}", single.tool, db_dir.display());
    } else {
        let hf_path = args.hf.as_ref().expect("clap requires --hf");
        let hf = load_dataset(hf_path)?;
        config_paths.insert(0, hf_path.display().to_string());
        let out = fuse_aerodb(&hf, &lf, &grid, &cfg).map_err(fit_failure)?;
        save_database(&out.database, &db_dir).or_runtime()?;
        write_json(&args.out.join("fusion_report.json"), &out.report)?;
        println!("{:<4} {:>12} {:>14}  rho", "coef", "fused LOO", "best LF @ HF");
        for (name, r) in &out.report.coefficients {
            let best = r.lf_rmse_at_hf.values().copied().fold(f64::INFINITY, f64::min);
            let rho: Vec<String> = r.rho.iter().map(|v| format!("{v:.3}")).collect();
            println!("{name:<4} {:>12.3e} {best:>14.3e}  [{}]", r.loo_rmse, rho.join(", "));
        }
        println!("database written to {}", db_dir.display());
    }
    if let Some(p) = &args.config {
        config_paths.push(p.display().to_string());
    }
    RunManifest::new("fuse", config_paths, Some(args.seed), &args.out)
        .write()
        .or_runtime()?;
    Ok(())
}

#[derive(Args)]
pub struct EmulateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long, default_value_t = 25)]
    hf_samples: usize,
    /// Samples per LF tool.
    #[arg(long, default_value_t = 1200)]
    lf_samples: usize,
    /// Held-out ground-truth samples for scoring (0 to skip).
    #[arg(long, default_value_t = 500)]
    holdout: usize,
}

pub fn run_emulate(args: EmulateArgs) -> Outcome {
    create_out_dir(&args.out)?;
    let hf = hf_dataset(args.hf_samples, args.seed).or_input()?;
    hf.save(&args.out, "hf").or_runtime()?;
    for (k, tool) in LfTool::ALL.into_iter().enumerate() {
        let d = lf_dataset(tool, args.lf_samples, args.seed.wrapping_add(101 * (k as u64 + 1))).or_input()?;
        d.save(&args.out, &format!("lf_{}", format!("{tool:?}").to_lowercase()))
            .or_runtime()?;
    }
    if args.holdout > 0 {
        let mut h = hf_dataset(args.holdout, args.seed.wrapping_add(9_999)).or_input()?;
        h.tool = "ground-truth".into();
        h.save(&args.out, "holdout").or_runtime()?;
    }
    println!(
        "wrote {} HF and 3 × {} LF samples to {}",
        args.hf_samples,
        args.lf_samples,
        args.out.display()
    );
    RunManifest::new("emulate", Vec::new(), Some(args.seed), &args.out)
        .write()
        .or_runtime()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_axis_parsing() {
        assert_eq!(parse_axis("0:20:2.5").unwrap().len(), 9);
        let a = parse_axis("-20:30:2.5").unwrap();
        assert_eq!((a.len(), a[0], a[20]), (21, -20.0, 30.0));
        assert!(parse_axis("0:20").is_err());
        assert!(parse_axis("5:0:1").is_err());
    }
}
