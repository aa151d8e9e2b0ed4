use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FusionError;

/// Input columns of aerodynamic datasets, degrees.
pub const AERO_INPUTS: [&str; 2] = ["alpha", "beta"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fidelity {
    #[serde(rename = "HF")]
    High,
    #[serde(rename = "LF")]
    Low,
}

/// Sampled responses at `n` input points of dimension `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub tool: String,
    pub fidelity: Fidelity,
    pub input_names: Vec<String>,
    /// `n × m`.
    pub inputs: DMatrix<f64>,
    pub bounds: Vec<(f64, f64)>,
    pub responses: BTreeMap<String, DVector<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    tool: String,
    fidelity: Fidelity,
    inputs: Vec<String>,
    bounds: Vec<(f64, f64)>,
    responses: Vec<String>,
    samples: usize,
}

impl Dataset {
    pub fn new(
        tool: impl Into<String>,
        fidelity: Fidelity,
        input_names: Vec<String>,
        inputs: DMatrix<f64>,
        bounds: Vec<(f64, f64)>,
        responses: BTreeMap<String, DVector<f64>>,
    ) -> Result<Self, FusionError> {
        let d = Self {
            tool: tool.into(),
            fidelity,
            input_names,
            inputs,
            bounds,
            responses,
        };
        d.validate()?;
        Ok(d)
    }

    fn err(&self, message: impl Into<String>) -> FusionError {
        FusionError::Dataset {
            tool: self.tool.clone(),
            message: message.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn dims(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn response(&self, name: &str) -> Result<&DVector<f64>, FusionError> {
        self.responses
            .get(name)
            .ok_or_else(|| self.err(format!("no response `{name}`")))
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.inputs.row(i).iter().copied().collect()
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let (n, m) = self.inputs.shape();
        if self.input_names.len() != m || self.bounds.len() != m {
            return Err(self.err(format!(
                "{m} input columns but {} names and {} bounds",
                self.input_names.len(),
                self.bounds.len()
            )));
        }
        if n < m + 1 {
            return Err(self.err(format!("{n} samples for {m} inputs; need at least {}", m + 1)));
        }
        for (k, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(self.err(format!("degenerate bounds for `{}`", self.input_names[k])));
            }
            for i in 0..n {
                let v = self.inputs[(i, k)];
                if !(lo..=hi).contains(&v) {
                    return Err(self.err(format!(
                        "sample {i}: {} = {v} outside [{lo}, {hi}]",
                        self.input_names[k]
                    )));
                }
            }
        }
        if self.responses.is_empty() {
            return Err(self.err("no responses"));
        }
        for (name, y) in &self.responses {
            if y.len() != n {
                return Err(self.err(format!("response `{name}` has {} values for {n} samples", y.len())));
            }
            if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                return Err(self.err(format!("response `{name}` sample {i} is not finite")));
            }
        }
        // Duplicate inputs make the correlation matrix singular.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            (0..m)
                .map(|k| self.inputs[(a, k)].total_cmp(&self.inputs[(b, k)]))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in order.windows(2) {
            let scale = |k: usize| self.bounds[k].1 - self.bounds[k].0;
            if (0..m).all(|k| (self.inputs[(w[0], k)] - self.inputs[(w[1], k)]).abs() <= 1e-12 * scale(k)) {
                return Err(self.err(format!("samples {} and {} are duplicates", w[0], w[1])));
            }
        }
        Ok(())
    }

    /// Writes `<stem>.csv` and `<stem>.json` (sidecar metadata) to `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<(PathBuf, PathBuf), FusionError> {
        let dir = dir.as_ref();
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        let io = |p: &Path, e: &dyn std::fmt::Display| FusionError::File {
            file: p.display().to_string(),
            message: e.to_string(),
        };
        fs::create_dir_all(dir).map_err(|e| io(dir, &e))?;
        let mut w = csv::Writer::from_path(&csv_path).map_err(|e| io(&csv_path, &e))?;
        let names: Vec<&String> = self.responses.keys().collect();
        let header: Vec<&str> = self
            .input_names
            .iter()
            .chain(names.iter().copied())
            .map(String::as_str)
            .collect();
        w.write_record(&header).map_err(|e| io(&csv_path, &e))?;
        for i in 0..self.len() {
            let row: Vec<String> = self
                .inputs
                .row(i)
                .iter()
                .copied()
                .chain(names.iter().map(|n| self.responses[*n][i]))
                .map(|v| format!("{v}"))
                .collect();
            w.write_record(&row).map_err(|e| io(&csv_path, &e))?;
        }
        w.flush().map_err(|e| io(&csv_path, &e))?;
        let sidecar = Sidecar {
            tool: self.tool.clone(),
            fidelity: self.fidelity,
            inputs: self.input_names.clone(),
            bounds: self.bounds.clone(),
            responses: names.iter().map(|s| s.to_string()).collect(),
            samples: self.len(),
        };
        let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        fs::write(&json_path, text + "\n").map_err(|e| io(&json_path, &e))?;
        Ok((csv_path, json_path))
    }

    /// Loads a dataset from its CSV file; the sidecar is the same path with
    /// a `.json` extension.
    pub fn load(csv_path: impl AsRef<Path>) -> Result<Self, FusionError> {
        let csv_path = csv_path.as_ref();
        let json_path = csv_path.with_extension("json");
        let file_err = |p: &Path, m: String| FusionError::File {
            file: p.display().to_string(),
            message: m,
        };
        let text = fs::read_to_string(&json_path).map_err(|e| file_err(&json_path, e.to_string()))?;
        let meta: Sidecar =
            serde_json::from_str(&text).map_err(|e| file_err(&json_path, format!("schema violation: {e}")))?;
        let mut r = csv::Reader::from_path(csv_path).map_err(|e| file_err(csv_path, e.to_string()))?;
        let header: Vec<String> = r
            .headers()
            .map_err(|e| file_err(csv_path, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let m = meta.inputs.len();
        if header.len() < m + 1 || header[..m] != meta.inputs[..] {
            return Err(file_err(
                csv_path,
                format!("header {header:?} does not start with inputs {:?}", meta.inputs),
            ));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| file_err(csv_path, e.to_string()))?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| file_err(csv_path, format!("row {}: {e}", line + 2)))?;
            if row.len() != header.len() {
                return Err(file_err(csv_path, format!("row {} has {} fields", line + 2, row.len())));
            }
            rows.push(row);
        }
        let n = rows.len();
        if n != meta.samples {
            return Err(file_err(
                csv_path,
                format!("{n} rows but sidecar declares {} samples", meta.samples),
            ));
        }
        let inputs = DMatrix::from_fn(n, m, |i, k| rows[i][k]);
        let responses = header[m..]
            .iter()
            .enumerate()
            .map(|(j, name)| (name.clone(), DVector::from_fn(n, |i, _| rows[i][m + j])))
            .collect();
        Self::new(meta.tool, meta.fidelity, meta.inputs, inputs, meta.bounds, responses)
    }
}
