use serde::{Deserialize, Serialize};

use super::AeroError;

/// Dense coefficient table over 1 to 3 named axes, values in row-major
/// order (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeroTable {
    axis_names: Vec<String>,
    axis_grids: Vec<Vec<f64>>,
    values: Vec<f64>,
}

/// Result of a table lookup. `clamped` is set when any coordinate fell
/// outside the grid and was extrapolated from the edge cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub value: f64,
    pub clamped: bool,
}

fn valid_axis_name(name: &str) -> bool {
    matches!(
        name,
        "alpha" | "beta" | "mach" | "p" | "q" | "r" | "p_hat" | "q_hat" | "r_hat"
    ) || name
        .strip_prefix("delta_")
        .is_some_and(|s| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}

impl AeroTable {
    pub fn new(
        axis_names: Vec<String>,
        axis_grids: Vec<Vec<f64>>,
        values: Vec<f64>,
    ) -> Result<Self, AeroError> {
        if axis_names.is_empty() || axis_names.len() > 3 {
            return Err(AeroError::Table(format!(
                "table must have 1 to 3 axes, got {}",
                axis_names.len()
            )));
        }
        if axis_names.len() != axis_grids.len() {
            return Err(AeroError::Table("axis name/grid count mismatch".into()));
        }
        for (i, name) in axis_names.iter().enumerate() {
            if !valid_axis_name(name) {
                return Err(AeroError::Table(format!("unknown axis `{name}`")));
            }
            if axis_names[..i].contains(name) {
                return Err(AeroError::Table(format!("duplicate axis `{name}`")));
            }
        }
        for (name, grid) in axis_names.iter().zip(&axis_grids) {
            if grid.len() < 2 {
                return Err(AeroError::Axis {
                    axis: name.clone(),
                    message: "needs at least 2 grid points".into(),
                });
            }
            if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(AeroError::Axis {
                    axis: name.clone(),
                    message: "grid is not strictly increasing".into(),
                });
            }
        }
        let expected: usize = axis_grids.iter().map(Vec::len).product();
        if values.len() != expected {
            return Err(AeroError::Table(format!(
                "value count {} does not match grid size {expected}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AeroError::Table(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            axis_names,
            axis_grids,
            values,
        })
    }

    /// Tabulates `f` over the grid tuples.
    pub fn from_fn(
        axis_names: &[&str],
        axis_grids: Vec<Vec<f64>>,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> Result<Self, AeroError> {
        let shape: Vec<usize> = axis_grids.iter().map(Vec::len).collect();
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut point = vec![0.0; shape.len()];
        for flat in 0..total {
            let mut rem = flat;
            for k in (0..shape.len()).rev() {
                point[k] = axis_grids[k][rem % shape[k]];
                rem /= shape[k];
            }
            values.push(f(&point));
        }
        Self::new(
            axis_names.iter().map(|s| s.to_string()).collect(),
            axis_grids,
            values,
        )
    }

    pub fn axis_names(&self) -> &[String] {
        &self.axis_names
    }

    pub fn axis_grids(&self) -> &[Vec<f64>] {
        &self.axis_grids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self, axis: &str) -> Option<&[f64]> {
        self.axis_names
            .iter()
            .position(|n| n == axis)
            .map(|i| self.axis_grids[i].as_slice())
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axis_grids.iter().map(Vec::len).collect()
    }

    /// Value at a multi-index.
    pub fn at(&self, index: &[usize]) -> f64 {
        let mut flat = 0;
        for (k, &i) in index.iter().enumerate() {
            flat = flat * self.axis_grids[k].len() + i;
        }
        self.values[flat]
    }

    /// Multilinear interpolation; outside the grid the edge cell is extended
    /// linearly and the lookup is marked clamped.
    pub fn interpolate(&self, point: &[(&str, f64)]) -> Result<Lookup, AeroError> {
        let dims = self.axis_names.len();
        let mut cell = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let mut clamped = false;
        for k in 0..dims {
            let name = &self.axis_names[k];
            let x = point
                .iter()
                .find(|(n, _)| *n == name.as_str())
                .map(|(_, v)| *v)
                .ok_or_else(|| AeroError::MissingAxis(name.clone()))?;
            if !x.is_finite() {
                return Err(AeroError::Argument(format!("non-finite value for `{name}`")));
            }
            let grid = &self.axis_grids[k];
            let n = grid.len();
            let i = match grid.partition_point(|g| *g <= x) {
                0 => 0,
                j => (j - 1).min(n - 2),
            };
            if x < grid[0] || x > grid[n - 1] {
                clamped = true;
            }
            cell[k] = i;
            frac[k] = (x - grid[i]) / (grid[i + 1] - grid[i]);
        }
        let mut value = 0.0;
        for corner in 0..(1usize << dims) {
            let mut weight = 1.0;
            let mut flat = 0;
            for k in 0..dims {
                let upper = (corner >> (dims - 1 - k)) & 1 == 1;
                let idx = cell[k] + usize::from(upper);
                weight *= if upper { frac[k] } else { 1.0 - frac[k] };
                flat = flat * self.axis_grids[k].len() + idx;
            }
            if weight != 0.0 {
                value += weight * self.values[flat];
            }
        }
        Ok(Lookup { value, clamped })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> AeroTable {
        AeroTable::new(vec!["alpha".into()], vec![vec![0.0, 10.0]], vec![1.0, 3.0]).unwrap()
    }

    #[test]
    fn linear_midpoint() {
        let v = line().interpolate(&[("alpha", 5.0)]).unwrap();
        assert_eq!(v.value, 2.0);
        assert!(!v.clamped);
    }

    #[test]
    fn extrapolates_edge_gradient_and_flags() {
        let v = line().interpolate(&[("alpha", 15.0)]).unwrap();
        assert_eq!(v.value, 4.0);
        assert!(v.clamped);
        let v = line().interpolate(&[("alpha", -5.0)]).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(v.clamped);
    }

    #[test]
    fn missing_axis_is_argument_error() {
        let err = line().interpolate(&[("beta", 1.0)]).unwrap_err();
        assert!(matches!(err, AeroError::MissingAxis(a) if a == "alpha"));
    }

    #[test]
    fn node_lookup_is_bit_exact() {
        let t = AeroTable::from_fn(
            &["alpha", "beta", "mach"],
            vec![vec![-4.0, 0.0, 3.5], vec![0.0, 7.0], vec![0.05, 0.07, 0.1]],
            |x| (x[0] * 0.1).sin() + x[1].cos() * 0.37 + x[2] / 3.0,
        )
        .unwrap();
        for (i, a) in t.axis_grids()[0].iter().enumerate() {
            for (j, b) in t.axis_grids()[1].iter().enumerate() {
                for (k, m) in t.axis_grids()[2].iter().enumerate() {
                    let v = t
                        .interpolate(&[("alpha", *a), ("beta", *b), ("mach", *m)])
                        .unwrap();
                    assert_eq!(v.value.to_bits(), t.at(&[i, j, k]).to_bits());
                }
            }
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(matches!(
            AeroTable::new(vec!["alpha".into()], vec![vec![0.0, 0.0]], vec![1.0, 1.0]),
            Err(AeroError::Axis { .. })
        ));
        assert!(AeroTable::new(vec!["alpha".into()], vec![vec![0.0, 1.0]], vec![1.0]).is_err());
        assert!(AeroTable::new(vec!["theta".into()], vec![vec![0.0, 1.0]], vec![1.0, 2.0]).is_err());
        assert!(
            AeroTable::new(vec!["alpha".into()], vec![vec![0.0, 1.0]], vec![1.0, f64::NAN])
                .is_err()
        );
        assert!(AeroTable::new(
            vec!["delta_elevator".into()],
            vec![vec![0.0, 1.0]],
            vec![1.0, 2.0]
        )
        .is_ok());
    }
}
