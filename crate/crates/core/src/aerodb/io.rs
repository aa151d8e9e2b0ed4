//! On-disk layout: `manifest.json` naming one CSV per table. Each CSV has a
//! header of axis names followed by `value`, one row per grid tuple in
//! row-major order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AeroDatabase, AeroError, AeroTable, Coefficient, CoefficientTables, RateAxis, ReferenceGeometry};

pub const MANIFEST_NAME: &str = "manifest.json";
const FORMAT: &str = "vdt-aerodb/1";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    geometry: ReferenceGeometry,
    units: BTreeMap<String, String>,
    coefficients: BTreeMap<String, CoefficientEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CoefficientEntry {
    baseline: TableEntry,
    #[serde(default)]
    rate_increments: BTreeMap<String, TableEntry>,
    #[serde(default)]
    control_increments: BTreeMap<String, TableEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableEntry {
    file: String,
    axes: Vec<String>,
}

fn units() -> BTreeMap<String, String> {
    [
        ("alpha", "deg"),
        ("beta", "deg"),
        ("mach", "-"),
        ("p", "rad/s"),
        ("q", "rad/s"),
        ("r", "rad/s"),
        ("delta_*", "deg"),
        ("value", "-"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

fn load_err(file: &Path, message: impl Into<String>) -> AeroError {
    AeroError::Load {
        file: file.display().to_string(),
        message: message.into(),
    }
}

/// Writes the manifest and one CSV per table into `dir`.
pub fn save_database(db: &AeroDatabase, dir: impl AsRef<Path>) -> Result<PathBuf, AeroError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| load_err(dir, e.to_string()))?;
    let mut coefficients = BTreeMap::new();
    for (c, tables) in db.coefficients() {
        let baseline = write_table(dir, &format!("{c}_baseline.csv"), &tables.baseline)?;
        let mut rate_increments = BTreeMap::new();
        for (rate, t) in &tables.rate_increments {
            let name = rate.axis_name();
            rate_increments.insert(name.to_string(), write_table(dir, &format!("{c}_d{name}.csv"), t)?);
        }
        let mut control_increments = BTreeMap::new();
        for (surface, t) in &tables.control_increments {
            control_increments.insert(surface.clone(), write_table(dir, &format!("{c}_d{surface}.csv"), t)?);
        }
        coefficients.insert(
            c.name().to_string(),
            CoefficientEntry {
                baseline,
                rate_increments,
                control_increments,
            },
        );
    }
    let manifest = Manifest {
        format: FORMAT.to_string(),
        geometry: *db.geometry(),
        units: units(),
        coefficients,
    };
    let path = dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| load_err(&path, e.to_string()))?;
    Ok(path)
}

fn write_table(dir: &Path, file: &str, table: &AeroTable) -> Result<TableEntry, AeroError> {
    let path = dir.join(file);
    let mut w = csv::Writer::from_path(&path).map_err(|e| load_err(&path, e.to_string()))?;
    let mut header: Vec<&str> = table.axis_names().iter().map(String::as_str).collect();
    header.push("value");
    w.write_record(&header).map_err(|e| load_err(&path, e.to_string()))?;
    let shape = table.shape();
    let mut index = vec![0usize; shape.len()];
    for value in table.values() {
        let mut row: Vec<String> = index
            .iter()
            .enumerate()
            .map(|(k, &i)| format!("{}", table.axis_grids()[k][i]))
            .collect();
        row.push(format!("{value}"));
        w.write_record(&row).map_err(|e| load_err(&path, e.to_string()))?;
        for k in (0..shape.len()).rev() {
            index[k] += 1;
            if index[k] < shape[k] {
                break;
            }
            index[k] = 0;
        }
    }
    w.flush().map_err(|e| load_err(&path, e.to_string()))?;
    Ok(TableEntry {
        file: file.to_string(),
        axes: table.axis_names().to_vec(),
    })
}

/// Loads a database from a directory (or a manifest path).
pub fn load_database(path: impl AsRef<Path>) -> Result<AeroDatabase, AeroError> {
    let path = path.as_ref();
    let (dir, manifest_path) = if path.is_dir() {
        (path.to_path_buf(), path.join(MANIFEST_NAME))
    } else {
        (
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
            path.to_path_buf(),
        )
    };
    let text = fs::read_to_string(&manifest_path).map_err(|e| load_err(&manifest_path, e.to_string()))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| load_err(&manifest_path, format!("schema violation: {e}")))?;
    if manifest.format != FORMAT {
        return Err(load_err(
            &manifest_path,
            format!("unsupported format `{}`", manifest.format),
        ));
    }
    let mut coefficients = BTreeMap::new();
    for (name, entry) in &manifest.coefficients {
        let c = Coefficient::from_name(name)
            .ok_or_else(|| load_err(&manifest_path, format!("unknown coefficient `{name}`")))?;
        let baseline = read_table(&dir, &entry.baseline)?;
        let mut rate_increments = BTreeMap::new();
        for (rate, t) in &entry.rate_increments {
            let axis = RateAxis::from_name(rate)
                .ok_or_else(|| load_err(&manifest_path, format!("unknown rate `{rate}`")))?;
            rate_increments.insert(axis, read_table(&dir, t)?);
        }
        let mut control_increments = BTreeMap::new();
        for (surface, t) in &entry.control_increments {
            control_increments.insert(surface.clone(), read_table(&dir, t)?);
        }
        coefficients.insert(
            c,
            CoefficientTables {
                baseline,
                rate_increments,
                control_increments,
            },
        );
    }
    AeroDatabase::new(manifest.geometry, coefficients).map_err(|e| load_err(&manifest_path, e.to_string()))
}

fn read_table(dir: &Path, entry: &TableEntry) -> Result<AeroTable, AeroError> {
    let path = dir.join(&entry.file);
    let mut r = csv::Reader::from_path(&path).map_err(|e| load_err(&path, e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| load_err(&path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let dims = entry.axes.len();
    if header.len() != dims + 1 || header[..dims] != entry.axes[..] || header[dims] != "value" {
        return Err(load_err(
            &path,
            format!("header {header:?} does not match axes {:?} + value", entry.axes),
        ));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| load_err(&path, e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| load_err(&path, format!("row {}: {e}", line + 2)))?;
        if row.len() != dims + 1 {
            return Err(load_err(&path, format!("row {} has {} fields", line + 2, row.len())));
        }
        rows.push(row);
    }
    // Grids in first-appearance order; must be strictly increasing.
    let mut grids: Vec<Vec<f64>> = vec![Vec::new(); dims];
    for row in &rows {
        for k in 0..dims {
            if !grids[k].contains(&row[k]) {
                grids[k].push(row[k]);
            }
        }
    }
    for (k, grid) in grids.iter().enumerate() {
        if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(load_err(
                &path,
                format!("axis `{}` grid is not strictly increasing with >= 2 points", entry.axes[k]),
            ));
        }
    }
    let shape: Vec<usize> = grids.iter().map(Vec::len).collect();
    let expected: usize = shape.iter().product();
    if rows.len() != expected {
        return Err(load_err(
            &path,
            format!("value count {} does not match grid size {expected}", rows.len()),
        ));
    }
    let mut index = vec![0usize; dims];
    let mut values = Vec::with_capacity(expected);
    for (n, row) in rows.iter().enumerate() {
        for k in 0..dims {
            if row[k] != grids[k][index[k]] {
                return Err(load_err(
                    &path,
                    format!("row {} breaks row-major order on axis `{}`", n + 2, entry.axes[k]),
                ));
            }
        }
        values.push(row[dims]);
        for k in (0..dims).rev() {
            index[k] += 1;
            if index[k] < shape[k] {
                break;
            }
            index[k] = 0;
        }
    }
    AeroTable::new(entry.axes.clone(), grids, values).map_err(|e| load_err(&path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn fixture() -> AeroDatabase {
        let base = Coefficient::ALL
            .into_iter()
            .map(|c| {
                let t = AeroTable::from_fn(
                    &["alpha", "beta"],
                    vec![vec![-20.0, -2.5, 0.0, 12.5, 30.0], vec![0.0, 5.0, 20.0]],
                    |x| (0.1 * x[0]).sin() / 3.0 + 1e-3 * x[1] + c.index() as f64 * 0.1,
                )
                .unwrap();
                (c, t)
            })
            .collect();
        database_with_default_increments(ReferenceGeometry::default(), base).unwrap()
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let db = fixture();
        save_database(&db, dir.path()).unwrap();
        let back = load_database(dir.path()).unwrap();
        assert_eq!(back, db);
        // Saving again yields identical bytes.
        let dir2 = tempfile::tempdir().unwrap();
        save_database(&back, dir2.path()).unwrap();
        for entry in fs::read_dir(dir.path()).unwrap() {
            let entry = entry.unwrap();
            let a = fs::read(entry.path()).unwrap();
            let b = fs::read(dir2.path().join(entry.file_name())).unwrap();
            assert_eq!(a, b, "{:?}", entry.file_name());
        }
    }

    #[test]
    fn non_monotone_grid_names_axis_and_file() {
        let dir = tempfile::tempdir().unwrap();
        save_database(&fixture(), dir.path()).unwrap();
        let file = dir.path().join("Cm_baseline.csv");
        let text = fs::read_to_string(&file).unwrap();
        // Swap two beta grid values throughout the file.
        let broken = text.replace(",5,", ",TMP,").replace(",20,", ",5,").replace(",TMP,", ",20,");
        fs::write(&file, broken).unwrap();
        let err = load_database(dir.path()).unwrap_err().to_string();
        assert!(err.contains("Cm_baseline.csv"), "{err}");
        assert!(err.contains("`beta`"), "{err}");
    }

    #[test]
    fn value_count_mismatch_reported() {
        let dir = tempfile::tempdir().unwrap();
        save_database(&fixture(), dir.path()).unwrap();
        let file = dir.path().join("CL_baseline.csv");
        let text = fs::read_to_string(&file).unwrap();
        let truncated: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
        fs::write(&file, truncated.join("\n") + "\n").unwrap();
        let err = load_database(dir.path()).unwrap_err().to_string();
        assert!(err.contains("CL_baseline.csv") && err.contains("value count"), "{err}");
    }

    #[test]
    fn corrupt_manifest_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST_NAME), "{\"format\": 3}").unwrap();
        let err = load_database(dir.path()).unwrap_err().to_string();
        assert!(err.contains("manifest.json") && err.contains("schema"), "{err}");
    }
}
