use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const RUN_MANIFEST: &str = "manifest.json";

/// Record of one CLI run. Contains no timestamps so identical reruns
/// produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config_paths: Vec<String>,
    pub seed: Option<u64>,
    pub output_dir: String,
    pub version: String,
    /// SHA-256 of every file written, keyed by path relative to `output_dir`.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config_paths: Vec<String>, seed: Option<u64>, output_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            config_paths,
            seed,
            output_dir: output_dir.display().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            artifacts: BTreeMap::new(),
        }
    }

    /// Hashes everything under the output directory and writes the manifest.
    pub fn write(mut self) -> io::Result<PathBuf> {
        let root = PathBuf::from(&self.output_dir);
        let mut files = Vec::new();
        collect_files(&root, &mut files)?;
        files.sort();
        for path in files {
            let rel = path.strip_prefix(&root).unwrap_or(&path);
            if rel == Path::new(RUN_MANIFEST) {
                continue;
            }
            let digest = Sha256::digest(fs::read(&path)?);
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            self.artifacts.insert(rel.to_string_lossy().replace('\\', "/"), hex);
        }
        let out = root.join(RUN_MANIFEST);
        fs::write(&out, serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(out)
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}
