//! CSV and manifest emission.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

/// One CSV table, fully assembled in memory before anything touches disk.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows,
        }
    }

    fn to_csv_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(&self.header)
            .and_then(|_| self.rows.iter().try_for_each(|row| writer.write_record(row)))
            .map_err(|e| CliError::Numerical(format!("csv encoding failed: {e}")))?;
        writer
            .into_inner()
            .map_err(|e| CliError::Numerical(format!("csv flush failed: {e}")))
    }
}

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
    rows: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a RunConfig,
    seed: Option<u64>,
    version: &'a str,
    wall_clock_seconds: f64,
    created_unix: u64,
    outputs: Vec<OutputEntry>,
}

/// Write all tables plus `manifest.json`; on any failure remove whatever was
/// already written so no partial run remains on disk.
pub fn write_outputs(
    dir: &Path,
    command: &str,
    config: &RunConfig,
    tables: &[Table],
    wall_clock_seconds: f64,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;

    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<Vec<PathBuf>, CliError> {
        let mut entries = Vec::new();
        for table in tables {
            let bytes = table.to_csv_bytes()?;
            let path = dir.join(format!("{}.csv", table.name));
            std::fs::write(&path, &bytes)
                .map_err(|e| CliError::Numerical(format!("cannot write {}: {e}", path.display())))?;
            written.push(path.clone());
            entries.push(OutputEntry {
                file: format!("{}.csv", table.name),
                sha256: hex_digest(&bytes),
                rows: table.rows.len(),
            });
        }
        let manifest = Manifest {
            command,
            config,
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_clock_seconds,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs: entries,
        };
        let manifest_path = dir.join("manifest.json");
        let body = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::Numerical(format!("manifest encoding failed: {e}")))?;
        std::fs::write(&manifest_path, body).map_err(|e| {
            CliError::Numerical(format!("cannot write {}: {e}", manifest_path.display()))
        })?;
        written.push(manifest_path);
        Ok(written.clone())
    })();

    if result.is_err() {
        for path in &written {
            let _ = std::fs::remove_file(path);
        }
    }
    result
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
