//! CSV/JSON encoding, atomic writes and the run manifest.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::defaults;
use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

/// One output file, held in memory until the run succeeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// 17 significant digits, round-trip exact.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comma-separated, LF-terminated, header first.
pub struct CsvTable {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> CliResult<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header.iter().map(|h| h.as_ref())).map_err(csv_err)?;
        Ok(Self { writer })
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> CliResult<()> {
        self.writer.write_record(fields.iter().map(|f| f.as_ref())).map_err(csv_err)
    }

    pub fn finish(self, name: &str) -> CliResult<Artifact> {
        let bytes = self.writer.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        Ok(Artifact { name: name.to_string(), bytes })
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// `prefix_1..prefix_m`.
pub fn numbered(prefix: &str, m: usize) -> Vec<String> {
    (1..=m).map(|j| format!("{prefix}_{j}")).collect()
}

pub fn json_artifact(name: &str, value: &impl Serialize) -> CliResult<Artifact> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(Artifact { name: name.to_string(), bytes })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes to a sibling temp file, then renames over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| CliError::Io(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = res {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::Io(format!("{}: {e}", path.display())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub defaults_version: String,
    pub config: Value,
    pub defaults: Value,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<OutputEntry>,
}

pub fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

/// Writes every artifact and then the manifest listing them.
pub fn persist(cfg: &ExperimentConfig, artifacts: &[Artifact], started_unix_ms: u128) -> CliResult<RunManifest> {
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cfg.out_dir.display())))?;
    let mut outputs = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        write_atomic(&cfg.out_dir.join(&a.name), &a.bytes)?;
        outputs.push(OutputEntry { path: a.name.clone(), bytes: a.bytes.len(), sha256: sha256_hex(&a.bytes) });
    }
    let manifest = RunManifest {
        artifact: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        defaults_version: defaults::VERSION.to_string(),
        config: serde_json::to_value(cfg).map_err(|e| CliError::Io(e.to_string()))?,
        defaults: defaults::table(),
        started_unix_ms,
        finished_unix_ms: unix_ms(),
        outputs,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(&cfg.out_dir.join(MANIFEST_NAME), &bytes)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("manifest {}: {e}", path.display())))
}
