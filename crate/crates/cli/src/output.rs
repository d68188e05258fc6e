//! Output directory bookkeeping and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Profile};
use crate::RunError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

/// Writes artifacts under one directory and remembers their hashes.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir {
            dir: dir.to_owned(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.push(FileEntry {
            name: name.into(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    /// Record a file some other writer already produced.
    pub fn track(&mut self, name: &str) -> Result<(), RunError> {
        let bytes = fs::read(self.dir.join(name))?;
        self.files.push(FileEntry {
            name: name.into(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), RunError> {
        self.write_bytes(name, &csv_bytes(rows)?)
    }
}

/// Serialize a float with `Display`, so grid values print as `4` rather than `4.0`.
pub fn display_f64<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| RunError::Io(e.into_error()))
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub experiment: &'a str,
    pub profile: Profile,
    pub master_seed: Option<u64>,
    pub config_digest: String,
    pub config: &'a ExperimentConfig,
    pub versions: Versions,
    pub workers: usize,
    pub files: &'a [FileEntry],
    /// Seconds since the Unix epoch; the only field that varies between identical runs.
    pub created_unix: u64,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    #[serde(rename = "collusion-audit")]
    pub core: &'static str,
    #[serde(rename = "collusion-cli")]
    pub cli: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            core: collusion_audit::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
        }
    }
}
