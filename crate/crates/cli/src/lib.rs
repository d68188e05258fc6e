//! Configuration-driven experiment runner behind the `collusion` binary.

pub mod config;
pub mod experiments;
pub mod figures;
pub mod output;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{resolve, ConfigError, ExperimentConfig, Profile, Resolved, EXPERIMENTS};
pub use experiments::{run, RunReport};
pub use figures::{figure_csv, figure_rows, Figure, FigureRow};
pub use output::{Manifest, OutputDir, Versions};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "COLLUSION_WORKERS";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] collusion_audit::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid input: {0}")]
    Input(String),
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    /// Completed; an audit, if any, passed.
    Ok = 0,
    /// An audit verdict was FAIL.
    AuditFail = 1,
    /// Bad configuration, bad input, or a protocol error.
    Error = 2,
}

/// Outcome of [`execute`].
#[derive(Debug)]
pub struct Executed {
    pub out_dir: PathBuf,
    pub report: RunReport,
    pub exit: Exit,
}

/// Resolve, run, and write artifacts plus `manifest.json`.
pub fn execute(
    requested: Option<&str>,
    config_path: Option<&Path>,
    out: Option<&Path>,
    seed: Option<u64>,
    profile: Profile,
) -> Result<Executed, RunError> {
    let text = config_path.map(std::fs::read_to_string).transpose()?;
    let resolved = resolve(requested, text.as_deref(), profile, seed)?;
    let name = resolved.config.name();
    let out_dir = out
        .map(Path::to_path_buf)
        .or(resolved.out)
        .unwrap_or_else(|| PathBuf::from("results").join(name));
    let mut dir = OutputDir::create(&out_dir)?;
    let report = run(&resolved.config, &mut dir)?;
    let files = dir.files().to_vec();
    let manifest = Manifest {
        experiment: name,
        profile,
        master_seed: resolved.config.seed(),
        config_digest: resolved.config.digest(),
        config: &resolved.config,
        versions: Versions::current(),
        workers: rayon::current_num_threads(),
        files: &files,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    dir.write_json("manifest.json", &manifest)?;
    let exit = match report.verdict_pass {
        Some(false) => Exit::AuditFail,
        _ => Exit::Ok,
    };
    Ok(Executed { out_dir, report, exit })
}
