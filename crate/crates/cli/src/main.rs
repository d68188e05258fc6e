use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use collusion_cli::{execute, figure_csv, figure_rows, Exit, Figure, Profile, RunError, WORKERS_ENV};

#[derive(Parser)]
#[command(name = "collusion", version, about = "Coalition leakage experiments and retrieval audits")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// JSON file of parameter overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: results/<experiment>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "paper")]
    profile: Profile,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment named by the config file's "experiment" key.
    Run(RunArgs),
    /// Pooled-mean AUC over (k, eps_acc) on the scalar harness, with gates.
    #[command(name = "scalar_sweep", alias = "scalar-sweep")]
    ScalarSweep(RunArgs),
    /// Top-K hit-count AUC over (k, eps_acc) on the simulated index.
    #[command(name = "topk_sweep", alias = "topk-sweep")]
    TopkSweep(RunArgs),
    /// Null false-positive rate and detection of the coalition-size estimator over theta.
    #[command(name = "estimator_calibration", alias = "estimator-calibration")]
    EstimatorCalibration(RunArgs),
    /// Same-tenant against external coalitions with shared index access.
    #[command(name = "external_vs_same", alias = "external-vs-same")]
    ExternalVsSame(RunArgs),
    /// Likelihood-ratio and diversified adversaries against the pooled mean.
    #[command(name = "alt_adversaries", alias = "alt-adversaries")]
    AltAdversaries(RunArgs),
    /// Audit epsilon for a table of (k_max, eps_acc).
    #[command(name = "epsilon_table", alias = "epsilon-table")]
    EpsilonTable(RunArgs),
    /// Constraint, proving and verification cost per index size.
    #[command(name = "cost_table", alias = "cost-table")]
    CostTable(RunArgs),
    /// Simulate one provider window and audit it; exits 1 on FAIL.
    #[command(name = "audit_e2e", alias = "audit-e2e")]
    AuditE2e(RunArgs),
    /// Turn an experiment CSV into plot-ready rows.
    #[command(name = "regen_figure", alias = "regen-figure")]
    RegenFigure {
        #[arg(long, value_enum)]
        figure: Figure,
        #[arg(long)]
        input: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn set_workers() -> Result<(), RunError> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| RunError::Input(format!("{WORKERS_ENV}={v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Input(e.to_string()))?;
    }
    Ok(())
}

fn main_inner(cli: Cli) -> Result<Exit, RunError> {
    set_workers()?;
    let (name, args) = match cli.cmd {
        Cmd::RegenFigure { figure, input, out } => {
            let rows = figure_rows(std::fs::File::open(&input)?, figure)?;
            std::fs::write(&out, figure_csv(&rows)?)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
            return Ok(Exit::Ok);
        }
        Cmd::Run(a) => (None, a),
        Cmd::ScalarSweep(a) => (Some("scalar_sweep"), a),
        Cmd::TopkSweep(a) => (Some("topk_sweep"), a),
        Cmd::EstimatorCalibration(a) => (Some("estimator_calibration"), a),
        Cmd::ExternalVsSame(a) => (Some("external_vs_same"), a),
        Cmd::AltAdversaries(a) => (Some("alt_adversaries"), a),
        Cmd::EpsilonTable(a) => (Some("epsilon_table"), a),
        Cmd::CostTable(a) => (Some("cost_table"), a),
        Cmd::AuditE2e(a) => (Some("audit_e2e"), a),
    };
    let done = execute(name, args.config.as_deref(), args.out.as_deref(), args.seed, args.profile)?;
    println!("{}", serde_json::to_string_pretty(&done.report.summary)?);
    eprintln!("artifacts in {}", done.out_dir.display());
    Ok(done.exit)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(e) => ExitCode::from(e as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Exit::Error as u8)
        }
    }
}
