//! Strict experiment configuration with per-profile defaults.

use std::path::PathBuf;

use collusion_audit::attacks::{Adversary, Mode, Pooling, Regime};
use collusion_audit::audit::{Mutation, ScenarioConfig};
use collusion_audit::estimator::CalibrationConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("config field error: {0}")]
    Field(String),
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
    #[error("config names experiment {found:?} but {expected:?} was requested")]
    Mismatch { expected: String, found: String },
    #[error("config must name an experiment")]
    MissingExperiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Full-size runs.
    Paper,
    /// CI-sized runs.
    Smoke,
}

pub const EXPERIMENTS: [&str; 8] = [
    "scalar_sweep",
    "topk_sweep",
    "estimator_calibration",
    "external_vs_same",
    "alt_adversaries",
    "epsilon_table",
    "cost_table",
    "audit_e2e",
];

/// A `(k, eps_acc)` sweep over the paired-worlds harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub ks: Vec<u32>,
    pub eps_acc: Vec<f64>,
    pub n_queries: u64,
    pub trials: usize,
    pub delta_acc: f64,
    pub mode: Mode,
    pub adversary: Adversary,
    pub regime: Regime,
    pub dim: usize,
    pub n_background: usize,
    pub top_k: usize,
    pub delta_gap: f64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    pub ks: Vec<u32>,
    pub eps_acc: Vec<f64>,
    pub n_queries: u64,
    pub trials: usize,
    pub delta_acc: f64,
    pub adversary: Adversary,
    /// External accounts can read the victim index.
    pub m4_access: bool,
    pub dim: usize,
    pub n_background: usize,
    pub top_k: usize,
    pub delta_gap: f64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AltConfig {
    pub ks: Vec<u32>,
    pub eps_acc: f64,
    pub n_queries: u64,
    pub trials: usize,
    pub delta_acc: f64,
    pub mode: Mode,
    /// Fractions of the coalition probing the target.
    pub rhos: Vec<f64>,
    pub diversified_k: u32,
    pub pooling: Pooling,
    pub dim: usize,
    pub n_background: usize,
    pub delta_gap: f64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonRow {
    pub k_max: u32,
    pub eps_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonTableConfig {
    pub rows: Vec<EpsilonRow>,
    pub delta_acc: f64,
    /// Must exceed `k_max * delta_acc` for every row.
    pub delta_policy: f64,
    pub n_queries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostTableConfig {
    pub index_sizes: Vec<u64>,
    pub dim: usize,
    pub top_k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanConfig {
    Full,
    Sampled {
        beta: f64,
        eta: f64,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditE2eConfig {
    pub scenario: ScenarioConfig,
    pub plan: PlanConfig,
    /// Tamper with the window before auditing.
    pub mutation: Option<Mutation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    ScalarSweep(SweepConfig),
    TopkSweep(SweepConfig),
    EstimatorCalibration(CalibrationConfig),
    ExternalVsSame(ExternalConfig),
    AltAdversaries(AltConfig),
    EpsilonTable(EpsilonTableConfig),
    CostTable(CostTableConfig),
    AuditE2e(AuditE2eConfig),
}

const SCALAR_KS: [u32; 5] = [1, 2, 5, 10, 20];

fn scalar_sweep(profile: Profile) -> SweepConfig {
    SweepConfig {
        ks: SCALAR_KS.to_vec(),
        eps_acc: vec![1.0, 2.0, 4.0],
        n_queries: 10_000,
        trials: match profile {
            Profile::Paper => 10_000,
            Profile::Smoke => 100,
        },
        delta_acc: 1e-6,
        mode: Mode::SufficientStat,
        adversary: Adversary::PooledMean,
        regime: Regime::SameTenant,
        dim: 32,
        n_background: 50,
        top_k: 5,
        delta_gap: 1.0,
        master_seed: 42,
    }
}

fn topk_sweep(profile: Profile) -> SweepConfig {
    let base = SweepConfig {
        eps_acc: vec![4.0, 8.0, 16.0],
        n_queries: 200,
        trials: 2000,
        mode: Mode::FullSim,
        adversary: Adversary::TopkHit,
        ..scalar_sweep(profile)
    };
    match profile {
        Profile::Paper => base,
        Profile::Smoke => SweepConfig {
            ks: vec![1, 5, 20],
            eps_acc: vec![16.0],
            n_queries: 50,
            trials: 100,
            ..base
        },
    }
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::ScalarSweep(_) => "scalar_sweep",
            ExperimentConfig::TopkSweep(_) => "topk_sweep",
            ExperimentConfig::EstimatorCalibration(_) => "estimator_calibration",
            ExperimentConfig::ExternalVsSame(_) => "external_vs_same",
            ExperimentConfig::AltAdversaries(_) => "alt_adversaries",
            ExperimentConfig::EpsilonTable(_) => "epsilon_table",
            ExperimentConfig::CostTable(_) => "cost_table",
            ExperimentConfig::AuditE2e(_) => "audit_e2e",
        }
    }

    pub fn defaults(name: &str, profile: Profile) -> Result<Self, ConfigError> {
        let smoke = profile == Profile::Smoke;
        Ok(match name {
            "scalar_sweep" => ExperimentConfig::ScalarSweep(scalar_sweep(profile)),
            "topk_sweep" => ExperimentConfig::TopkSweep(topk_sweep(profile)),
            "estimator_calibration" => ExperimentConfig::EstimatorCalibration(CalibrationConfig {
                trials: if smoke { 20 } else { 200 },
                ..CalibrationConfig::default()
            }),
            "external_vs_same" => {
                let t = topk_sweep(profile);
                ExperimentConfig::ExternalVsSame(ExternalConfig {
                    ks: t.ks,
                    eps_acc: t.eps_acc,
                    n_queries: t.n_queries,
                    trials: t.trials,
                    delta_acc: t.delta_acc,
                    adversary: Adversary::TopkHit,
                    m4_access: true,
                    dim: t.dim,
                    n_background: t.n_background,
                    top_k: t.top_k,
                    delta_gap: t.delta_gap,
                    master_seed: t.master_seed,
                })
            }
            "alt_adversaries" => ExperimentConfig::AltAdversaries(AltConfig {
                ks: SCALAR_KS.to_vec(),
                eps_acc: 4.0,
                n_queries: 10_000,
                trials: if smoke { 200 } else { 10_000 },
                delta_acc: 1e-6,
                mode: Mode::SufficientStat,
                rhos: vec![0.5, 0.25],
                diversified_k: 20,
                pooling: Pooling::TargetOnly,
                dim: 32,
                n_background: 50,
                delta_gap: 1.0,
                master_seed: 42,
            }),
            "epsilon_table" => ExperimentConfig::EpsilonTable(EpsilonTableConfig {
                rows: [(10, 1.0), (50, 1.0), (50, 2.0), (100, 1.0)]
                    .into_iter()
                    .map(|(k_max, eps_acc)| EpsilonRow { k_max, eps_acc })
                    .collect(),
                delta_acc: 1e-6,
                delta_policy: 1e-3,
                n_queries: 10_000,
            }),
            "cost_table" => ExperimentConfig::CostTable(CostTableConfig {
                index_sizes: vec![1_000, 10_000, 100_000, 1_000_000],
                dim: 384,
                top_k: 5,
            }),
            "audit_e2e" => ExperimentConfig::AuditE2e(AuditE2eConfig {
                scenario: ScenarioConfig::default(),
                plan: PlanConfig::Full,
                mutation: None,
            }),
            other => return Err(ConfigError::UnknownExperiment(other.into())),
        })
    }

    /// Replace the master seed, wherever this experiment keeps it.
    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ExperimentConfig::ScalarSweep(c) | ExperimentConfig::TopkSweep(c) => c.master_seed = seed,
            ExperimentConfig::EstimatorCalibration(c) => c.master_seed = seed,
            ExperimentConfig::ExternalVsSame(c) => c.master_seed = seed,
            ExperimentConfig::AltAdversaries(c) => c.master_seed = seed,
            ExperimentConfig::AuditE2e(c) => c.scenario.seed = seed,
            ExperimentConfig::EpsilonTable(_) | ExperimentConfig::CostTable(_) => {}
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ExperimentConfig::ScalarSweep(c) | ExperimentConfig::TopkSweep(c) => Some(c.master_seed),
            ExperimentConfig::EstimatorCalibration(c) => Some(c.master_seed),
            ExperimentConfig::ExternalVsSame(c) => Some(c.master_seed),
            ExperimentConfig::AltAdversaries(c) => Some(c.master_seed),
            ExperimentConfig::AuditE2e(c) => Some(c.scenario.seed),
            ExperimentConfig::EpsilonTable(_) | ExperimentConfig::CostTable(_) => None,
        }
    }

    /// SHA-256 over the resolved configuration's JSON.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

/// Parsed configuration plus the output directory it may name.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub out: Option<PathBuf>,
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Build a configuration from profile defaults and an optional JSON override file.
///
/// `requested` is the experiment named on the command line; when absent the file
/// must name one. Keys not known to the experiment are rejected.
pub fn resolve(
    requested: Option<&str>,
    text: Option<&str>,
    profile: Profile,
    seed: Option<u64>,
) -> Result<Resolved, ConfigError> {
    let mut over = match text {
        Some(t) => match serde_json::from_str::<Value>(t) {
            Ok(Value::Object(m)) => m,
            Ok(_) => return Err(ConfigError::Field("top level must be a JSON object".into())),
            Err(e) => {
                return Err(ConfigError::Syntax {
                    line: e.line(),
                    column: e.column(),
                    message: e.to_string(),
                })
            }
        },
        None => Map::new(),
    };
    let named = match over.remove("experiment") {
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(ConfigError::Field("experiment must be a string".into())),
        None => None,
    };
    let out = match over.remove("out") {
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => return Err(ConfigError::Field("out must be a string".into())),
        None => None,
    };
    let name = match (requested, named.as_deref()) {
        (Some(r), Some(n)) if r != n => {
            return Err(ConfigError::Mismatch {
                expected: r.into(),
                found: n.into(),
            })
        }
        (Some(r), _) => r.to_owned(),
        (None, Some(n)) => n.to_owned(),
        (None, None) => return Err(ConfigError::MissingExperiment),
    };
    let mut base = serde_json::to_value(ExperimentConfig::defaults(&name, profile)?).expect("defaults serialize");
    merge(&mut base, Value::Object(over));
    let mut config: ExperimentConfig =
        serde_json::from_value(base).map_err(|e| ConfigError::Field(e.to_string()))?;
    if let Some(s) = seed {
        config.set_seed(s);
    }
    Ok(Resolved { config, out })
}
