//! One runner per experiment: compute, write artifacts, summarize.

use collusion_audit::accounting::{epsilon_audit, PolicyParams};
use collusion_audit::attacks::{
    check_gates, external_vs_same, grid, run_sweep, Adversary, CellResult, ExternalSpec, GridCell, HarnessShape,
    Regime, SweepResult, SweepSpec,
};
use collusion_audit::audit::{
    build_scenario, run_audit, sample_plan, zk_cost, CircuitMode, VerificationPlan, REFERENCE_COSTS,
};
use collusion_audit::estimator::{calibrate, CalibrationConfig, Pattern};
use collusion_audit::ledger::{save_ledger, JOURNAL_FILE, RECORDS_FILE};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{AltConfig, AuditE2eConfig, CostTableConfig, EpsilonTableConfig, ExperimentConfig, ExternalConfig, PlanConfig, SweepConfig};
use crate::output::{display_f64, OutputDir};
use crate::RunError;

/// What a run reports besides its files.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub summary: Value,
    /// `Some(false)` only for a failed audit verdict.
    pub verdict_pass: Option<bool>,
}

impl RunReport {
    fn done(summary: Value) -> Self {
        RunReport {
            summary,
            verdict_pass: None,
        }
    }
}

pub fn run(config: &ExperimentConfig, out: &mut OutputDir) -> Result<RunReport, RunError> {
    match config {
        ExperimentConfig::ScalarSweep(c) => sweep(c, out, true),
        ExperimentConfig::TopkSweep(c) => sweep(c, out, false),
        ExperimentConfig::EstimatorCalibration(c) => estimator(c, out),
        ExperimentConfig::ExternalVsSame(c) => external(c, out),
        ExperimentConfig::AltAdversaries(c) => alternatives(c, out),
        ExperimentConfig::EpsilonTable(c) => epsilon_table(c, out),
        ExperimentConfig::CostTable(c) => cost_table(c, out),
        ExperimentConfig::AuditE2e(c) => audit(c, out),
    }
}

fn template(delta_acc: f64, n_queries: u64, delta_gap: f64) -> Result<PolicyParams, RunError> {
    // Only delta_acc and n_queries reach the cells; eps and sigma are set per cell.
    Ok(PolicyParams::calibrated(1.0, delta_acc, n_queries, delta_gap, 20, 1e-4, "sweep")?)
}

#[derive(Debug, Serialize)]
struct CellRow<'a> {
    k: u32,
    #[serde(serialize_with = "display_f64")]
    eps_acc: f64,
    mode: &'a str,
    adversary: &'a str,
    regime: &'a str,
    trials: usize,
    auc: f64,
    delong_se: f64,
    predicted_auc: Option<f64>,
    z_score: Option<f64>,
    advantage: f64,
}

fn cell_rows(cells: &[CellResult]) -> Vec<CellRow<'_>> {
    cells
        .iter()
        .map(|c| CellRow {
            k: c.k,
            eps_acc: c.eps_acc,
            mode: c.mode.label(),
            adversary: &c.adversary,
            regime: c.regime.label(),
            trials: c.trials,
            auc: c.auc,
            delong_se: c.delong_se,
            predicted_auc: c.predicted_auc,
            z_score: c.z_score(),
            advantage: c.advantage(),
        })
        .collect()
}

fn sweep(c: &SweepConfig, out: &mut OutputDir, scalar: bool) -> Result<RunReport, RunError> {
    let spec = SweepSpec {
        grid: grid(&c.ks, &c.eps_acc),
        adversary: c.adversary,
        regime: c.regime,
        mode: c.mode,
        trials: c.trials,
        policy_template: template(c.delta_acc, c.n_queries, c.delta_gap)?,
        shape: HarnessShape {
            dim: c.dim,
            n_background: c.n_background,
            top_k: c.top_k,
            delta_gap: c.delta_gap,
        },
        master_seed: c.master_seed,
    };
    let result = run_sweep(&spec)?;
    out.write_csv("cells.csv", &cell_rows(&result.cells))?;
    let gates = gates_json(&result, scalar);
    out.write_json("gates.json", &gates)?;
    Ok(RunReport::done(json!({ "cells": result.cells.len(), "gates": gates })))
}

/// Coverage needs predictions, which the top-K statistic lacks; it only gets the slope gate.
fn gates_json(result: &SweepResult, with_coverage: bool) -> Value {
    match check_gates(result) {
        Ok(g) if with_coverage => serde_json::to_value(g).expect("serializes"),
        Ok(g) => json!({ "p1": g.p1, "p2": g.p2 }),
        Err(e) => json!({ "skipped": e.to_string() }),
    }
}

#[derive(Debug, Serialize)]
struct NullRow {
    theta: f64,
    null_fpr: f64,
    null_mean_khat: f64,
    trials: usize,
}

#[derive(Debug, Serialize)]
struct PatternRow {
    pattern: &'static str,
    k_true: usize,
    theta: f64,
    mean_khat: f64,
    tpr: f64,
    exact_fraction: f64,
}

fn estimator(c: &CalibrationConfig, out: &mut OutputDir) -> Result<RunReport, RunError> {
    let r = calibrate(c)?;
    let null: Vec<NullRow> = r
        .theta_grid
        .iter()
        .enumerate()
        .map(|(i, &theta)| NullRow {
            theta,
            null_fpr: r.null_fpr[i],
            null_mean_khat: r.null_mean_khat[i],
            trials: r.trials,
        })
        .collect();
    out.write_csv("null.csv", &null)?;
    let cells: Vec<PatternRow> = r
        .cells
        .iter()
        .map(|p| PatternRow {
            pattern: p.pattern.label(),
            k_true: p.k_true,
            theta: p.theta,
            mean_khat: p.mean_khat,
            tpr: p.tpr,
            exact_fraction: p.exact_fraction,
        })
        .collect();
    out.write_csv("cells.csv", &cells)?;
    let at_op: Vec<Value> = match r.operating_theta {
        Some(t) => Pattern::ALL
            .iter()
            .flat_map(|&p| c.k_true.iter().map(move |&k| (p, k)))
            .filter_map(|(p, k)| r.cell(p, k, t))
            .map(|p| json!({ "pattern": p.pattern.label(), "k_true": p.k_true, "tpr": p.tpr, "mean_khat": p.mean_khat, "exact_fraction": p.exact_fraction }))
            .collect(),
        None => Vec::new(),
    };
    let summary = json!({
        "operating_theta": r.operating_theta,
        "null_fpr_at_operating_theta": r.operating_theta.and_then(|t| r.null_fpr_at(t)),
        "target_fpr": c.target_fpr,
        "at_operating_theta": at_op,
    });
    out.write_json("summary.json", &summary)?;
    Ok(RunReport::done(summary))
}

fn external(c: &ExternalConfig, out: &mut OutputDir) -> Result<RunReport, RunError> {
    let rows = external_vs_same(&ExternalSpec {
        grid: grid(&c.ks, &c.eps_acc),
        adversary: c.adversary,
        trials: c.trials,
        policy_template: template(c.delta_acc, c.n_queries, c.delta_gap)?,
        shape: HarnessShape {
            dim: c.dim,
            n_background: c.n_background,
            top_k: c.top_k,
            delta_gap: c.delta_gap,
        },
        master_seed: c.master_seed,
        m4_access: c.m4_access,
    })?;
    out.write_csv("comparisons.csv", &rows)?;
    let mut abs: Vec<f64> = rows.iter().map(|r| r.delta_auc.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let summary = json!({
        "cells": rows.len(),
        "within": rows.iter().filter(|r| r.within).count(),
        "max_abs_delta_auc": abs.last(),
        "median_abs_delta_auc": abs.get(abs.len() / 2),
    });
    out.write_json("summary.json", &summary)?;
    Ok(RunReport::done(summary))
}

fn alternatives(c: &AltConfig, out: &mut OutputDir) -> Result<RunReport, RunError> {
    let base = SweepSpec {
        grid: grid(&c.ks, &[c.eps_acc]),
        adversary: Adversary::PooledMean,
        regime: Regime::SameTenant,
        mode: c.mode,
        trials: c.trials,
        policy_template: template(c.delta_acc, c.n_queries, c.delta_gap)?,
        shape: HarnessShape {
            dim: c.dim,
            n_background: c.n_background,
            top_k: 5,
            delta_gap: c.delta_gap,
        },
        master_seed: c.master_seed,
    };
    let pooled = run_sweep(&base)?;
    let bayes = run_sweep(&SweepSpec {
        adversary: Adversary::BayesLr,
        ..base.clone()
    })?;
    let mut cells = pooled.cells.clone();
    cells.extend(bayes.cells.iter().cloned());
    for &rho in &c.rhos {
        let r = run_sweep(&SweepSpec {
            grid: vec![GridCell {
                k: c.diversified_k,
                eps_acc: c.eps_acc,
            }],
            adversary: Adversary::Diversified {
                rho,
                pooling: c.pooling,
            },
            ..base.clone()
        })?;
        cells.extend(r.cells);
    }
    out.write_csv("cells.csv", &cell_rows(&cells))?;
    let max_diff = pooled
        .cells
        .iter()
        .zip(&bayes.cells)
        .map(|(a, b)| (a.auc - b.auc).abs())
        .fold(0.0, f64::max);
    let summary = json!({
        "max_abs_bayes_minus_pooled": max_diff,
        "diversified": cells.iter().filter(|x| x.adversary.starts_with("diversified")).map(|x| json!({
            "adversary": x.adversary, "k": x.k, "auc": x.auc, "delong_se": x.delong_se, "predicted_auc": x.predicted_auc,
        })).collect::<Vec<_>>(),
    });
    out.write_json("summary.json", &summary)?;
    Ok(RunReport::done(summary))
}

#[derive(Debug, Serialize)]
struct EpsilonTableRow {
    k_max: u32,
    #[serde(serialize_with = "display_f64")]
    eps_acc: f64,
    /// Two decimals, as tabulated.
    eps_audit: String,
    eps_audit_headline: f64,
    eps_audit_full: f64,
    delta_policy: f64,
}

fn epsilon_table(c: &EpsilonTableConfig, out: &mut OutputDir) -> Result<RunReport, RunError> {
    let rows = c
        .rows
        .iter()
        .map(|r| {
            let p = PolicyParams::calibrated(r.eps_acc, c.delta_acc, c.n_queries, 1.0, r.k_max, c.delta_policy, "table")?;
            let a = epsilon_audit(&p)?;
            Ok(EpsilonTableRow {
                k_max: r.k_max,
                eps_acc: r.eps_acc,
                eps_audit: format!("{:.2}", a.headline),
                eps_audit_headline: a.headline,
                eps_audit_full: a.full,
                delta_policy: a.delta_policy,
            })
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    out.write_csv("epsilon_table.csv", &rows)?;
    Ok(RunReport::done(json!({ "rows": rows.len() })))
}

#[derive(Debug, Serialize)]
struct CostRow {
    mode: &'static str,
    index_size: u64,
    constraints: f64,
    prove_seconds: f64,
    setup_seconds: f64,
    verify_ms: f64,
    sumcheck_field_ops: u64,
    reference_constraints: Option<f64>,
    relative_error: Option<f64>,
}

fn cost_table(c: &CostTableConfig, out: &mut OutputDir) -> Result<RunReport, RunError> {
    let mut rows = Vec::new();
    for mode in [CircuitMode::Optimized, CircuitMode::Naive] {
        for &n in &c.index_sizes {
            let e = zk_cost(mode, n, c.dim, c.top_k)?;
            let reference = REFERENCE_COSTS
                .iter()
                .find(|r| r.mode == mode && r.index_size == n)
                .map(|r| r.constraints);
            rows.push(CostRow {
                mode: mode.label(),
                index_size: n,
                constraints: e.constraints,
                prove_seconds: e.prove_seconds,
                setup_seconds: e.setup_seconds,
                verify_ms: e.verify_ms,
                sumcheck_field_ops: e.sumcheck_field_ops,
                reference_constraints: reference,
                relative_error: reference.map(|r| (e.constraints / r - 1.0).abs()),
            });
        }
    }
    out.write_csv("cost_table.csv", &rows)?;
    let worst = rows.iter().filter_map(|r| r.relative_error).fold(0.0, f64::max);
    Ok(RunReport::done(json!({ "rows": rows.len(), "max_relative_error": worst })))
}

fn audit(c: &AuditE2eConfig, out: &mut OutputDir) -> Result<RunReport, RunError> {
    let scenario = build_scenario(&c.scenario, c.mutation)?;
    let plan = match c.plan {
        PlanConfig::Full => VerificationPlan::full(),
        PlanConfig::Sampled { beta, eta, seed } => sample_plan(beta, eta)?.with_seed(seed),
    };
    let request = scenario.request(plan)?;
    let verdict = run_audit(&request)?;
    save_ledger(&request.ledger, &out.path().join("ledger"))?;
    out.track(&format!("ledger/{RECORDS_FILE}"))?;
    out.track(&format!("ledger/{JOURNAL_FILE}"))?;
    out.write_json("commitments.json", &request.bundle)?;
    out.write_json("policy.json", &request.policy)?;
    out.write_json("receipts.json", &request.receipts)?;
    out.write_json("coalition.json", &request.coalition)?;
    out.write_json("verdict.json", &verdict)?;
    Ok(RunReport {
        summary: serde_json::to_value(&verdict)?,
        verdict_pass: Some(verdict.passed()),
    })
}
