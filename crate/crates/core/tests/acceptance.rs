//! Acceptance criteria C1-C12. Prints one line per criterion and exits
//! nonzero if any fails. Thresholds are fixed; do not loosen them to pass.

use std::process::ExitCode;
use std::time::Instant;

use collusion_audit::accounting::{
    epsilon_audit, joint_epsilon_rdp, joint_epsilon_upper, rdp_to_dp, PolicyParams, RdpState,
};
use collusion_audit::attacks::{
    check_gates, external_vs_same, grid, run_cell, run_sweep, Adversary, ExternalSpec, GridCell, HarnessShape, Mode,
    Pooling, Regime, SweepResult, SweepSpec,
};
use collusion_audit::audit::{
    build_scenario, max_reference_error, planted_violation_detection, run_audit, sample_size, zk_cost, CircuitMode,
    Mutation, ScenarioConfig, Status, VerificationPlan, REFERENCE_DIM, REFERENCE_TOP_K,
};
use collusion_audit::digest::Digest;
use collusion_audit::estimator::{calibrate, CalibrationConfig, Pattern};
use collusion_audit::ledger::{
    consistency_proof, inclusion_proof, leaf_hash, root_of, verify_consistency, verify_inclusion, Claim,
};
use collusion_audit::stats::ks_two_sample;

type Outcome = Result<String, String>;

const SEED: u64 = 42;
const DELTA_ACC: f64 = 1e-6;

fn template(n: u64) -> PolicyParams {
    PolicyParams::calibrated(1.0, DELTA_ACC, n, 1.0, 20, 1e-4, "acceptance").unwrap()
}

fn shape() -> HarnessShape {
    HarnessShape {
        dim: 32,
        n_background: 50,
        top_k: 5,
        delta_gap: 1.0,
    }
}

fn spec(cells: Vec<GridCell>, adversary: Adversary, mode: Mode, n: u64, trials: usize) -> SweepSpec {
    SweepSpec {
        grid: cells,
        adversary,
        regime: Regime::SameTenant,
        mode,
        trials,
        policy_template: template(n),
        shape: shape(),
        master_seed: SEED,
    }
}

fn within(x: f64, target: f64, se: f64, m: f64) -> bool {
    (x - target).abs() <= m * se
}

fn scalar_sweep() -> SweepResult {
    let s = spec(
        grid(&[1, 2, 5, 10, 20], &[1.0, 2.0, 4.0]),
        Adversary::PooledMean,
        Mode::SufficientStat,
        10_000,
        10_000,
    );
    run_sweep(&s).expect("scalar sweep")
}

fn c1() -> Outcome {
    let want = [(10, 1.0, "3.16"), (50, 1.0, "7.07"), (50, 2.0, "14.14"), (100, 1.0, "10.00")];
    let mut got = Vec::new();
    for (k, eps, expect) in want {
        let p = PolicyParams::calibrated(eps, DELTA_ACC, 10_000, 1.0, k, 1e-3, "c1").map_err(|e| e.to_string())?;
        let a = epsilon_audit(&p).map_err(|e| e.to_string())?;
        let s = format!("{:.2}", a.headline);
        if s != expect {
            return Err(format!("k={k} eps={eps}: {s} != {expect}"));
        }
        got.push(s);
    }
    Ok(got.join(", "))
}

fn c2(sweep: &SweepResult) -> Outcome {
    let inside = sweep.cells.iter().filter(|c| c.z_score().unwrap().abs() <= 2.0).count();
    let max_z = sweep.cells.iter().map(|c| c.z_score().unwrap().abs()).fold(0.0, f64::max);
    let targets = [0.061, 0.077, 0.125, 0.192, 0.275];
    let mut adv = Vec::new();
    let mut misses = Vec::new();
    for (c, t) in sweep.cells.iter().filter(|c| c.eps_acc == 4.0).zip(targets) {
        let (a, se) = (c.advantage(), 2.0 * c.delong_se);
        adv.push(format!("{a:.3}"));
        if !within(a, t, se, 2.0) {
            misses.push(format!("k={} adv {a:.4} vs {t} (gap {:.4} > {:.4})", c.k, (a - t).abs(), 2.0 * se));
        }
    }
    let msg = format!("{inside}/15 cells within 2 s.e. (max |z| {max_z:.2}); eps=4 advantages [{}]", adv.join(", "));
    if inside >= 13 && misses.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", misses.join("; ")))
    }
}

fn c3(sweep: &SweepResult) -> Outcome {
    let g = check_gates(sweep).map_err(|e| e.to_string())?;
    let p1 = g.p1;
    let msg = format!("eps={} slope t={:.2}, growth k=1->20 {:.2}", p1.eps_acc, p1.t_stat, p1.growth_factor);
    if p1.eps_acc == 4.0 && p1.t_stat > 2.0 && (3.5..=5.5).contains(&p1.growth_factor) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c4() -> Outcome {
    let cases = [(16.0, 1, 0.598), (16.0, 20, 0.814), (4.0, 20, 0.611)];
    let s = spec(Vec::new(), Adversary::TopkHit, Mode::FullSim, 200, 2000);
    let mut parts = Vec::new();
    let mut ok = true;
    for (eps, k, target) in cases {
        let r = run_cell(&s, GridCell { k, eps_acc: eps }).map_err(|e| e.to_string())?.result;
        let z = (r.auc - target) / r.delong_se;
        ok &= z.abs() <= 3.0;
        parts.push(format!("eps={eps} k={k} auc {:.4} vs {target} (z {z:+.2})", r.auc));
    }
    if ok {
        Ok(parts.join("; "))
    } else {
        Err(parts.join("; "))
    }
}

fn c5() -> Outcome {
    let ks = [1, 2, 5, 10, 20];
    let base = spec(grid(&ks, &[4.0]), Adversary::PooledMean, Mode::SufficientStat, 10_000, 10_000);
    let pooled = run_sweep(&base).map_err(|e| e.to_string())?;
    let bayes = run_sweep(&SweepSpec {
        adversary: Adversary::BayesLr,
        ..base.clone()
    })
    .map_err(|e| e.to_string())?;
    let diff = pooled
        .cells
        .iter()
        .zip(&bayes.cells)
        .map(|(a, b)| (a.auc - b.auc).abs())
        .fold(0.0, f64::max);
    let mut ok = diff <= 1e-4;
    let mut parts = vec![format!("max |bayes - pooled| {diff:.1e}")];
    for (rho, target) in [(0.5, 0.593), (0.25, 0.580)] {
        let r = run_cell(
            &SweepSpec {
                adversary: Adversary::Diversified {
                    rho,
                    pooling: Pooling::TargetOnly,
                },
                ..base.clone()
            },
            GridCell { k: 20, eps_acc: 4.0 },
        )
        .map_err(|e| e.to_string())?
        .result;
        let z = (r.auc - target) / r.delong_se;
        ok &= z.abs() <= 3.0;
        parts.push(format!("rho={rho} auc {:.4} vs {target} (z {z:+.2})", r.auc));
    }
    if ok {
        Ok(parts.join("; "))
    } else {
        Err(parts.join("; "))
    }
}

fn c6() -> Outcome {
    let rows = external_vs_same(&ExternalSpec {
        grid: grid(&[1, 2, 5, 10, 20], &[4.0, 8.0, 16.0]),
        adversary: Adversary::TopkHit,
        trials: 2000,
        policy_template: template(200),
        shape: shape(),
        master_seed: SEED,
        m4_access: true,
    })
    .map_err(|e| e.to_string())?;
    let max = rows.iter().map(|r| r.delta_auc.abs()).fold(0.0, f64::max);
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| r.delta_auc.abs() > 0.022f64.max(2.0 * r.combined_se))
        .map(|r| format!("k={} eps={} delta {:.4}", r.k, r.eps_acc, r.delta_auc))
        .collect();
    let msg = format!("{}/{} cells within tolerance, max |delta auc| {max:.4}", rows.len() - bad.len(), rows.len());
    if bad.is_empty() && rows.len() == 15 {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", bad.join("; ")))
    }
}

fn c7() -> Outcome {
    let cfg = CalibrationConfig::default();
    let r = calibrate(&cfg).map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    for (t, fpr) in r.theta_grid.iter().zip(&r.null_fpr) {
        if *t <= 0.70 + 1e-12 && *fpr != 1.0 {
            problems.push(format!("null fpr {fpr} at theta {t}"));
        }
    }
    let op = r.operating_theta;
    if op != Some(0.80) {
        problems.push(format!("operating theta {op:?}"));
    }
    let theta = op.unwrap_or(0.80);
    let fpr = r.null_fpr_at(theta).unwrap_or(f64::NAN);
    if !(fpr <= 0.05) {
        problems.push(format!("null fpr {fpr} at operating theta"));
    }
    let mut cells = 0;
    for p in Pattern::ALL {
        for &k in &cfg.k_true {
            let c = r.cell(p, k, theta).ok_or(format!("missing cell {} k={k}", p.label()))?;
            cells += 1;
            if c.tpr != 1.0 {
                problems.push(format!("{} k={k} tpr {}", p.label(), c.tpr));
            }
            if c.exact_fraction != 1.0 {
                problems.push(format!(
                    "{} k={k} k_hat exact in {:.1}% of trials (mean k_hat {:.3})",
                    p.label(),
                    100.0 * c.exact_fraction,
                    c.mean_khat
                ));
            }
        }
    }
    let msg = format!("theta* {op:?}, null fpr {fpr:.3}, {cells} pattern cells");
    if problems.is_empty() && cells == 12 {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", problems.join("; ")))
    }
}

fn c8() -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    let mut cells = 0;
    for k in [2u32, 10, 50] {
        for eps in [0.25, 0.5, 1.0] {
            let p = PolicyParams::calibrated(eps, DELTA_ACC, 10_000, 1.0, 10, 1e-3, "c8").map_err(|e| e.to_string())?;
            let ac = joint_epsilon_upper(&p, k, DELTA_ACC).map_err(|e| e.to_string())?;
            let rdp = joint_epsilon_rdp(&p, k, DELTA_ACC).map_err(|e| e.to_string())?;
            let ratio = rdp.residual / ac.residual;
            worst_ratio = worst_ratio.max((ratio - 0.25).abs());
            if (ratio - 0.25).abs() > 1e-12 {
                return Err(format!("k={k} eps={eps}: residual ratio {ratio}"));
            }
            let mut st = RdpState::default();
            st.accumulate_many(1.0, p.sigma, k as u64 * p.n_queries).map_err(|e| e.to_string())?;
            let acct = rdp_to_dp(&st, DELTA_ACC).map_err(|e| e.to_string())?.eps;
            if acct > ac.eps {
                return Err(format!("k={k} eps={eps}: accountant {acct:.4} > closed form {:.4}", ac.eps));
            }
            cells += 1;
        }
    }
    Ok(format!("{cells} cells, residual ratio 1/4 (max deviation {worst_ratio:.1e}), accountant <= closed form"))
}

fn c9() -> Outcome {
    let s = sample_size(0.01, 2f64.powi(-20)).map_err(|e| e.to_string())?;
    let run = planted_violation_detection(100_000, 0.01, 2f64.powi(-20), 1000, SEED).map_err(|e| e.to_string())?;
    let msg = format!("s = {s}; detected {}/{}", run.detected, run.repetitions);
    if s == 1387 && run.detected == 1000 && run.repetitions == 1000 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c10() -> Outcome {
    let mut proofs = 0usize;
    for n in 1..=257usize {
        let leaves: Vec<Digest> = (0..n).map(|i| leaf_hash(format!("c10:{i}").as_bytes())).collect();
        let root = root_of(&leaves);
        for i in 0..n {
            let p = inclusion_proof(&leaves, i).ok_or(format!("no inclusion proof n={n} i={i}"))?;
            if !verify_inclusion(&root, &leaves[i], &p) {
                return Err(format!("inclusion n={n} i={i}"));
            }
            proofs += 1;
        }
        for m in 1..=n {
            let p = consistency_proof(&leaves, m).ok_or(format!("no extension proof {m}->{n}"))?;
            if !verify_consistency(&root_of(&leaves[..m]), &root, &p) {
                return Err(format!("extension {m}->{n}"));
            }
            proofs += 1;
        }
    }
    let cfg = ScenarioConfig::default();
    let honest = build_scenario(&cfg, None).map_err(|e| e.to_string())?;
    let v = run_audit(&honest.request(VerificationPlan::full()).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if !v.passed() {
        return Err(format!("honest window failed {:?}", v.failed_check()));
    }
    let mut names = Vec::new();
    for m in Mutation::ALL {
        let s = build_scenario(&cfg, Some(m)).map_err(|e| e.to_string())?;
        let v = run_audit(&s.request(VerificationPlan::full()).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        if v.status != Status::Fail || v.failed_check() != Some(m.expected_check()) {
            return Err(format!("{}: got {:?}, want {}", m.label(), v.failed_check(), m.expected_check()));
        }
        if m == Mutation::SelectThenNoise && m.expected_check() != Claim::NoiseThenSelect.name() {
            return Err("select-then-noise not attributed to the ordering claim".into());
        }
        names.push(format!("{}->{}", m.label(), m.expected_check()));
    }
    Ok(format!("{proofs} proofs verified; honest PASS; {}", names.join(", ")))
}

fn c11() -> Outcome {
    let err = max_reference_error();
    let e = zk_cost(CircuitMode::Optimized, 100_000, REFERENCE_DIM, REFERENCE_TOP_K).map_err(|e| e.to_string())?;
    let msg = format!(
        "max relative error {:.1}%; optimized N=1e5: {:.2e} constraints, {:.2} s prove",
        100.0 * err,
        e.constraints,
        e.prove_seconds
    );
    let near = |x: f64, t: f64| (x / t - 1.0).abs() <= 0.15;
    if err <= 0.15 && near(e.constraints, 8.8e6) && near(e.prove_seconds, 8.8) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c12() -> Outcome {
    let cell = GridCell { k: 5, eps_acc: 4.0 };
    let full = run_cell(&spec(Vec::new(), Adversary::PooledMean, Mode::FullSim, 200, 2000), cell)
        .map_err(|e| e.to_string())?;
    let suff = run_cell(&spec(Vec::new(), Adversary::PooledMean, Mode::SufficientStat, 200, 2000), cell)
        .map_err(|e| e.to_string())?;
    let (a, b) = (&full.result, &suff.result);
    let combined = (a.delong_se.powi(2) + b.delong_se.powi(2)).sqrt();
    let gap = (a.auc - b.auc).abs();
    let pick = |r: &collusion_audit::attacks::CellRun, world_in: bool| -> Vec<f64> {
        r.outcomes
            .iter()
            .map(|o| if world_in { o.statistic_in } else { o.statistic_out })
            .collect()
    };
    let ks_in = ks_two_sample(&pick(&full, true), &pick(&suff, true)).map_err(|e| e.to_string())?;
    let ks_out = ks_two_sample(&pick(&full, false), &pick(&suff, false)).map_err(|e| e.to_string())?;
    let msg = format!(
        "auc full {:.4} vs sufficient {:.4} (gap {gap:.4}, 2 s.e. {:.4}); KS p in {:.3}, out {:.3}",
        a.auc,
        b.auc,
        2.0 * combined,
        ks_in.p_value,
        ks_out.p_value
    );
    if gap <= 2.0 * combined && ks_in.p_value > 0.01 && ks_out.p_value > 0.01 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('C')).collect();
    let wanted = |id: &str| filter.is_empty() || filter.iter().any(|f| f == id);
    let mut sweep: Option<SweepResult> = None;
    let sweep_for = |s: &mut Option<SweepResult>| -> SweepResult { s.get_or_insert_with(scalar_sweep).clone() };

    let mut failed = 0;
    let mut run = |id: &str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(id) {
            return;
        }
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(m) => println!("{id} PASS: {m} [{secs:.1}s]"),
            Err(m) => {
                failed += 1;
                println!("{id} FAIL: {m} [{secs:.1}s]");
            }
        }
    };
    run("C1", &mut c1);
    run("C2", &mut || c2(&sweep_for(&mut sweep)));
    run("C3", &mut || c3(&sweep_for(&mut sweep)));
    run("C4", &mut c4);
    run("C5", &mut c5);
    run("C6", &mut c6);
    run("C7", &mut c7);
    run("C8", &mut c8);
    run("C9", &mut c9);
    run("C10", &mut c10);
    run("C11", &mut c11);
    run("C12", &mut c12);
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
