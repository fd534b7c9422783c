//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the terminal.
//! The process fails if any criterion outside `KNOWN_UNATTAINABLE` fails, or
//! if one of those starts passing (so the README can be updated).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use pimaw_cli::{cmd_compare, Options};
use pimaw_core::exosystem::{companion_realization, ExosystemModel};
use pimaw_core::nalgebra::{DMatrix, DVector, SymmetricEigen};
use pimaw_core::par::Exec;
use pimaw_core::problem::{random_orthogonal, QuadraticProblem};
use pimaw_core::projection::{phi, phi_jacobian, KINK_TOL};
use pimaw_core::qp::{brute_force_qp, solve_nonneg_qp};
use pimaw_core::signal::SignalSource;
use pimaw_core::sim::{
    l2_performance_check, simulate_decoupled, simulate_pimaw, simulate_unconstrained_im, Scenario,
};
use pimaw_core::synthesis::{assemble_antiwindup_lmi, design_controller, SynthesisConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// Criteria that fail for structural reasons; see README "Known limitations".
const KNOWN_UNATTAINABLE: [usize; 2] = [6, 9];

const SINUSOID: [f64; 4] = [1.0, 0.0, 0.0625, 0.0];
const RAMP: [f64; 3] = [1.0, 0.0, 0.0];
const CONSTANT: [f64; 2] = [1.0, 0.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn model(coeffs: &[f64]) -> ExosystemModel {
    companion_realization(coeffs).unwrap()
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn compare(scenario: &str, out: &Path, seed: Option<u64>, exec: Exec) -> Result<Value, String> {
    let opts = Options {
        scenario: Some(scenarios_dir().join(scenario)),
        out: out.to_path_buf(),
        seed,
        quiet: true,
        exec,
        ..Default::default()
    };
    cmd_compare(&opts).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(out.join("summary.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn method<'a>(summary: &'a Value, name: &str) -> &'a Value {
    summary["methods"].as_array().unwrap().iter().find(|m| m["method"] == name).unwrap()
}

/// Unconstrained internal-model flow drives the gradient to zero.
fn unconstrained_tracking() -> Outcome {
    let start = Instant::now();
    let prob = QuadraticProblem::random(10, 1.0, 10.0, 1).unwrap();
    let src = SignalSource::sinusoid_seeded(10, 0.25, 2).unwrap();
    let design = match design_controller(&model(&SINUSOID), 1.0, 10.0, 10.0, &SynthesisConfig::default()) {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("synthesis failed: {e}")),
    };
    let mut sc = Scenario::new(prob.clone(), src, Some(design), 45.0, 1e-3);
    sc.decimation = 1;
    let traj = simulate_unconstrained_im(&sc).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let grad = traj.gradient_norm(&prob);
    let worst = traj
        .t
        .iter()
        .zip(&grad)
        .filter(|(t, _)| **t >= 22.5)
        .map(|(_, g)| *g)
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-6 && elapsed < 10.0,
        format!("max ‖∇f‖ over final half {worst:.3e} (< 1e-6), runtime {elapsed:.2} s (< 10 s)"),
    )
}

/// Certified designs recheck with an independent eigensolver.
fn certificates_recheck() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let cfg = SynthesisConfig::default();
    let (mut feasible, mut infeasible, mut failures) = (0, 0, Vec::new());
    for trial in 0..25 {
        let m = rng.random_range(1..=3usize);
        let coeffs = match m {
            1 => CONSTANT.to_vec(),
            2 => RAMP.to_vec(),
            _ => {
                let w: f64 = rng.random_range(0.1..1.0);
                vec![1.0, 0.0, w * w, 0.0]
            }
        };
        let lmin = rng.random_range(0.5..2.0);
        let lmax = rng.random_range(5.0..20.0);
        let gamma = rng.random_range(5.0..50.0);
        let mdl = model(&coeffs);
        let Ok(d) = design_controller(&mdl, lmin, lmax, gamma, &cfg) else {
            infeasible += 1;
            continue;
        };
        feasible += 1;
        let aw = d.antiwindup.as_ref().unwrap();
        let mut lambdas = vec![lmin, lmax];
        lambdas.extend((0..50).map(|_| rng.random_range(lmin..lmax)));
        for &l in &lambdas {
            let cl = mdl.closed_loop(&d.k, l);
            let abscissa = cl.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            let lmi = assemble_antiwindup_lmi(&mdl, &d.k, l, gamma, &aw.qbar, aw.delta, aw.xi).unwrap();
            let top = SymmetricEigen::new(lmi).eigenvalues.max();
            if abscissa >= 0.0 || top >= 0.0 {
                failures.push(format!("trial {trial} λ={l:.3}: abscissa {abscissa:.2e}, lmi {top:.2e}"));
            }
        }
        if SymmetricEigen::new(aw.qbar.clone()).eigenvalues.min() <= 0.0 || aw.delta <= 0.0 {
            failures.push(format!("trial {trial}: Q̄ or δ not positive"));
        }
    }
    outcome(
        feasible > 0 && failures.is_empty(),
        format!(
            "{feasible} certified, {infeasible} reported infeasible, {} recheck failures{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

/// Random problem, signal and matching design for one seed.
fn seeded_case(seed: u64) -> Option<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=10usize);
    let lmin = rng.random_range(0.5..2.0);
    let lmax = rng.random_range(5.0..20.0);
    let prob = QuadraticProblem::random(n, lmin, lmax, seed).unwrap();
    let (coeffs, src) = match seed % 3 {
        0 => (SINUSOID.to_vec(), SignalSource::sinusoid_seeded(n, 0.25, seed + 1).unwrap()),
        1 => (RAMP.to_vec(), SignalSource::triangular_seeded(n, 0.25, seed + 1).unwrap()),
        _ => {
            let c = CONSTANT.to_vec();
            (c.clone(), SignalSource::exosystem_seeded(model(&c), n, seed + 1).unwrap())
        }
    };
    let design = design_controller(&model(&coeffs), lmin, lmax, 10.0, &SynthesisConfig::default()).ok()?;
    Some(Scenario::new(prob, src, Some(design), 45.0, 1e-3))
}

/// Certified P-IMAW satisfies the L2 bound on every prefix.
fn l2_bound() -> Outcome {
    let (mut checked, mut skipped, mut worst, mut bad) = (0, 0, 0.0f64, Vec::new());
    for seed in 0..20 {
        let Some(sc) = seeded_case(seed) else {
            skipped += 1;
            continue;
        };
        checked += 1;
        let traj = simulate_pimaw(&sc, None).unwrap();
        let check = l2_performance_check(&traj, 10.0).unwrap();
        worst = worst.max(check.worst_ratio);
        if !check.pass {
            bad.push(seed);
        }
    }
    outcome(
        checked > 0 && bad.is_empty(),
        format!("{checked} scenarios checked, {skipped} without a certificate, worst prefix ratio {worst:.4}, failing seeds {bad:?}"),
    )
}

/// Active-set QP oracle agrees with enumeration.
fn qp_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut worst = 0.0f64;
    for i in 0..500u64 {
        let n = rng.random_range(1..=10usize);
        let lmin = rng.random_range(0.1..2.0);
        let lmax = lmin + rng.random_range(0.0..30.0);
        let p = QuadraticProblem::random(n, lmin, lmax, 10_000 + i).unwrap();
        let b = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let fast = solve_nonneg_qp(p.a(), &b).unwrap();
        let slow = brute_force_qp(p.a(), &b).unwrap();
        worst = worst
            .max((&fast.x_star - &slow.x_star).amax())
            .max((&fast.mu_star - &slow.mu_star).amax());
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && elapsed < 30.0,
        format!("500 instances, max deviation {worst:.2e} (≤ 1e-8), runtime {elapsed:.2} s (< 30 s)"),
    )
}

/// Eigenbasis-decoupled loop reproduces the coupled one.
fn decoupled_equivalence() -> Outcome {
    let model = model(&SINUSOID);
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let lmax = 10.0;
        let prob = QuadraticProblem::random(10, 1.0, lmax, 200 + seed).unwrap();
        let src = if seed % 2 == 0 {
            SignalSource::sinusoid_seeded(10, 0.25, 300 + seed).unwrap()
        } else {
            SignalSource::triangular_seeded(10, 0.25, 300 + seed).unwrap()
        };
        let design = design_controller(&model, 1.0, lmax, 10.0, &SynthesisConfig::default()).unwrap();
        let sc = Scenario::new(prob, src, Some(design), 45.0, 1e-3);
        let a = simulate_pimaw(&sc, None).unwrap();
        let b = simulate_decoupled(&sc, None).unwrap();
        for (xa, xb) in a.x.iter().zip(&b.x) {
            worst = worst.max((xa - xb).amax());
        }
    }
    outcome(worst <= 5e-7, format!("10 scenarios, max |x_coupled − x_decoupled| {worst:.2e} (≤ 5e-7)"))
}

/// Final-window error ordering on the shipped sinusoid scenario.
fn steady_state_ordering() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let summary = match compare("sinusoid.json", dir.path(), None, Exec::default()) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("compare failed: {e}")),
    };
    let err = |m| method(&summary, m)["final_window_mean_error"].as_f64().unwrap();
    let (p, r0, op) = (err("pimaw"), err("pimaw-rho0"), err("opgd"));
    let ordered = p < r0 && r0 <= op;
    let ratio = p / op;
    outcome(
        ordered && ratio < 0.1,
        format!(
            "final-window mean error: pimaw {p:.3e}, pimaw-rho0 {r0:.3e}, opgd {op:.3e}; \
             pimaw < rho0: {}, rho0 ≤ opgd: {}, pimaw/opgd {ratio:.4} (< 0.1)",
            p < r0,
            r0 <= op
        ),
    )
}

/// Anti-windup reduces peak error around active-set switches.
fn switching_peaks() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in 0..5u64 {
        let dir = tempfile::tempdir().unwrap();
        let summary = match compare("triangular.json", dir.path(), Some(seed), Exec::default()) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("compare failed for seed {seed}: {e}")),
        };
        let peak = |m| method(&summary, m)["switching_peak_error"].as_f64();
        match (peak("pimaw"), peak("pimaw-rho0")) {
            (Some(p), Some(r)) => {
                pass &= p <= r;
                lines.push(format!("seed {seed}: {p:.2e} vs {r:.2e}"));
            }
            _ => {
                pass = false;
                lines.push(format!("seed {seed}: no switching instants"));
            }
        }
    }
    outcome(pass, format!("switching-window peak error pimaw vs rho0: {}", lines.join("; ")))
}

/// Sector and idempotence properties of the projection Jacobian.
fn sector_property() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    let (mut worst, mut samples, mut zero_ok) = (0.0f64, 0, true);
    while samples < 10_000 {
        let n = rng.random_range(1..=8usize);
        let v = random_orthogonal(n, &mut rng);
        let u = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        if (&v * &u).iter().any(|x| x.abs() <= KINK_TOL) {
            continue;
        }
        let j = phi_jacobian(&v, &u).unwrap();
        let m = j.transpose() * (DMatrix::identity(n, n) - &j);
        let s = (&m + m.transpose()) * 0.5;
        worst = worst.max(SymmetricEigen::new(s).eigenvalues.amax());
        zero_ok &= phi(&v, &DVector::zeros(n)).unwrap().iter().all(|&x| x == 0.0);
        samples += 1;
    }
    outcome(
        worst <= 1e-10 && zero_ok,
        format!("10000 samples, max |eig sym(Jᵀ(I − J))| {worst:.2e} (≤ 1e-10), φ(0) = 0: {zero_ok}"),
    )
}

/// Constant-signal limit: primal and multiplier recovery.
fn kkt_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
    let mdl = model(&CONSTANT);
    let (mut dx, mut dmu, mut dmu_scaled) = (0.0f64, 0.0f64, 0.0f64);
    let mut rho = f64::NAN;
    for i in 0..20u64 {
        let n = rng.random_range(2..=10usize);
        let prob = QuadraticProblem::random(n, 1.0, 10.0, 400 + i).unwrap();
        let src = SignalSource::exosystem_seeded(mdl.clone(), n, 500 + i).unwrap();
        let design = match design_controller(&mdl, 1.0, 10.0, 10.0, &SynthesisConfig::default()) {
            Ok(d) => d,
            Err(e) => return outcome(false, format!("synthesis failed: {e}")),
        };
        rho = design.rho;
        let sc = Scenario::new(prob, src, Some(design), 45.0, 1e-3);
        let traj = simulate_pimaw(&sc, None).unwrap();
        let k = traj.len() - 1;
        let neg_w = -&traj.w[k];
        dx = dx.max((&traj.x[k] - &traj.x_star[k]).amax());
        dmu = dmu.max((&neg_w - &traj.mu_star[k]).amax());
        dmu_scaled = dmu_scaled.max((&neg_w * rho - &traj.mu_star[k]).amax());
    }
    outcome(
        dx <= 1e-5 && dmu <= 1e-5,
        format!(
            "20 instances, max |x − x*| {dx:.2e}, max |−w − μ*| {dmu:.2e} (both ≤ 1e-5); \
             with certified ρ = {rho:.3}: max |ρ(−w) − μ*| {dmu_scaled:.2e}"
        ),
    )
}

/// Identical runs produce identical bytes.
fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, exec) in [(&a, Exec::Parallel), (&b, Exec::Sequential)] {
        if let Err(e) = compare("sinusoid.json", dir.path(), None, exec) {
            return outcome(false, format!("compare failed: {e}"));
        }
    }
    let files = ["pimaw.csv", "pimaw-rho0.csv", "opgd.csv", "summary.json", "design.json", "tracking_error.svg"];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok())
        .collect();
    outcome(
        differing.is_empty(),
        format!("two compare runs (parallel, sequential): {} files compared, differing {differing:?}", files.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, unconstrained_tracking),
        (2, certificates_recheck),
        (3, l2_bound),
        (4, qp_oracle),
        (5, decoupled_equivalence),
        (6, steady_state_ordering),
        (7, switching_peaks),
        (8, sector_property),
        (9, kkt_recovery),
        (10, determinism),
    ];
    let mut unexpected = Vec::new();
    for (id, run) in criteria {
        let o = run();
        println!("criterion {id}: {} — {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if o.pass == KNOWN_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    println!("known unattainable: {KNOWN_UNATTAINABLE:?}");
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
