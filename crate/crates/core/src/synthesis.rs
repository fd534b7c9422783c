//! Two-step controller synthesis.
//!
//! Step 1 picks the internal-model gain `K` so that `F + λ H K` is Hurwitz
//! for every curvature `λ` in `[λmin, λmax]`. A common Lyapunov matrix
//! `W ≻ 0` and `Z = K W` must satisfy
//!
//! ```text
//! (F W + λ H Z) + (F W + λ H Z)ᵀ + 2 ε W ≺ 0     at λ = λmin and λ = λmax,
//! ```
//!
//! which certifies decay rate `ε` on the whole interval because the
//! expression is affine in `λ`. A second vertex LMI,
//!
//! ```text
//! [ -r W            F W + λ H Z ]
//! [ (F W + λ H Z)ᵀ  -r W        ] ≺ 0,
//! ```
//!
//! keeps every closed-loop pole inside the disk `|s| < r`, which bounds the
//! gain and keeps the loop non-stiff for a fixed-step integrator.
//!
//! Step 2 computes the static anti-windup gain `ρ = ξ/δ` from the vertex
//! quadratic-performance LMIs in `(Q̄, δ, ξ)`.

use nalgebra::{DMatrix, RowDVector};

use crate::design::{AntiWindupSolution, ControllerDesign, DesignCertificate, HurwitzReport, StabilizationDesign};
use crate::error::{Error, Result};
use crate::exosystem::ExosystemModel;
use crate::linalg;
use crate::lmi::{self, FeasibilityStatus, LmiSystem, SolverConfig};

/// Closed-loop eigenvalues must have real part below `-HURWITZ_TOL`.
pub const HURWITZ_TOL: f64 = 1e-8;
/// Decay rates tried, in order, below the requested one.
pub const EPS_RETRIES: [f64; 4] = [0.5, 0.25, 0.1, 0.05];
/// `|ρ|` below this is reported as zero.
pub const RHO_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    pub eps_decay: f64,
    /// Radius of the disk that must contain the step-1 closed-loop poles.
    pub pole_radius: f64,
    /// Norm bound on the step-1 decision vector `(W, Z)`.
    pub stabilization_radius: f64,
    /// Norm bound on the step-2 decision vector `(Q̄, δ, ξ)`.
    pub antiwindup_radius: f64,
    /// Interior curvature samples checked after step 1.
    pub interior_samples: usize,
    pub solver: SolverConfig,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            eps_decay: 0.5,
            pole_radius: 50.0,
            stabilization_radius: 1e2,
            antiwindup_radius: 1e2,
            interior_samples: 20,
            solver: SolverConfig::default(),
        }
    }
}

fn vertices(lambda_min: f64, lambda_max: f64) -> Vec<f64> {
    if lambda_min == lambda_max {
        vec![lambda_min]
    } else {
        vec![lambda_min, lambda_max]
    }
}

fn check_interval(lambda_min: f64, lambda_max: f64) -> Result<()> {
    if !(lambda_min > 0.0 && lambda_min <= lambda_max && lambda_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < lambda_min <= lambda_max < inf, got [{lambda_min}, {lambda_max}]"
        )));
    }
    Ok(())
}

/// `λmin + (λmax - λmin) (i + 1)/(count + 1)` for `i < count`.
pub fn interior_lambdas(lambda_min: f64, lambda_max: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lambda_min + (lambda_max - lambda_min) * (i + 1) as f64 / (count + 1) as f64)
        .collect()
}

/// `(F W + λ H Z) + (·)ᵀ + 2 ε W`.
pub fn stabilization_matrix(model: &ExosystemModel, lambda: f64, eps_decay: f64, w: &DMatrix<f64>, z: &RowDVector<f64>) -> DMatrix<f64> {
    let a = model.f() * w + model.h_col() * z * lambda;
    &a + a.transpose() + w * (2.0 * eps_decay)
}

/// Max real part of the eigenvalues of `F + λ H K` for each `λ`.
pub fn verify_hurwitz(model: &ExosystemModel, k: &RowDVector<f64>, lambdas: &[f64]) -> Result<HurwitzReport> {
    if k.len() != model.order() {
        return Err(Error::Dimension(format!("K has length {}, expected {}", k.len(), model.order())));
    }
    let entries = lambdas
        .iter()
        .map(|&l| linalg::spectral_abscissa(&model.closed_loop(k, l)).map(|a| (l, a)))
        .collect::<Result<Vec<_>>>()?;
    let pass = entries.iter().all(|&(_, a)| a < -HURWITZ_TOL);
    Ok(HurwitzReport { entries, pass })
}

/// Step 1: robust internal-model gain.
pub fn synthesize_k(model: &ExosystemModel, lambda_min: f64, lambda_max: f64, config: &SynthesisConfig) -> Result<StabilizationDesign> {
    check_interval(lambda_min, lambda_max)?;
    if !(config.pole_radius > config.eps_decay) {
        return Err(Error::InvalidArgument(format!(
            "pole radius {} must exceed the decay rate {}",
            config.pole_radius, config.eps_decay
        )));
    }
    if !(config.eps_decay > 0.0) {
        return Err(Error::InvalidArgument(format!("eps_decay must be positive, got {}", config.eps_decay)));
    }
    let mut schedule = vec![config.eps_decay];
    schedule.extend(EPS_RETRIES.iter().copied().filter(|&e| e < config.eps_decay));

    let mut best_margin = f64::INFINITY;
    for &eps in &schedule {
        let (sys, w_id, z_ids) = stabilization_system(model, lambda_min, lambda_max, eps, config);
        let cert = lmi::solve_feasibility(&sys, &config.solver)?;
        if !cert.is_feasible() {
            best_margin = best_margin.min(cert.worst_margin());
            continue;
        }
        let w = cert.point.symmetric(w_id);
        let z = RowDVector::from_iterator(z_ids.len(), z_ids.iter().map(|&id| cert.point.scalar(id)));
        let w_inv = w.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
        let k = &z * &w_inv;

        let mut lambdas = vertices(lambda_min, lambda_max);
        lambdas.extend(interior_lambdas(lambda_min, lambda_max, config.interior_samples));
        let report = verify_hurwitz(model, &k, &lambdas)?;
        if !report.pass {
            let &(lambda, max_real) = report
                .entries
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one vertex");
            return Err(Error::HurwitzVerification { lambda, max_real });
        }
        return Ok(StabilizationDesign { k, eps_decay: eps, w, z, lmi_margins: cert.margins, hurwitz: report });
    }
    Err(Error::StabilizationInfeasible {
        eps_decay: *schedule.last().expect("non-empty schedule"),
        best_margin,
    })
}

/// `[[-r W, A], [Aᵀ, -r W]]` with `A = F W + λ H Z`.
pub fn pole_disk_matrix(model: &ExosystemModel, lambda: f64, radius: f64, w: &DMatrix<f64>, z: &RowDVector<f64>) -> DMatrix<f64> {
    let m = model.order();
    let a = model.f() * w + model.h_col() * z * lambda;
    let mut out = DMatrix::zeros(2 * m, 2 * m);
    out.view_mut((0, 0), (m, m)).copy_from(&(w * -radius));
    out.view_mut((m, m), (m, m)).copy_from(&(w * -radius));
    out.view_mut((0, m), (m, m)).copy_from(&a);
    out.view_mut((m, 0), (m, m)).copy_from(&a.transpose());
    out
}

fn stabilization_system(
    model: &ExosystemModel,
    lambda_min: f64,
    lambda_max: f64,
    eps: f64,
    config: &SynthesisConfig,
) -> (LmiSystem, lmi::VarId, Vec<lmi::VarId>) {
    let m = model.order();
    let mut sys = LmiSystem::new(config.stabilization_radius);
    let w_id = sys.add_symmetric("W", m);
    let z_ids: Vec<_> = (0..m).map(|i| sys.add_scalar(&format!("Z{i}"))).collect();
    let z_of = |p: &lmi::Assignment| RowDVector::from_iterator(m, z_ids.iter().map(|&id| p.scalar(id)));
    for lambda in vertices(lambda_min, lambda_max) {
        sys.add_affine(&format!("decay@{lambda}"), |p| {
            stabilization_matrix(model, lambda, eps, &p.symmetric(w_id), &z_of(p))
        });
        sys.add_affine(&format!("disk@{lambda}"), |p| {
            pole_disk_matrix(model, lambda, config.pole_radius, &p.symmetric(w_id), &z_of(p))
        });
    }
    sys.add_affine("W>0", |p| -p.symmetric(w_id));
    sys.add_affine("W<I", |p| p.symmetric(w_id) - DMatrix::identity(m, m));
    (sys, w_id, z_ids)
}

/// The `(m+3)×(m+3)` quadratic-performance matrix at curvature `λ`, with
/// `F(λ) = F + λ H K`:
///
/// ```text
/// [ Q̄F(λ)ᵀ+F(λ)Q̄   H(ξ-δλ)+Q̄Kᵀ   H    Q̄Kᵀλ    ]
/// [      *            -2δ          0    δ(1-λ)  ]
/// [      *             *          -γ    1       ]
/// [      *             *           *   -γ       ]
/// ```
pub fn assemble_antiwindup_lmi(
    model: &ExosystemModel,
    k: &RowDVector<f64>,
    lambda: f64,
    gamma: f64,
    qbar: &DMatrix<f64>,
    delta: f64,
    xi: f64,
) -> Result<DMatrix<f64>> {
    let m = model.order();
    if k.len() != m || qbar.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "expected K of length {m} and Q of size {m}x{m}, got {} and {:?}",
            k.len(),
            qbar.shape()
        )));
    }
    let h = model.h_col();
    let fl = model.closed_loop(k, lambda);
    let qk = qbar * k.transpose();

    let mut out = DMatrix::<f64>::zeros(m + 3, m + 3);
    let top = qbar * fl.transpose() + &fl * qbar;
    out.view_mut((0, 0), (m, m)).copy_from(&top);
    let c12 = h * (xi - delta * lambda) + &qk;
    let c13 = h.clone();
    let c14 = &qk * lambda;
    for (col, block) in [(m, &c12), (m + 1, &c13), (m + 2, &c14)] {
        out.view_mut((0, col), (m, 1)).copy_from(block);
        out.view_mut((col, 0), (1, m)).copy_from(&block.transpose());
    }
    out[(m, m)] = -2.0 * delta;
    out[(m, m + 2)] = delta * (1.0 - lambda);
    out[(m + 2, m)] = delta * (1.0 - lambda);
    out[(m + 1, m + 1)] = -gamma;
    out[(m + 1, m + 2)] = 1.0;
    out[(m + 2, m + 1)] = 1.0;
    out[(m + 2, m + 2)] = -gamma;
    Ok(out)
}

/// Step 2: anti-windup gain at performance level `gamma`.
pub fn solve_antiwindup(
    model: &ExosystemModel,
    k: &RowDVector<f64>,
    lambda_min: f64,
    lambda_max: f64,
    gamma: f64,
    config: &SynthesisConfig,
) -> Result<AntiWindupSolution> {
    check_interval(lambda_min, lambda_max)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let m = model.order();
    if k.len() != m {
        return Err(Error::Dimension(format!("K has length {}, expected {m}", k.len())));
    }
    let mut sys = LmiSystem::new(config.antiwindup_radius);
    let q_id = sys.add_symmetric("Q", m);
    let d_id = sys.add_scalar("delta");
    let x_id = sys.add_scalar("xi");
    for lambda in vertices(lambda_min, lambda_max) {
        sys.add_affine(&format!("performance@{lambda}"), |p| {
            assemble_antiwindup_lmi(model, k, lambda, gamma, &p.symmetric(q_id), p.scalar(d_id), p.scalar(x_id))
                .expect("dimensions checked above")
        });
    }
    sys.add_affine("Q>0", |p| -p.symmetric(q_id));
    sys.add_affine("delta>0", |p| DMatrix::from_element(1, 1, -p.scalar(d_id)));

    let cert = lmi::solve_feasibility(&sys, &config.solver)?;
    match cert.status {
        FeasibilityStatus::Feasible => {}
        FeasibilityStatus::Infeasible { best_margin } => {
            return Err(Error::AntiWindupInfeasible { gamma, best_margin });
        }
        FeasibilityStatus::Stalled { last_shift } => {
            return Err(Error::SolverStalled { iterations: cert.iterations, last_shift });
        }
    }
    let qbar = cert.point.symmetric(q_id);
    let delta = cert.point.scalar(d_id);
    let xi = cert.point.scalar(x_id);

    // Re-verify from the assembled matrices only.
    let tol = config.solver.tol_feas;
    let vertex_max_eig = [lambda_min, lambda_max]
        .iter()
        .map(|&l| linalg::eig_max_symmetric(&assemble_antiwindup_lmi(model, k, l, gamma, &qbar, delta, xi)?))
        .collect::<Result<Vec<_>>>()?;
    let q_min_eig = linalg::symmetric_eigenvalues(&qbar)?[0];
    let worst = vertex_max_eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if worst >= -tol || q_min_eig < tol || delta < tol {
        return Err(Error::AntiWindupInfeasible { gamma, best_margin: worst.max(-q_min_eig).max(-delta) });
    }

    let ratio = xi / delta;
    let rho_near_zero = ratio.abs() < RHO_ZERO_TOL;
    let rho = if rho_near_zero { 0.0 } else { ratio };
    Ok(AntiWindupSolution {
        gamma,
        qbar,
        delta,
        xi,
        rho,
        rho_near_zero,
        vertex_max_eig: [vertex_max_eig[0], vertex_max_eig[1]],
        q_min_eig,
        solver_margins: cert.margins,
        solver_iterations: cert.iterations,
    })
}

/// Smallest certifiable `γ` by bisection on a log scale.
///
/// Returns `(γ*, solution at γ*)`, with `γ*·(1 - tol_gamma)` infeasible or
/// `γ*` at the lower bracket.
pub fn minimize_gamma(
    model: &ExosystemModel,
    k: &RowDVector<f64>,
    lambda_min: f64,
    lambda_max: f64,
    gamma_hi: f64,
    tol_gamma: f64,
    config: &SynthesisConfig,
) -> Result<(f64, AntiWindupSolution)> {
    if !(tol_gamma > 0.0 && tol_gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("tol_gamma must be in (0, 1), got {tol_gamma}")));
    }
    let mut best = solve_antiwindup(model, k, lambda_min, lambda_max, gamma_hi, config)?;
    let mut hi = gamma_hi;
    // The [[-γ, 1], [1, -γ]] block alone forces γ > 1.
    let mut lo = 1.0f64.min(gamma_hi);
    while hi * (1.0 - tol_gamma) > lo {
        let mid = (lo * hi).sqrt();
        match solve_antiwindup(model, k, lambda_min, lambda_max, mid, config) {
            Ok(sol) => {
                hi = mid;
                best = sol;
            }
            Err(Error::AntiWindupInfeasible { .. } | Error::SolverStalled { .. }) => lo = mid,
            Err(e) => return Err(e),
        }
    }
    Ok((hi, best))
}

/// Steps 1 and 2 together.
pub fn design_controller(
    model: &ExosystemModel,
    lambda_min: f64,
    lambda_max: f64,
    gamma: f64,
    config: &SynthesisConfig,
) -> Result<ControllerDesign> {
    let step1 = synthesize_k(model, lambda_min, lambda_max, config)?;
    let step2 = solve_antiwindup(model, &step1.k, lambda_min, lambda_max, gamma, config)?;
    Ok(ControllerDesign {
        model: model.clone(),
        k: step1.k.clone(),
        rho: step2.rho,
        gamma,
        lambda_min,
        lambda_max,
        cert: DesignCertificate::from_steps(&step1, &step2),
        antiwindup: Some(step2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exosystem::companion_realization;

    fn cfg() -> SynthesisConfig {
        SynthesisConfig::default()
    }

    #[test]
    fn first_order_gain_is_negative() {
        let model = companion_realization(&[1.0, 0.0]).unwrap();
        let d = synthesize_k(&model, 1.0, 10.0, &cfg()).unwrap();
        assert!(d.k[0] < 0.0);
    }

    #[test]
    fn double_integrator_gains_negative() {
        let model = companion_realization(&[1.0, 0.0, 0.0]).unwrap();
        let d = synthesize_k(&model, 1.0, 10.0, &cfg()).unwrap();
        assert!(d.k[0] < 0.0 && d.k[1] < 0.0, "{}", d.k);
    }

    #[test]
    fn single_vertex_decay() {
        let model = companion_realization(&[1.0, 0.0, 0.0]).unwrap();
        let d = synthesize_k(&model, 1.0, 1.0, &cfg()).unwrap();
        let a = linalg::spectral_abscissa(&model.closed_loop(&d.k, 1.0)).unwrap();
        assert!(a <= -d.eps_decay + 1e-9, "abscissa {a}");
    }

    #[test]
    fn hurwitz_examples() {
        let model = companion_realization(&[1.0, 0.0, 0.0]).unwrap();
        let good = verify_hurwitz(&model, &RowDVector::from_vec(vec![-1.0, -2.0]), &[1.0]).unwrap();
        assert!(good.pass);
        let bad = verify_hurwitz(&model, &RowDVector::from_vec(vec![1.0, -2.0]), &[1.0]).unwrap();
        assert!(!bad.pass);
    }

    #[test]
    fn antiwindup_matrix_first_order_layout() {
        let model = companion_realization(&[1.0, 0.0]).unwrap();
        let (k, l, g, q, d, x) = (-1.5, 3.0, 10.0, 0.7, 0.4, 0.9);
        let mat = assemble_antiwindup_lmi(&model, &RowDVector::from_element(1, k), l, g, &DMatrix::from_element(1, 1, q), d, x).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                2.0 * q * l * k, (x - d * l) + q * k, 1.0, q * k * l,
                (x - d * l) + q * k, -2.0 * d, 0.0, d * (1.0 - l),
                1.0, 0.0, -g, 1.0,
                q * k * l, d * (1.0 - l), 1.0, -g,
            ],
        );
        assert!((mat - expected).amax() < 1e-14);
    }

    #[test]
    fn absurd_gamma_is_infeasible() {
        let model = companion_realization(&[1.0, 0.0, 0.0]).unwrap();
        let d = synthesize_k(&model, 1.0, 10.0, &cfg()).unwrap();
        let r = solve_antiwindup(&model, &d.k, 1.0, 10.0, 1e-6, &cfg());
        assert!(matches!(r, Err(Error::AntiWindupInfeasible { .. })), "{r:?}");
    }
}
