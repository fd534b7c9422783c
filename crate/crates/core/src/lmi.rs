//! Dense feasibility solver for affine linear matrix inequalities.
//!
//! A system is a list of constraints `M_k(v) = C_k + Σ_j v_j A_kj ≺ 0` over a
//! vector `v` of scalar unknowns, where symmetric-matrix variables are
//! flattened into their upper-triangular entries. The decision vector is
//! confined to a Euclidean ball of radius `radius`, which keeps homogeneous
//! systems bounded.
//!
//! Solving runs in two phases:
//!
//! 1. A shift variable `s` is added and `t·s - Σ log det(sI - M_k(v)) -
//!    log(R² - |v|²)` is minimized along an increasing `t` path with damped
//!    Newton steps, until `s < 0` (strictly feasible) or the duality-gap bound
//!    shows the best achievable shift is above `-tol_feas`.
//! 2. From the strictly feasible point, the analytic center of
//!    `{M_k(v) ≺ 0} ∩ ball` is computed by damped Newton.
//!
//! The returned margins are always recomputed from the assembled matrices
//! with the symmetric eigensolver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableKind {
    Scalar,
    Symmetric(usize),
}

impl VariableKind {
    fn entries(self) -> usize {
        match self {
            VariableKind::Scalar => 1,
            VariableKind::Symmetric(m) => m * (m + 1) / 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VariableKind,
    offset: usize,
}

/// Handle returned when a variable is declared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

/// `constant + Σ_j v_j coeffs[j]`, demanded negative definite.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraint {
    pub name: String,
    pub constant: DMatrix<f64>,
    pub coeffs: Vec<DMatrix<f64>>,
}

impl AffineConstraint {
    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    pub fn evaluate(&self, values: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (c, &v) in self.coeffs.iter().zip(values) {
            if v != 0.0 {
                out += c * v;
            }
        }
        out
    }
}

/// A point in decision space.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    variables: Vec<Variable>,
    values: Vec<f64>,
}

impl Assignment {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scalar(&self, id: VarId) -> f64 {
        let var = &self.variables[id.0];
        assert_eq!(var.kind, VariableKind::Scalar, "{} is not scalar", var.name);
        self.values[var.offset]
    }

    pub fn symmetric(&self, id: VarId) -> DMatrix<f64> {
        let var = &self.variables[id.0];
        let VariableKind::Symmetric(m) = var.kind else {
            panic!("{} is not a symmetric matrix variable", var.name);
        };
        let mut out = DMatrix::zeros(m, m);
        let mut idx = var.offset;
        for i in 0..m {
            for j in i..m {
                out[(i, j)] = self.values[idx];
                out[(j, i)] = self.values[idx];
                idx += 1;
            }
        }
        out
    }
}

/// A set of affine LMIs in mixed scalar and symmetric-matrix unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiSystem {
    variables: Vec<Variable>,
    constraints: Vec<AffineConstraint>,
    dim: usize,
    radius: f64,
}

impl LmiSystem {
    /// Empty system whose decision vector is confined to `|v| < radius`.
    pub fn new(radius: f64) -> Self {
        Self { variables: Vec::new(), constraints: Vec::new(), dim: 0, radius }
    }

    pub fn add_scalar(&mut self, name: &str) -> VarId {
        self.add_variable(name, VariableKind::Scalar)
    }

    pub fn add_symmetric(&mut self, name: &str, m: usize) -> VarId {
        self.add_variable(name, VariableKind::Symmetric(m))
    }

    fn add_variable(&mut self, name: &str, kind: VariableKind) -> VarId {
        self.variables.push(Variable { name: name.to_string(), kind, offset: self.dim });
        self.dim += kind.entries();
        VarId(self.variables.len() - 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[AffineConstraint] {
        &self.constraints
    }

    pub fn assignment(&self, values: Vec<f64>) -> Assignment {
        assert_eq!(values.len(), self.dim);
        Assignment { variables: self.variables.clone(), values }
    }

    /// Adds a constraint given directly in coefficient form.
    pub fn add_constraint(&mut self, constraint: AffineConstraint) {
        self.constraints.push(constraint);
    }

    /// Adds `map(v) ≺ 0` for an affine `map`, extracting its coefficients by
    /// evaluation at the origin and at each basis direction.
    pub fn add_affine<F>(&mut self, name: &str, map: F)
    where
        F: Fn(&Assignment) -> DMatrix<f64>,
    {
        let zero = self.assignment(vec![0.0; self.dim]);
        let constant = map(&zero);
        let coeffs = (0..self.dim)
            .map(|j| {
                let mut e = vec![0.0; self.dim];
                e[j] = 1.0;
                map(&self.assignment(e)) - &constant
            })
            .collect();
        self.constraints.push(AffineConstraint { name: name.to_string(), constant, coeffs });
    }

    /// Structural checks performed before any iteration.
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::MalformedLmi(format!("radius must be positive, got {}", self.radius)));
        }
        if self.constraints.is_empty() {
            return Err(Error::MalformedLmi("no constraints".into()));
        }
        for c in &self.constraints {
            let n = c.constant.nrows();
            if !c.constant.is_square() || n == 0 {
                return Err(Error::MalformedLmi(format!("constraint {} is not square", c.name)));
            }
            if c.coeffs.len() != self.dim {
                return Err(Error::MalformedLmi(format!(
                    "constraint {} has {} coefficient blocks, expected {}",
                    c.name,
                    c.coeffs.len(),
                    self.dim
                )));
            }
            for block in std::iter::once(&c.constant).chain(&c.coeffs) {
                if block.shape() != (n, n) {
                    return Err(Error::MalformedLmi(format!("constraint {} mixes block sizes", c.name)));
                }
                if !block.iter().all(|v| v.is_finite()) {
                    return Err(Error::MalformedLmi(format!("constraint {} has non-finite data", c.name)));
                }
                if linalg::relative_asymmetry(block) > linalg::SYMMETRY_TOL {
                    return Err(Error::MalformedLmi(format!("constraint {} is not symmetric", c.name)));
                }
            }
        }
        Ok(())
    }

    /// Largest eigenvalue of every constraint at `values`.
    pub fn margins(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.constraints
            .iter()
            .map(|c| linalg::eig_max_symmetric(&c.evaluate(values)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Cap on the total number of Newton steps across both phases.
    pub max_iter: usize,
    /// Required margin: every constraint must satisfy `λ_max < -tol_feas`.
    pub tol_feas: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iter: 2000, tol_feas: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible { best_margin: f64 },
    Stalled { last_shift: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityCertificate {
    pub point: Assignment,
    /// Largest eigenvalue of each constraint at `point`.
    pub margins: Vec<f64>,
    pub status: FeasibilityStatus,
    pub iterations: usize,
}

impl FeasibilityCertificate {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, FeasibilityStatus::Feasible)
    }

    pub fn worst_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

// Barrier over decision vector y. When `shift` is set, the last entry of y is
// the phase-1 shift s and each slack is sI - M_k(v); otherwise the slack is
// -M_k(v).
struct Barrier<'a> {
    sys: &'a LmiSystem,
    shift: bool,
}

struct Local {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl Barrier<'_> {
    fn slack(&self, k: usize, y: &[f64]) -> DMatrix<f64> {
        let c = &self.sys.constraints[k];
        let m = c.evaluate(&y[..self.sys.dim]);
        if self.shift {
            DMatrix::identity(m.nrows(), m.nrows()) * y[self.sys.dim] - m
        } else {
            -m
        }
    }

    fn ball(&self, y: &[f64]) -> f64 {
        let r = self.sys.radius;
        r * r - y[..self.sys.dim].iter().map(|v| v * v).sum::<f64>()
    }

    /// Barrier value, or None outside the domain.
    fn value(&self, y: &[f64], t: f64) -> Option<f64> {
        let beta = self.ball(y);
        if beta <= 0.0 {
            return None;
        }
        let mut value = -beta.ln();
        if self.shift {
            value += t * y[self.sys.dim];
        }
        for k in 0..self.sys.constraints.len() {
            let chol = self.slack(k, y).cholesky()?;
            let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
            value -= logdet;
        }
        value.is_finite().then_some(value)
    }

    fn local(&self, y: &[f64], t: f64) -> Option<Local> {
        let n = self.sys.dim;
        let total = if self.shift { n + 1 } else { n };
        let mut grad = DVector::zeros(total);
        let mut hess = DMatrix::zeros(total, total);

        let beta = self.ball(y);
        if beta <= 0.0 {
            return None;
        }
        let mut value = -beta.ln();
        for j in 0..n {
            grad[j] += 2.0 * y[j] / beta;
            hess[(j, j)] += 2.0 / beta;
            for l in 0..n {
                hess[(j, l)] += 4.0 * y[j] * y[l] / (beta * beta);
            }
        }
        if self.shift {
            value += t * y[n];
            grad[n] += t;
        }

        for (k, c) in self.sys.constraints.iter().enumerate() {
            let chol = self.slack(k, y).cholesky()?;
            value -= chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum::<f64>();
            let inv = chol.inverse();
            // dS/dv_j = -A_j; dS/ds = I.
            let mut g: Vec<DMatrix<f64>> = c.coeffs.iter().map(|a| -(&inv * a)).collect();
            if self.shift {
                g.push(inv.clone());
            }
            for a in 0..total {
                grad[a] -= g[a].trace();
                for b in a..total {
                    let h = g[a].component_mul(&g[b].transpose()).sum();
                    hess[(a, b)] += h;
                    if a != b {
                        hess[(b, a)] += h;
                    }
                }
            }
        }
        value.is_finite().then_some(Local { value, grad, hess })
    }
}

enum Centering {
    Converged,
    /// The shift went negative mid-centering (phase 1 only).
    Feasible,
    IterationCap,
    Stuck,
}

const NEWTON_TOL: f64 = 1e-12;

fn newton_direction(local: &Local) -> Option<DVector<f64>> {
    let rhs = -&local.grad;
    if let Some(chol) = local.hess.clone().cholesky() {
        return Some(chol.solve(&rhs));
    }
    let scale = local.hess.diagonal().amax().max(1.0);
    let reg = &local.hess + DMatrix::identity(local.hess.nrows(), local.hess.nrows()) * (1e-12 * scale);
    reg.cholesky().map(|c| c.solve(&rhs))
}

fn center(barrier: &Barrier<'_>, y: &mut Vec<f64>, t: f64, stop_on_negative_shift: bool, budget: &mut usize) -> Centering {
    loop {
        if *budget == 0 {
            return Centering::IterationCap;
        }
        let Some(local) = barrier.local(y, t) else {
            return Centering::Stuck;
        };
        let Some(dir) = newton_direction(&local) else {
            return Centering::Stuck;
        };
        let decrement = -local.grad.dot(&dir);
        if !decrement.is_finite() {
            return Centering::Stuck;
        }
        if decrement / 2.0 <= NEWTON_TOL {
            return Centering::Converged;
        }
        *budget -= 1;

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = y.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            if let Some(v) = barrier.value(&trial, t) {
                if v <= local.value - 0.25 * step * decrement {
                    *y = trial;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return Centering::Stuck;
        }
        if stop_on_negative_shift && y[barrier.sys.dim] < 0.0 {
            return Centering::Feasible;
        }
    }
}

/// Searches for a point satisfying every constraint with margin `tol_feas`.
pub fn solve_feasibility(sys: &LmiSystem, config: &SolverConfig) -> Result<FeasibilityCertificate> {
    sys.validate()?;
    let n = sys.dim;
    let mut budget = config.max_iter;

    // Phase 1.
    let origin = vec![0.0; n];
    let start_margin = sys.margins(&origin)?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let mut y = origin;
    y.push(start_margin + 1.0 + start_margin.abs());
    let theta: f64 = sys.constraints.iter().map(|c| c.size() as f64).sum::<f64>() + 1.0;
    let phase1 = Barrier { sys, shift: true };
    let mut t = 1.0 / (1.0 + start_margin.abs());
    let mut feasible_start = y[n] < 0.0;
    let mut infeasible = false;

    while !feasible_start {
        match center(&phase1, &mut y, t, true, &mut budget) {
            Centering::Feasible => {
                feasible_start = true;
            }
            Centering::Converged | Centering::Stuck => {
                // s* >= s - theta/t on the central path.
                let lower = y[n] - theta / t;
                if lower > -config.tol_feas {
                    infeasible = true;
                }
                if infeasible && theta / t <= 1e-8 * (1.0 + y[n].abs()) {
                    let point = sys.assignment(y[..n].to_vec());
                    let margins = sys.margins(point.values())?;
                    let best_margin = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    return Ok(FeasibilityCertificate {
                        point,
                        margins,
                        status: FeasibilityStatus::Infeasible { best_margin },
                        iterations: config.max_iter - budget,
                    });
                }
                t *= 10.0;
                if !t.is_finite() || t > 1e20 {
                    return stalled(sys, y, config, budget);
                }
            }
            Centering::IterationCap => return stalled(sys, y, config, budget),
        }
    }

    // Phase 2: analytic center of the strict feasible set.
    let mut v = y[..n].to_vec();
    let fallback = v.clone();
    let phase2 = Barrier { sys, shift: false };
    if let Centering::IterationCap = center(&phase2, &mut v, 0.0, false, &mut budget) {
        return stalled(sys, y, config, budget);
    }
    let mut margins = sys.margins(&v)?;
    if margins.iter().any(|&m| m >= -config.tol_feas) {
        // Thin feasible set: drive the shift down instead.
        let mut y = fallback;
        let current = sys.margins(&y)?.into_iter().fold(f64::NEG_INFINITY, f64::max);
        y.push(0.5 * current);
        let mut t = theta / current.abs().max(f64::MIN_POSITIVE);
        while let Centering::Converged | Centering::Stuck | Centering::Feasible =
            center(&phase1, &mut y, t, false, &mut budget)
        {
            if theta / t < config.tol_feas * 1e-3 {
                break;
            }
            t *= 10.0;
        }
        v = y[..n].to_vec();
        margins = sys.margins(&v)?;
    }
    let worst = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let status = if worst < -config.tol_feas {
        FeasibilityStatus::Feasible
    } else {
        FeasibilityStatus::Infeasible { best_margin: worst }
    };
    Ok(FeasibilityCertificate {
        point: sys.assignment(v),
        margins,
        status,
        iterations: config.max_iter - budget,
    })
}

fn stalled(sys: &LmiSystem, y: Vec<f64>, config: &SolverConfig, budget: usize) -> Result<FeasibilityCertificate> {
    let n = sys.dim;
    let last_shift = y[n];
    let point = sys.assignment(y[..n].to_vec());
    let margins = sys.margins(point.values())?;
    Ok(FeasibilityCertificate {
        point,
        margins,
        status: FeasibilityStatus::Stalled { last_shift },
        iterations: config.max_iter - budget,
    })
}
