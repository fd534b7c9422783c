//! Synthesis outputs and their certificates.

use nalgebra::{DMatrix, RowDVector};

use crate::exosystem::ExosystemModel;

/// Per-`λ` spectral abscissa of `F + λ H K`.
#[derive(Debug, Clone, PartialEq)]
pub struct HurwitzReport {
    pub entries: Vec<(f64, f64)>,
    pub pass: bool,
}

impl HurwitzReport {
    pub fn worst(&self) -> Option<(f64, f64)> {
        self.entries.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilizationDesign {
    pub k: RowDVector<f64>,
    /// Decay rate actually certified (may be below the requested one).
    pub eps_decay: f64,
    pub w: DMatrix<f64>,
    pub z: RowDVector<f64>,
    pub lmi_margins: Vec<f64>,
    pub hurwitz: HurwitzReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntiWindupSolution {
    pub gamma: f64,
    pub qbar: DMatrix<f64>,
    pub delta: f64,
    pub xi: f64,
    pub rho: f64,
    /// `|ξ/δ|` fell below the zero threshold; `rho` was reported as 0.
    pub rho_near_zero: bool,
    /// Max eigenvalue of the performance LMI at `λmin`, `λmax`.
    pub vertex_max_eig: [f64; 2],
    pub q_min_eig: f64,
    pub solver_margins: Vec<f64>,
    pub solver_iterations: usize,
}

/// Numbers that back a design; all recomputable from `(K, ρ, Q̄, δ, ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignCertificate {
    pub eps_decay: f64,
    /// Spectral abscissa of `F + λ H K` at `λmin`, `λmax`.
    pub hurwitz_max_real: [f64; 2],
    pub lmi_vertex_max_eig: [f64; 2],
    pub q_min_eig: f64,
    pub stabilization_margins: Vec<f64>,
    pub antiwindup_margins: Vec<f64>,
    pub rho_near_zero: bool,
}

impl DesignCertificate {
    pub fn from_steps(step1: &StabilizationDesign, step2: &AntiWindupSolution) -> Self {
        let first = step1.hurwitz.entries.first().map_or(f64::NAN, |e| e.1);
        // with λmin = λmax only one vertex is listed
        let second = if step1.hurwitz.entries.len() > 1 && step1.hurwitz.entries[0].0 != step1.hurwitz.entries[1].0 {
            step1.hurwitz.entries[1].1
        } else {
            first
        };
        Self {
            eps_decay: step1.eps_decay,
            hurwitz_max_real: [first, second],
            lmi_vertex_max_eig: step2.vertex_max_eig,
            q_min_eig: step2.q_min_eig,
            stabilization_margins: step1.lmi_margins.clone(),
            antiwindup_margins: step2.solver_margins.clone(),
            rho_near_zero: step2.rho_near_zero,
        }
    }
}

/// Gain row `K`, anti-windup scalar `ρ`, and the level `γ` they certify.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerDesign {
    pub model: ExosystemModel,
    pub k: RowDVector<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub cert: DesignCertificate,
    /// Full step-2 solution when the design was synthesized in-process.
    pub antiwindup: Option<AntiWindupSolution>,
}

impl ControllerDesign {
    /// Same controller with a different anti-windup gain (baseline runs).
    pub fn with_rho(&self, rho: f64) -> Self {
        Self { rho, ..self.clone() }
    }
}
