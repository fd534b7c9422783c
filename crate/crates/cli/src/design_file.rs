//! On-disk controller design records.

use std::path::Path;

use pimaw_core::design::{ControllerDesign, DesignCertificate};
use pimaw_core::exosystem::ExosystemModel;
use pimaw_core::nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub eps_decay: f64,
    pub hurwitz_max_real: [f64; 2],
    pub lmi_vertex_max_eig: [f64; 2],
    pub q_min_eig: f64,
    pub stabilization_margins: Vec<f64>,
    pub antiwindup_margins: Vec<f64>,
    pub rho_near_zero: bool,
}

/// The anti-windup LMI variables, kept so the certificate can be rechecked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntiWindupFile {
    pub qbar: Vec<Vec<f64>>,
    pub delta: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub poly_coeffs: Vec<f64>,
    pub k: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub certificate: CertificateFile,
    #[serde(default)]
    pub antiwindup: Option<AntiWindupFile>,
    #[serde(default)]
    pub scenario_sha256: Option<String>,
}

impl DesignFile {
    pub fn from_design(d: &ControllerDesign, scenario_sha256: Option<String>) -> Self {
        let c = &d.cert;
        Self {
            poly_coeffs: d.model.d_coeffs().to_vec(),
            k: d.k.iter().copied().collect(),
            rho: d.rho,
            gamma: d.gamma,
            lambda_min: d.lambda_min,
            lambda_max: d.lambda_max,
            certificate: CertificateFile {
                eps_decay: c.eps_decay,
                hurwitz_max_real: c.hurwitz_max_real,
                lmi_vertex_max_eig: c.lmi_vertex_max_eig,
                q_min_eig: c.q_min_eig,
                stabilization_margins: c.stabilization_margins.clone(),
                antiwindup_margins: c.antiwindup_margins.clone(),
                rho_near_zero: c.rho_near_zero,
            },
            antiwindup: d.antiwindup.as_ref().map(|a| AntiWindupFile {
                qbar: a.qbar.row_iter().map(|r| r.iter().copied().collect()).collect(),
                delta: a.delta,
                xi: a.xi,
            }),
            scenario_sha256,
        }
    }

    pub fn model(&self) -> CliResult<ExosystemModel> {
        ExosystemModel::from_poly(&self.poly_coeffs).map_err(|e| CliError::Input(format!("design: {e}")))
    }

    pub fn k_row(&self) -> RowDVector<f64> {
        RowDVector::from_row_slice(&self.k)
    }

    pub fn qbar(&self) -> Option<CliResult<DMatrix<f64>>> {
        self.antiwindup.as_ref().map(|a| {
            let m = a.qbar.len();
            if a.qbar.iter().any(|r| r.len() != m) {
                return Err(CliError::Input("design: qbar is not square".into()));
            }
            Ok(DMatrix::from_fn(m, m, |i, j| a.qbar[i][j]))
        })
    }

    /// The design as used by the simulator. The anti-windup LMI variables
    /// stay in the file; simulation only needs `K` and `ρ`.
    pub fn to_design(&self) -> CliResult<ControllerDesign> {
        let model = self.model()?;
        if self.k.len() != model.order() {
            return Err(CliError::Input(format!(
                "design: K has length {}, model order is {}",
                self.k.len(),
                model.order()
            )));
        }
        let c = &self.certificate;
        Ok(ControllerDesign {
            model,
            k: self.k_row(),
            rho: self.rho,
            gamma: self.gamma,
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            cert: DesignCertificate {
                eps_decay: c.eps_decay,
                hurwitz_max_real: c.hurwitz_max_real,
                lmi_vertex_max_eig: c.lmi_vertex_max_eig,
                q_min_eig: c.q_min_eig,
                stabilization_margins: c.stabilization_margins.clone(),
                antiwindup_margins: c.antiwindup_margins.clone(),
                rho_near_zero: c.rho_near_zero,
            },
            antiwindup: None,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> CliResult<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}
