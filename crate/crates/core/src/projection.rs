//! The nonnegative-orthant projection and its rotated form
//! `φ(u) = Vᵀ proj(V u)` used by the decoupled loop.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Orthogonality slack for `V`.
pub const ORTHO_TOL: f64 = 1e-10;
/// Distance from zero below which a component of `V u` counts as on the kink.
pub const KINK_TOL: f64 = 1e-12;

/// Componentwise `max(v_i, 0)`.
pub fn project_nonneg(v: &DVector<f64>) -> DVector<f64> {
    v.map(|x| x.max(0.0))
}

pub fn project_nonneg_in_place(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

fn check_orthogonal(v: &DMatrix<f64>) -> Result<()> {
    if !v.is_square() {
        return Err(Error::Dimension(format!("V is {}x{}", v.nrows(), v.ncols())));
    }
    let deviation = linalg::orthogonality_defect(v);
    if deviation > ORTHO_TOL {
        return Err(Error::NotOrthogonal { deviation });
    }
    Ok(())
}

/// `Vᵀ proj(V u)`.
pub fn phi(v: &DMatrix<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    check_orthogonal(v)?;
    if u.len() != v.ncols() {
        return Err(Error::Dimension(format!("u has length {}, expected {}", u.len(), v.ncols())));
    }
    Ok(v.transpose() * project_nonneg(&(v * u)))
}

/// Jacobian `Vᵀ X V` of φ, `X = diag(1[(V u)_i ≥ 0])`.
///
/// Refuses points within [`KINK_TOL`] of the nondifferentiable set.
pub fn phi_jacobian(v: &DMatrix<f64>, u: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_orthogonal(v)?;
    if u.len() != v.ncols() {
        return Err(Error::Dimension(format!("u has length {}, expected {}", u.len(), v.ncols())));
    }
    let rotated = v * u;
    if let Some((index, distance)) = rotated
        .iter()
        .enumerate()
        .map(|(i, x)| (i, x.abs()))
        .find(|&(_, d)| d < KINK_TOL)
    {
        return Err(Error::NearKink { index, distance });
    }
    let mask = rotated.map(|x| if x >= 0.0 { 1.0 } else { 0.0 });
    Ok(v.transpose() * DMatrix::from_diagonal(&mask) * v)
}

/// `Vᵀ s`, the decoupled coordinates of a signal.
pub fn transform_signals(v: &DMatrix<f64>, s: &DVector<f64>) -> Result<DVector<f64>> {
    if v.nrows() != s.len() {
        return Err(Error::Dimension(format!("signal has length {}, expected {}", s.len(), v.nrows())));
    }
    Ok(v.transpose() * s)
}
