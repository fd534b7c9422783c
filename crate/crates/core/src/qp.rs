//! Frozen-time oracle: `min ½ xᵀA x + bᵀx  s.t.  x ≥ 0` with its KKT data.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Enumeration limit for [`brute_force_qp`].
pub const BRUTE_FORCE_MAX_N: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `‖A x + b - μ‖∞`
    pub stationarity: f64,
    /// `max(0, -min x_i)`
    pub primal: f64,
    /// `max(0, -min μ_i)`
    pub dual: f64,
    /// `max |μ_i x_i|`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub x_star: DVector<f64>,
    pub mu_star: DVector<f64>,
    pub residuals: KktResiduals,
}

pub fn kkt_residual(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>, mu: &DVector<f64>) -> KktResiduals {
    let grad = a * x + b;
    KktResiduals {
        stationarity: (grad - mu).amax(),
        primal: x.iter().fold(0.0f64, |acc, &v| acc.max(-v)),
        dual: mu.iter().fold(0.0f64, |acc, &v| acc.max(-v)),
        complementarity: x.iter().zip(mu.iter()).fold(0.0f64, |acc, (x, m)| acc.max((x * m).abs())),
    }
}

fn check_dims(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<()> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::Dimension(format!("A is {}x{}, b has length {}", a.nrows(), a.ncols(), b.len())));
    }
    Ok(())
}

/// Solves the free block `A_FF x_F = -b_F` and fills `μ = A x + b` on the
/// clamped block.
fn solve_with_free_set(a: &DMatrix<f64>, b: &DVector<f64>, free: &[bool]) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = b.len();
    let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
    let mut x = DVector::zeros(n);
    if !idx.is_empty() {
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])]);
        let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| -b[i]));
        let chol = sub.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let sol = chol.solve(&rhs);
        for (k, &i) in idx.iter().enumerate() {
            x[i] = sol[k];
        }
    }
    let grad = a * &x + b;
    let mu = DVector::from_fn(n, |i, _| if free[i] { 0.0 } else { grad[i] });
    Ok((x, mu))
}

/// Active-set solve by principal pivoting.
///
/// Starts from the unconstrained minimizer (every index free) and swaps
/// infeasible indices between the free and clamped sets: a free index with
/// `x_i < 0` is clamped, a clamped index with `μ_i < 0` is released. Block
/// swaps are used while the infeasibility count keeps dropping; otherwise the
/// lowest infeasible index is swapped alone, which terminates for any
/// positive-definite `A`.
pub fn solve_nonneg_qp(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<KktPoint> {
    check_dims(a, b)?;
    let n = b.len();
    if a.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let tol = 1e-12 * (1.0 + b.amax());
    let mut free = vec![true; n];
    let mut best_count = usize::MAX;
    let mut stalls = 0;
    // Murty's single-pivot rule alone needs at most 2^n pivots; block pivoting
    // almost always finishes in a handful.
    let cap = 100 * (n + 1) + (1usize << n.min(20));
    for _ in 0..cap {
        let (x, mu) = solve_with_free_set(a, b, &free)?;
        let infeasible: Vec<usize> = (0..n)
            .filter(|&i| if free[i] { x[i] < -tol } else { mu[i] < -tol })
            .collect();
        if infeasible.is_empty() {
            let x = x.map(|v| v.max(0.0));
            let mu = mu.map(|v| v.max(0.0));
            let residuals = kkt_residual(a, b, &x, &mu);
            return Ok(KktPoint { x_star: x, mu_star: mu, residuals });
        }
        if infeasible.len() < best_count {
            best_count = infeasible.len();
            stalls = 0;
        } else {
            stalls += 1;
        }
        if stalls < 3 {
            for &i in &infeasible {
                free[i] = !free[i];
            }
        } else {
            let i = infeasible[0];
            free[i] = !free[i];
        }
    }
    Err(Error::InvalidArgument("active-set iteration did not terminate".into()))
}

/// Exhaustive search over all `2ⁿ` active sets.
pub fn brute_force_qp(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<KktPoint> {
    check_dims(a, b)?;
    let n = b.len();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge { n, limit: BRUTE_FORCE_MAX_N });
    }
    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    for mask in 0u32..(1u32 << n) {
        let free: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        let (x, mu) = solve_with_free_set(a, b, &free)?;
        let violation = x.iter().chain(mu.iter()).fold(0.0f64, |acc, &v| acc.max(-v));
        if best.as_ref().is_none_or(|(v, _, _)| violation < *v) {
            best = Some((violation, x, mu));
        }
    }
    let (_, x, mu) = best.expect("at least one active set");
    let x = x.map(|v| v.max(0.0));
    let mu = mu.map(|v| v.max(0.0));
    let residuals = kkt_residual(a, b, &x, &mu);
    Ok(KktPoint { x_star: x, mu_star: mu, residuals })
}
