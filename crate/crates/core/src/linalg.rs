//! Dense symmetric linear algebra.
//!
//! The symmetric eigensolver is a cyclic Jacobi iteration: deterministic sweep
//! order, eigenvalues sorted ascending, and each eigenvector normalized so that
//! its largest-magnitude entry is positive. Problem sizes here are small
//! (n up to a few hundred), where Jacobi is accurate and simple.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by the symmetric routines.
pub const SYMMETRY_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// `A = V diag(values) Vᵀ` with `values` ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub vectors: DMatrix<f64>,
    pub values: DVector<f64>,
}

impl SymmetricEigen {
    /// Rebuilds `V Λ Vᵀ`.
    pub fn recompose(&self) -> DMatrix<f64> {
        let scaled = &self.vectors * DMatrix::from_diagonal(&self.values);
        scaled * self.vectors.transpose()
    }
}

/// Largest `|a_ij - a_ji|` relative to the largest entry magnitude.
pub fn relative_asymmetry(a: &DMatrix<f64>) -> f64 {
    let scale = a.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Max-entry deviation of `VᵀV` from the identity.
pub fn orthogonality_defect(v: &DMatrix<f64>) -> f64 {
    let gram = v.transpose() * v;
    (gram - DMatrix::identity(v.ncols(), v.ncols())).amax()
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let asymmetry = relative_asymmetry(a);
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(())
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn symmetric_eigendecomposition(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    check_symmetric(a)?;
    let n = a.nrows();
    let mut work = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let total = work.norm();

    if n > 1 && total > 0.0 {
        let target = f64::EPSILON * total;
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            if off_diagonal_norm(&work) <= target {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    rotate(&mut work, &mut v, p, q);
                }
            }
        }
        if !converged {
            let residual = off_diagonal_norm(&work);
            if residual > target {
                return Err(Error::NoConvergence { residual });
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| work[(i, i)].total_cmp(&work[(j, j)]));

    let values = DVector::from_iterator(n, order.iter().map(|&i| work[(i, i)]));
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut pivot = 0;
        for r in 0..n {
            if v[(r, src)].abs() > v[(pivot, src)].abs() {
                pivot = r;
            }
        }
        let sign = if v[(pivot, src)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[(r, col)] = sign * v[(r, src)];
        }
    }
    Ok(SymmetricEigen { vectors, values })
}

// One Jacobi rotation annihilating work[(p, q)]; accumulates into v.
fn rotate(work: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = work[(p, q)];
    if apq == 0.0 {
        return;
    }
    let tau = (work[(q, q)] - work[(p, p)]) / (2.0 * apq);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let n = work.nrows();
    for k in 0..n {
        let akp = work[(k, p)];
        let akq = work[(k, q)];
        work[(k, p)] = c * akp - s * akq;
        work[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = work[(p, k)];
        let aqk = work[(q, k)];
        work[(p, k)] = c * apk - s * aqk;
        work[(q, k)] = s * apk + c * aqk;
    }
    work[(p, q)] = 0.0;
    work[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Eigenvalues only, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    symmetric_eigendecomposition(a).map(|e| e.values)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn eig_max_symmetric(a: &DMatrix<f64>) -> Result<f64> {
    let values = symmetric_eigenvalues(a)?;
    Ok(values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Eigenvalues of a general real square matrix (real Schur form).
pub fn eigenvalues_general(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    Ok(a.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part among the eigenvalues of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues_general(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Characteristic polynomial `det(sI - A)`, highest power first (monic).
///
/// Faddeev-LeVerrier recursion; fine for the small companion blocks used here.
pub fn characteristic_polynomial(a: &DMatrix<f64>) -> Vec<f64> {
    let m = a.nrows();
    let mut coeffs = vec![0.0; m + 1];
    coeffs[0] = 1.0;
    let mut mk = DMatrix::<f64>::zeros(m, m);
    for k in 1..=m {
        mk = a * &mk + DMatrix::identity(m, m) * coeffs[k - 1];
        coeffs[k] = -(a * &mk).trace() / k as f64;
    }
    coeffs
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// Kronecker product `I_n ⊗ B`.
pub fn kron_identity(n: usize, block: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = block.shape();
    let mut out = DMatrix::<f64>::zeros(n * r, n * c);
    for i in 0..n {
        out.view_mut((i * r, i * c), (r, c)).copy_from(block);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &DMatrix<f64>, e: &SymmetricEigen) -> f64 {
        (a - e.recompose()).amax()
    }

    #[test]
    fn identity_is_its_own_decomposition() {
        let e = symmetric_eigendecomposition(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 1.0]);
        assert_eq!(e.vectors, DMatrix::identity(2, 2));
    }

    #[test]
    fn diagonal_input() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 5.0]);
        let e = symmetric_eigendecomposition(&a).unwrap();
        assert_eq!(e.values.as_slice(), &[2.0, 5.0]);
        assert_eq!(e.vectors, DMatrix::identity(2, 2));
    }

    #[test]
    fn two_by_two_coupled() {
        // det([[3-s,1],[1,3-s]]) = (s-2)(s-4)
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 3.0]);
        let e = symmetric_eigendecomposition(&a).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-14);
        assert!((e.values[1] - 4.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // sign rule: largest-magnitude entry positive, first index on ties
        assert!((e.vectors[(0, 0)] - h).abs() < 1e-14);
        assert!((e.vectors[(1, 0)] + h).abs() < 1e-14);
        assert!((e.vectors[(0, 1)] - h).abs() < 1e-14);
        assert!((e.vectors[(1, 1)] - h).abs() < 1e-14);
        assert!(residual(&a, &e) < 1e-14);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        match symmetric_eigendecomposition(&a) {
            Err(Error::NotSymmetric { asymmetry }) => assert!((asymmetry - 1.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deterministic_output() {
        let a = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 7) % 11) as f64 - 5.0 + (i == j) as u8 as f64);
        let e1 = symmetric_eigendecomposition(&a).unwrap();
        let e2 = symmetric_eigendecomposition(&a).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn eig_max_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, -1.0]));
        assert_eq!(eig_max_symmetric(&d).unwrap(), -1.0);
        assert_eq!(eig_max_symmetric(&DMatrix::identity(4, 4)).unwrap(), 1.0);
    }

    #[test]
    fn companion_char_poly() {
        let f = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -6.0, -11.0, -6.0]);
        let c = characteristic_polynomial(&f);
        let expected = [1.0, 6.0, 11.0, 6.0];
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_abscissa_of_stable_companion() {
        // s^2 + 2s + 1
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0]);
        let a = spectral_abscissa(&f).unwrap();
        assert!((a + 1.0).abs() < 1e-6);
    }

    #[test]
    fn kron_identity_blocks() {
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let k = kron_identity(2, &f);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k.view((0, 0), (2, 2)), f.view((0, 0), (2, 2)));
        assert_eq!(k.view((2, 2), (2, 2)), f.view((0, 0), (2, 2)));
        assert_eq!(k.view((0, 2), (2, 2)).amax(), 0.0);
    }
}
