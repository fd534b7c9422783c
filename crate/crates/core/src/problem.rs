//! The time-varying quadratic cost `f_t(x) = ½ xᵀA x + b(t)ᵀx`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::linalg::{self, SymmetricEigen};

/// Eigenvalue bound slack, relative to `lambda_max`.
pub const EIG_BOUND_TOL: f64 = 1e-9;

/// Curvature data of the cost: `A` symmetric positive definite with known
/// spectral bounds `lambda_min I ⪯ A ⪯ lambda_max I`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    a: DMatrix<f64>,
    lambda_min: f64,
    lambda_max: f64,
    eig: SymmetricEigen,
}

impl QuadraticProblem {
    /// Validates `A` against the bounds and caches its eigendecomposition.
    pub fn new(a: DMatrix<f64>, lambda_min: f64, lambda_max: f64) -> Result<Self> {
        if !(lambda_min > 0.0 && lambda_min <= lambda_max && lambda_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < lambda_min <= lambda_max < inf, got [{lambda_min}, {lambda_max}]"
            )));
        }
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::Dimension(format!("A is {}x{}", a.nrows(), a.ncols())));
        }
        let asymmetry = linalg::relative_asymmetry(&a);
        if asymmetry > linalg::SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let a = (&a + a.transpose()) * 0.5;
        let eig = linalg::symmetric_eigendecomposition(&a)?;
        let slack = EIG_BOUND_TOL * lambda_max;
        let lo = eig.values[0];
        let hi = eig.values[eig.values.len() - 1];
        if lo < lambda_min - slack || hi > lambda_max + slack {
            return Err(Error::InvalidArgument(format!(
                "eigenvalues [{lo}, {hi}] outside declared bounds [{lambda_min}, {lambda_max}]"
            )));
        }
        Ok(Self { a, lambda_min, lambda_max, eig })
    }

    /// Draws `A = V Λ Vᵀ` with `V` Haar-orthogonal and eigenvalues uniform on
    /// `[lambda_min, lambda_max]`.
    pub fn random(n: usize, lambda_min: f64, lambda_max: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("n must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_orthogonal(n, &mut rng);
        let spread = Uniform::new_inclusive(lambda_min, lambda_max)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let lambdas = DVector::from_iterator(n, (0..n).map(|_| spread.sample(&mut rng)));
        let a = &v * DMatrix::from_diagonal(&lambdas) * v.transpose();
        let a = (&a + a.transpose()) * 0.5;
        Self::new(a, lambda_min, lambda_max)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn eig(&self) -> &SymmetricEigen {
        &self.eig
    }

    /// `∇f_t(x) = A x + b`.
    pub fn gradient(&self, b: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        gradient_oracle(self, b, x)
    }

    /// `f_t(x)` with the constant term dropped.
    pub fn cost(&self, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.a * x)) + b.dot(x)
    }
}

/// Gradient oracle `A x + b`.
pub fn gradient_oracle(prob: &QuadraticProblem, b: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    let n = prob.n();
    if b.len() != n || x.len() != n {
        return Err(Error::Dimension(format!(
            "gradient expects length {n}, got b:{} x:{}",
            b.len(),
            x.len()
        )));
    }
    Ok(&prob.a * x + b)
}

/// Haar-distributed orthogonal matrix: QR of a standard-normal matrix with
/// the signs of `diag(R)` folded into `Q`.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_examples() {
        let p = QuadraticProblem::new(DMatrix::identity(2, 2), 1.0, 1.0).unwrap();
        let g = p.gradient(&DVector::from_vec(vec![1.0, -1.0]), &DVector::zeros(2)).unwrap();
        assert_eq!(g.as_slice(), &[1.0, -1.0]);

        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let p = QuadraticProblem::new(a, 2.0, 4.0).unwrap();
        let one = DVector::from_element(2, 1.0);
        assert_eq!(p.gradient(&one, &one).unwrap().as_slice(), &[3.0, 5.0]);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = QuadraticProblem::random(6, 1.0, 10.0, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = DVector::from_fn(6, |_, _| StandardNormal.sample(&mut rng));
        let x = DVector::from_fn(6, |_, _| StandardNormal.sample(&mut rng));
        let g = p.gradient(&b, &x).unwrap();
        let h = 1e-5;
        for i in 0..6 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.cost(&b, &xp) - p.cost(&b, &xm)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = QuadraticProblem::new(DMatrix::identity(2, 2), 1.0, 1.0).unwrap();
        assert!(p.gradient(&DVector::zeros(3), &DVector::zeros(2)).is_err());
    }

    #[test]
    fn rejects_bounds_violation() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 5.0]);
        assert!(QuadraticProblem::new(a, 1.0, 4.0).is_err());
    }

    #[test]
    fn random_problem_respects_invariants() {
        let p = QuadraticProblem::random(10, 1.0, 10.0, 3).unwrap();
        let e = p.eig();
        assert!(linalg::orthogonality_defect(&e.vectors) <= 1e-10);
        assert!((p.a() - e.recompose()).amax() <= 1e-8 * p.lambda_max());
        assert!(e.values.iter().all(|&l| (1.0..=10.0).contains(&l)));
    }
}
