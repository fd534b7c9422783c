//! Internal model: the monic polynomial `d(s)`, its controllable-canonical
//! realization, closed-form exosystem responses, and the Kronecker-extended
//! forms used by the multi-channel controller.

use nalgebra::{Complex, DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Largest real part accepted for a root of `d(s)`.
pub const MARGINAL_TOL: f64 = 1e-9;

// Roots closer than this (relative to the root scale) are treated as one
// repeated root when building the modal basis.
const ROOT_CLUSTER_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    /// Every root strictly in the open left half-plane.
    Asymptotic,
    /// At least one root on the imaginary axis.
    Marginal,
}

/// A repeated root of `d(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: Complex<f64>,
    pub multiplicity: usize,
}

/// Companion-form internal model of the signal class.
#[derive(Debug, Clone, PartialEq)]
pub struct ExosystemModel {
    /// Coefficients of `d(s)`, highest power first, leading entry 1.
    d_coeffs: Vec<f64>,
    f: DMatrix<f64>,
    h_col: DVector<f64>,
    h_row: RowDVector<f64>,
    roots: Vec<Root>,
    stability: Stability,
}

/// Builds the controllable canonical realization of a monic `d(s)`.
pub fn companion_realization(d_coeffs: &[f64]) -> Result<ExosystemModel> {
    ExosystemModel::from_poly(d_coeffs)
}

impl ExosystemModel {
    pub fn from_poly(d_coeffs: &[f64]) -> Result<Self> {
        if d_coeffs.len() < 2 {
            return Err(Error::Polynomial("degree must be at least 1".into()));
        }
        if d_coeffs[0] != 1.0 {
            return Err(Error::Polynomial(format!(
                "leading coefficient must be 1, got {}",
                d_coeffs[0]
            )));
        }
        if d_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Polynomial("non-finite coefficient".into()));
        }
        let m = d_coeffs.len() - 1;
        let mut f = DMatrix::<f64>::zeros(m, m);
        for i in 0..m - 1 {
            f[(i, i + 1)] = 1.0;
        }
        // d(s) = s^m + a_{m-1} s^{m-1} + ... + a_0; last row is -(a_0, ..., a_{m-1})
        for j in 0..m {
            f[(m - 1, j)] = -d_coeffs[m - j];
        }
        let mut h_col = DVector::zeros(m);
        h_col[m - 1] = 1.0;
        let mut h_row = RowDVector::zeros(m);
        h_row[0] = 1.0;

        let roots = cluster_roots(&linalg::eigenvalues_general(&f)?);
        let worst = roots.iter().map(|r| r.value.re).fold(f64::NEG_INFINITY, f64::max);
        if worst > MARGINAL_TOL {
            return Err(Error::Polynomial(format!(
                "d(s) has a root with real part {worst:.3e}; the internal model must be marginally stable"
            )));
        }
        let stability = if worst < -MARGINAL_TOL {
            Stability::Asymptotic
        } else {
            Stability::Marginal
        };
        Ok(Self { d_coeffs: d_coeffs.to_vec(), f, h_col, h_row, roots, stability })
    }

    pub fn order(&self) -> usize {
        self.f.nrows()
    }

    pub fn d_coeffs(&self) -> &[f64] {
        &self.d_coeffs
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    /// Input column of the controller realization.
    pub fn h_col(&self) -> &DVector<f64> {
        &self.h_col
    }

    /// Output row of the signal generator.
    pub fn h_row(&self) -> &RowDVector<f64> {
        &self.h_row
    }

    pub fn roots(&self) -> &[Root] {
        &self.roots
    }

    pub fn stability(&self) -> Stability {
        self.stability
    }

    /// `F + λ H_col K`, the per-channel unconstrained closed-loop matrix.
    pub fn closed_loop(&self, k: &RowDVector<f64>, lambda: f64) -> DMatrix<f64> {
        &self.f + &self.h_col * k * lambda
    }

    /// Closed-form evaluator of `H_row exp(F t) ξ0`.
    pub fn response(&self, xi0: &DVector<f64>) -> Result<ModalResponse> {
        ModalResponse::new(self, xi0)
    }
}

fn cluster_roots(raw: &[Complex<f64>]) -> Vec<Root> {
    let scale = raw.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    let mut groups: Vec<(Complex<f64>, usize)> = Vec::new();
    for &z in raw {
        match groups
            .iter_mut()
            .find(|(sum, count)| (*sum / *count as f64 - z).norm() <= ROOT_CLUSTER_TOL * scale)
        {
            Some((sum, count)) => {
                *sum += z;
                *count += 1;
            }
            None => groups.push((z, 1)),
        }
    }
    let mut roots: Vec<Root> = groups
        .into_iter()
        .map(|(sum, count)| Root { value: sum / count as f64, multiplicity: count })
        .collect();
    roots.sort_by(|a, b| {
        a.value
            .re
            .total_cmp(&b.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });
    roots
}

/// `y(t) = Re Σ c_{r,k} t^k e^{r t}` over the roots `r` of `d(s)` and
/// `k < multiplicity(r)`, fitted so that `y^{(j)}(0) = H_row F^j ξ0`.
#[derive(Debug, Clone)]
pub struct ModalResponse {
    terms: Vec<(Complex<f64>, usize, Complex<f64>)>,
}

impl ModalResponse {
    fn new(model: &ExosystemModel, xi0: &DVector<f64>) -> Result<Self> {
        let m = model.order();
        if xi0.len() != m {
            return Err(Error::Dimension(format!("xi0 has length {}, expected {m}", xi0.len())));
        }
        // Initial derivatives y^{(j)}(0) = H_row F^j xi0.
        let mut rhs = DVector::<Complex<f64>>::zeros(m);
        let mut state = xi0.clone();
        for j in 0..m {
            rhs[j] = Complex::new((model.h_row() * &state)[0], 0.0);
            state = model.f() * state;
        }
        let basis: Vec<(Complex<f64>, usize)> = model
            .roots()
            .iter()
            .flat_map(|r| (0..r.multiplicity).map(move |k| (r.value, k)))
            .collect();
        // Confluent Vandermonde: d^j/dt^j [t^k e^{rt}] at 0 = j!/(j-k)! r^{j-k}.
        let mut system = DMatrix::<Complex<f64>>::zeros(m, m);
        for (col, &(r, k)) in basis.iter().enumerate() {
            for j in 0..m {
                if j >= k {
                    let falling: f64 = ((j - k + 1)..=j).map(|v| v as f64).product();
                    system[(j, col)] = r.powu((j - k) as u32) * falling;
                }
            }
        }
        let coeffs = system
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Polynomial("singular modal basis".into()))?;
        let terms = basis
            .into_iter()
            .zip(coeffs.iter())
            .map(|((r, k), &c)| (r, k, c))
            .collect();
        Ok(Self { terms })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(r, k, c)| (c * (r * t).exp() * t.powi(k as i32)).re)
            .sum()
    }
}

/// `F_ext = I_n ⊗ F`, `H_ext = I_n ⊗ H_col`, `K_ext = I_n ⊗ K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedRealization {
    pub n: usize,
    pub m: usize,
    pub f_ext: DMatrix<f64>,
    pub h_ext: DMatrix<f64>,
    pub k_ext: DMatrix<f64>,
}

pub fn kron_extend(model: &ExosystemModel, k: &RowDVector<f64>, n: usize) -> Result<ExtendedRealization> {
    let m = model.order();
    if k.len() != m {
        return Err(Error::Dimension(format!("K has length {}, expected {m}", k.len())));
    }
    if n == 0 {
        return Err(Error::Dimension("n must be positive".into()));
    }
    let h = DMatrix::from_column_slice(m, 1, model.h_col().as_slice());
    let kk = DMatrix::from_row_slice(1, m, k.as_slice());
    Ok(ExtendedRealization {
        n,
        m,
        f_ext: linalg::kron_identity(n, model.f()),
        h_ext: linalg::kron_identity(n, &h),
        k_ext: linalg::kron_identity(n, &kk),
    })
}

impl ExtendedRealization {
    /// Checks the block-diagonal Kronecker structure entrywise.
    pub fn verify(&self, model: &ExosystemModel, k: &RowDVector<f64>) -> bool {
        let m = self.m;
        for i in 0..self.n {
            for j in 0..self.n {
                let fb = self.f_ext.view((i * m, j * m), (m, m));
                let hb = self.h_ext.view((i * m, j), (m, 1));
                let kb = self.k_ext.view((i, j * m), (1, m));
                if i == j {
                    if fb != model.f().view((0, 0), (m, m))
                        || hb.iter().ne(model.h_col().iter())
                        || kb.iter().ne(k.iter())
                    {
                        return false;
                    }
                } else if fb.iter().chain(hb.iter()).chain(kb.iter()).any(|&v| v != 0.0) {
                    return false;
                }
            }
        }
        true
    }
}
