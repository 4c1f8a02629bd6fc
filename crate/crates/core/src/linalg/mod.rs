//! Small dense real linear algebra.

mod assignment;
mod eigen;
mod matrix;

use serde::Serialize;
use thiserror::Error;

pub use assignment::min_cost_matching;
pub use eigen::{
    general_eigenvalues, general_eigenvalues_capped, spectral_radius, symmetric_eigenvalues,
    DEFAULT_DIMENSION_CAP, SYMMETRY_TOLERANCE,
};
pub use matrix::Matrix;

use crate::scalar::{lit, Real};

/// Default relative singularity band for the `yy` Hessian block.
pub const DEFAULT_SINGULARITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("dimension {n} exceeds cap {cap}")]
    DimensionCap { n: usize, cap: usize },
    #[error("QR iteration did not converge within {budget} iterations")]
    IterationLimit { budget: usize },
    #[error("yy block is singular within tolerance (min |eig| = {min_abs_eigenvalue:e})")]
    SingularB { min_abs_eigenvalue: f64 },
    #[error("matrix is singular")]
    Singular,
}

/// Solves `m · X = rhs` by LU with partial pivoting.
pub fn solve<T: Real>(m: &Matrix<T>, rhs: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if rhs.rows() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: format!("{n} rows"),
            found: format!("{} rows", rhs.rows()),
        });
    }
    let k = rhs.cols();
    let mut a = m.to_rows();
    let mut b = rhs.to_rows();
    let scale = m.max_abs();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .expect("nonempty range");
        if a[pivot][col].abs() <= T::epsilon() * scale || a[pivot][col] == T::zero() {
            return Err(LinalgError::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == T::zero() {
                continue;
            }
            for j in col..n {
                let v = a[col][j];
                a[row][j] -= factor * v;
            }
            for j in 0..k {
                let v = b[col][j];
                b[row][j] -= factor * v;
            }
        }
    }
    for col in (0..n).rev() {
        for j in 0..k {
            let mut acc = b[col][j];
            for t in (col + 1)..n {
                acc -= a[col][t] * b[t][j];
            }
            b[col][j] = acc / a[col][col];
        }
    }
    Ok(Matrix::from_rows(&b))
}

/// Solves `m x = v` for a single right-hand side.
pub fn solve_vec<T: Real>(m: &Matrix<T>, v: &[T]) -> Result<Vec<T>, LinalgError> {
    let rhs = Matrix::new(v.len(), 1, v.to_vec())?;
    Ok(solve(m, &rhs)?.as_slice().to_vec())
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant<T: Real>(m: &Matrix<T>) -> Result<T, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    let mut a = m.to_rows();
    let mut det = T::one();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .expect("nonempty range");
        if a[pivot][col] == T::zero() {
            return Ok(T::zero());
        }
        if pivot != col {
            a.swap(col, pivot);
            det = -det;
        }
        det *= a[col][col];
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            for j in col..n {
                let v = a[col][j];
                a[row][j] -= factor * v;
            }
        }
    }
    Ok(det)
}

/// Whether a symmetric `b` is singular in the sense used throughout the
/// crate: `min|eig| ≤ tol · max(1, max|eig|)`.
///
/// Returns the ascending eigenvalues alongside the verdict.
pub fn near_singular_symmetric<T: Real>(b: &Matrix<T>, tol: T) -> Result<(bool, Vec<T>), LinalgError> {
    let eig = symmetric_eigenvalues(b)?;
    let min_abs = eig.iter().fold(T::infinity(), |m, v| m.min(v.abs()));
    let max_abs = eig.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let singular = eig.is_empty() || min_abs <= tol * T::one().max(max_abs);
    Ok((singular, eig))
}

/// `a − c · b⁻¹ · cᵀ`, with the default singularity band.
pub fn schur_complement<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    c: &Matrix<T>,
) -> Result<Matrix<T>, LinalgError> {
    schur_complement_with(a, b, c, lit(DEFAULT_SINGULARITY_TOLERANCE))
}

/// `a − c · b⁻¹ · cᵀ`; fails with [`LinalgError::SingularB`] when `b` is
/// within `sing_tol` of singular.
pub fn schur_complement_with<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    c: &Matrix<T>,
    sing_tol: T,
) -> Result<Matrix<T>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if c.rows() != a.rows() || c.cols() != b.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: format!("c of shape {}x{}", a.rows(), b.rows()),
            found: format!("{}x{}", c.rows(), c.cols()),
        });
    }
    let (singular, eig) = near_singular_symmetric(b, sing_tol)?;
    if singular {
        let min_abs = eig.iter().fold(f64::INFINITY, |m, v| m.min(crate::to_f64(v.abs())));
        return Err(LinalgError::SingularB {
            min_abs_eigenvalue: if min_abs.is_finite() { min_abs } else { 0.0 },
        });
    }
    if c.as_slice().iter().all(|v| *v == T::zero()) {
        return Ok(a.symmetrized());
    }
    let binv_ct = solve(b, &c.transpose())?;
    let s = a.sub(&c.matmul(&binv_ct)?)?;
    Ok(s.symmetrized())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DefinitenessVerdict {
    PositiveDefinite,
    NegativeDefinite,
    PositiveSemidefinite,
    NegativeSemidefinite,
    Indefinite,
    NearSingular,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Definiteness<T> {
    pub verdict: DefinitenessVerdict,
    /// Eigenvalue closest to zero.
    pub margin_eigenvalue: T,
    pub min_eigenvalue: T,
    pub max_eigenvalue: T,
}

/// Definiteness with a single band: `tol` is both the strictness margin and
/// the singularity band, so semidefinite verdicts never occur.
pub fn definiteness<T: Real>(m: &Matrix<T>, tol: T) -> Result<Definiteness<T>, LinalgError> {
    definiteness_banded(m, tol, tol)
}

/// Definiteness with separate strictness and singularity bands.
///
/// With `sing_tol < strict_tol`, eigenvalues in `(sing_tol, strict_tol]`
/// yield the semidefinite verdicts.
pub fn definiteness_banded<T: Real>(
    m: &Matrix<T>,
    strict_tol: T,
    sing_tol: T,
) -> Result<Definiteness<T>, LinalgError> {
    let eig = symmetric_eigenvalues(m)?;
    Ok(classify_spectrum(&eig, strict_tol, sing_tol))
}

pub(crate) fn classify_spectrum<T: Real>(eig: &[T], strict_tol: T, sing_tol: T) -> Definiteness<T> {
    let min = eig.iter().copied().fold(T::infinity(), T::min);
    let max = eig.iter().copied().fold(T::neg_infinity(), T::max);
    let margin = eig
        .iter()
        .copied()
        .min_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
        .unwrap_or_else(T::zero);
    let verdict = if eig.is_empty() || margin.abs() <= sing_tol {
        DefinitenessVerdict::NearSingular
    } else if min > strict_tol {
        DefinitenessVerdict::PositiveDefinite
    } else if max < -strict_tol {
        DefinitenessVerdict::NegativeDefinite
    } else if min >= -strict_tol {
        DefinitenessVerdict::PositiveSemidefinite
    } else if max <= strict_tol {
        DefinitenessVerdict::NegativeSemidefinite
    } else {
        DefinitenessVerdict::Indefinite
    };
    Definiteness {
        verdict,
        margin_eigenvalue: margin,
        min_eigenvalue: min,
        max_eigenvalue: max,
    }
}
