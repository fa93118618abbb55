//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("eigenvalue {index} is complex ({re} {im:+}i)")]
    Complex { index: usize, re: f64, im: f64 },
    #[error("eigenvector matrix is singular or defective (condition estimate {condition:e})")]
    Defective { condition: f64 },
    #[error("non-finite matrix entries")]
    NonFinite,
}

/// Real eigendecomposition `M R = R Λ` of a general (non-symmetric) matrix.
#[derive(Debug, Clone)]
pub struct RealEigen {
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors stored as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
    /// `σ_max / σ_min` of `vectors`.
    pub condition: f64,
}

/// Eigenvalues come from the real Schur form; each eigenvector is the right
/// singular vector of `M − λI` with the smallest singular value. Eigenvalues
/// closer than `cluster_tol · ‖M‖` share one SVD and take as many trailing
/// singular vectors as their multiplicity.
pub fn real_eigen(m: &DMatrix<f64>, cluster_tol: f64) -> Result<RealEigen, EigenError> {
    let n = m.nrows();
    if m.iter().any(|x| !x.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let complex = m.clone().complex_eigenvalues();
    let mut values = Vec::with_capacity(n);
    for (index, c) in complex.iter().enumerate() {
        if c.im.abs() > 1e-10 * scale {
            return Err(EigenError::Complex {
                index,
                re: c.re,
                im: c.im,
            });
        }
        values.push(c.re);
    }
    values.sort_by(|a, b| b.total_cmp(a));

    let mut vectors = DMatrix::zeros(n, n);
    let mut k = 0;
    while k < n {
        let mut end = k + 1;
        while end < n && (values[k] - values[end]).abs() <= cluster_tol * scale {
            end += 1;
        }
        let lambda = values[k..end].iter().sum::<f64>() / (end - k) as f64;
        let shifted = m - DMatrix::identity(n, n) * lambda;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        for (slot, &row) in order.iter().take(end - k).enumerate() {
            let v: DVector<f64> = v_t.row(row).transpose();
            vectors.set_column(k + slot, &(v.normalize()));
        }
        k = end;
    }
    let condition = condition_number(&vectors);
    if !condition.is_finite() || condition > 1e14 {
        return Err(EigenError::Defective { condition });
    }
    Ok(RealEigen {
        values,
        vectors,
        condition,
    })
}

/// 2-norm condition number via singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = m.clone().svd(false, false).singular_values;
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Row-sum (infinity) norm.
pub fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest off-diagonal magnitude.
pub fn max_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                best = best.max(m[(i, j)].abs());
            }
        }
    }
    best
}
