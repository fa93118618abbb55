//! Simultaneous diagonalization of the diffusion quadratic form and the
//! index-hedging direction.
//!
//! We look for a matrix `R` such that `Rᵀ A R` is diagonal and `a·R` has a single
//! non-zero entry (the first). The columns of `R` are taken as eigenvectors of
//! `D·A` for a diagonal `D` whose pinned entry is `−1`; the remaining `N` diagonal
//! entries are the unknowns of a root-finding problem `(a·R)_i = 0, i = 1..N`.
//!
//! Column convention: unit Euclidean norm, largest-magnitude component positive,
//! the column with the largest `|a·r_j|` first and the rest by descending
//! eigenvalue.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, EigenError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorizeError {
    #[error("dimension mismatch: A is {rows}x{cols}, a has {len} entries, d has {d_len}")]
    Dimension {
        rows: usize,
        cols: usize,
        len: usize,
        d_len: usize,
    },
    #[error(
        "D·A is stiff: correlation matrix condition number {condition:e} exceeds {limit:e}; \
         eigenvectors cannot be resolved in double precision when correlations approach ±1"
    )]
    Stiff { condition: f64, limit: f64 },
    #[error("eigendecomposition of D·A failed: {0}")]
    Eigen(#[from] EigenError),
    #[error("no convergence after {iterations} iterations, last residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("diffusion coefficient p[{index}] = {value:e} is not positive")]
    NonPositiveDiffusion { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorizeOptions {
    /// Convergence tolerance on `max_i |(a·R)_i|`, `i ≥ 1`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Initial guess for the `N` free diagonal entries; defaults to `0.01` each.
    pub d_init: Option<Vec<f64>>,
    /// Index of the diagonal entry fixed to `−1`. Defaults to the last axis
    /// unless the index loading there vanishes.
    pub pinned: Option<usize>,
    /// Largest accepted condition number of `A`.
    pub max_condition: f64,
    /// On Newton failure, restart from the eigen-direction seed.
    pub direction_seed_fallback: bool,
}

impl Default for FactorizeOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 200,
            d_init: None,
            pinned: None,
            max_condition: 1e12,
            direction_seed_fallback: true,
        }
    }
}

/// How the accepted root was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootStart {
    InitialGuess,
    DirectionSeed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedSystem {
    /// Full diagonal of `D`, including the pinned `−1`.
    pub d: Vec<f64>,
    pub pinned: usize,
    pub r: DMatrix<f64>,
    /// Eigenvalues of `D·A` in column order.
    pub lambda: Vec<f64>,
    /// Diagonal of `Rᵀ A R`.
    pub p: Vec<f64>,
    /// `a·R`.
    pub b: Vec<f64>,
    /// Coefficient of `Φ_{u0}² / Φ`, equal to `b_0²`.
    pub beta: f64,
    pub residual: f64,
    pub iterations: usize,
    pub start: RootStart,
}

impl FactorizedSystem {
    pub fn dim(&self) -> usize {
        self.p.len()
    }

    /// `beta / p_0`; invariant under column scaling. Equals `aᵀA⁻¹a` at a root.
    pub fn nonlinear_ratio(&self) -> f64 {
        self.beta / self.p[0]
    }

    /// Rescales the columns of `R` and recomputes `p`, `b` and `beta`.
    pub fn rescaled(&self, scales: &[f64], a_mat: &DMatrix<f64>, a_vec: &DVector<f64>) -> Self {
        let mut out = self.clone();
        for (k, &c) in scales.iter().enumerate() {
            let col = out.r.column(k) * c;
            out.r.set_column(k, &col);
        }
        let (p, b) = diagonal_data(&out.r, a_mat, a_vec);
        out.beta = b[0] * b[0];
        out.residual = b.iter().skip(1).fold(0.0, |m, x| m.max(x.abs()));
        out.p = p;
        out.b = b;
        out
    }
}

/// Output of one evaluation of the root-finding residual.
#[derive(Debug, Clone)]
pub struct ResidualEval {
    /// Signed `(a·R)_i` for `i = 1..N`.
    pub c: Vec<f64>,
    pub r: DMatrix<f64>,
    pub lambda: Vec<f64>,
    /// Full diagonal of `D`.
    pub d: Vec<f64>,
    pub condition: f64,
}

fn check_dims(
    a_mat: &DMatrix<f64>,
    a_vec: &DVector<f64>,
    d_len: usize,
) -> Result<(), FactorizeError> {
    let n = a_vec.len();
    if a_mat.nrows() != n || a_mat.ncols() != n || d_len + 1 != n {
        return Err(FactorizeError::Dimension {
            rows: a_mat.nrows(),
            cols: a_mat.ncols(),
            len: n,
            d_len,
        });
    }
    Ok(())
}

fn full_diagonal(free: &[f64], pinned: usize) -> Vec<f64> {
    let mut d = Vec::with_capacity(free.len() + 1);
    d.extend_from_slice(&free[..pinned]);
    d.push(-1.0);
    d.extend_from_slice(&free[pinned..]);
    d
}

/// Residual with the `−1` in the last diagonal position.
pub fn residual_map(
    d: &[f64],
    a_mat: &DMatrix<f64>,
    a_vec: &DVector<f64>,
) -> Result<ResidualEval, FactorizeError> {
    residual_map_pinned(d, a_mat, a_vec, d.len())
}

/// Residual with the `−1` at diagonal position `pinned`; `d` holds the other
/// `N` entries in axis order.
pub fn residual_map_pinned(
    d: &[f64],
    a_mat: &DMatrix<f64>,
    a_vec: &DVector<f64>,
    pinned: usize,
) -> Result<ResidualEval, FactorizeError> {
    check_dims(a_mat, a_vec, d.len())?;
    let n = a_vec.len();
    let d_full = full_diagonal(d, pinned);
    let dm = DMatrix::from_diagonal(&DVector::from_vec(d_full.clone()));
    let eig = linalg::real_eigen(&(&dm * a_mat), 1e-13)?;
    let mut vectors = eig.vectors;
    a_orthogonalize_clusters(&mut vectors, &eig.values, a_mat, a_vec);
    for k in 0..n {
        fix_column_sign(&mut vectors, k);
    }
    let ar: Vec<f64> = (0..n).map(|k| a_vec.dot(&vectors.column(k))).collect();
    let mut first = 0;
    for k in 1..n {
        if ar[k].abs() > ar[first].abs() {
            first = k;
        }
    }
    let mut rest: Vec<usize> = (0..n).filter(|&k| k != first).collect();
    rest.sort_by(|&x, &y| eig.values[y].total_cmp(&eig.values[x]));
    let order: Vec<usize> = std::iter::once(first).chain(rest).collect();
    let r = DMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    let lambda: Vec<f64> = order.iter().map(|&k| eig.values[k]).collect();
    let c = order.iter().skip(1).map(|&k| ar[k]).collect();
    Ok(ResidualEval {
        c,
        r,
        lambda,
        d: d_full,
        condition: eig.condition,
    })
}

/// Columns sharing an eigenvalue span an eigenspace in which any basis is valid.
/// Pick one that is `A`-orthogonal and whose first vector is the component of
/// `A⁻¹a` in that eigenspace, so at most one column of the cluster sees `a`.
fn a_orthogonalize_clusters(
    vectors: &mut DMatrix<f64>,
    values: &[f64],
    a_mat: &DMatrix<f64>,
    a_vec: &DVector<f64>,
) {
    let n = values.len();
    let scale = values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut k = 0;
    while k < n {
        let mut end = k + 1;
        while end < n && (values[k] - values[end]).abs() <= 1e-13 * scale {
            end += 1;
        }
        if end - k > 1 {
            let basis = vectors.columns(k, end - k).into_owned();
            let gram = basis.transpose() * a_mat * &basis;
            let mut candidates = Vec::with_capacity(end - k + 1);
            if let Some(coef) = gram.lu().solve(&(basis.transpose() * a_vec)) {
                let lead = &basis * coef;
                if lead.norm() > 0.0 {
                    candidates.push(lead.normalize());
                }
            }
            candidates.extend(basis.column_iter().map(|c| c.into_owned()));
            let mut chosen: Vec<DVector<f64>> = Vec::with_capacity(end - k);
            for mut v in candidates {
                if chosen.len() == end - k {
                    break;
                }
                for u in &chosen {
                    let au = a_mat * u;
                    v -= u * (v.dot(&au) / u.dot(&au));
                }
                if v.norm() > 1e-8 {
                    chosen.push(v.normalize());
                }
            }
            for (j, v) in chosen.iter().enumerate() {
                vectors.set_column(k + j, v);
            }
        }
        k = end;
    }
}

fn fix_column_sign(m: &mut DMatrix<f64>, k: usize) {
    let mut best = 0;
    for i in 1..m.nrows() {
        if m[(i, k)].abs() > m[(best, k)].abs() {
            best = i;
        }
    }
    if m[(best, k)] < 0.0 {
        let col = -m.column(k);
        m.set_column(k, &col);
    }
}

fn diagonal_data(
    r: &DMatrix<f64>,
    a_mat: &DMatrix<f64>,
    a_vec: &DVector<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let n = r.ncols();
    let p = (0..n)
        .map(|k| {
            let c = r.column(k);
            c.dot(&(a_mat * c))
        })
        .collect();
    let b = (0..n).map(|k| a_vec.dot(&r.column(k))).collect();
    (p, b)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn default_pin(a_vec: &DVector<f64>) -> usize {
    let n = a_vec.len();
    let amax = a_vec.amax();
    if a_vec[n - 1].abs() > 1e-8 * amax || amax == 0.0 {
        n - 1
    } else {
        a_vec.iamax()
    }
}

/// The seed puts `D` at infinity when `A⁻¹a` has no weight on the pinned axis;
/// move the pin to the axis where it has the most.
fn seed_pin(a_mat: &DMatrix<f64>, a_vec: &DVector<f64>, pinned: usize) -> usize {
    let Some(w) = a_mat.clone().lu().solve(a_vec) else {
        return pinned;
    };
    if w[pinned].abs() > 1e-8 * w.amax() {
        return pinned;
    }
    let tiny = 1e-14 * a_vec.amax().max(f64::MIN_POSITIVE);
    (0..a_vec.len())
        .filter(|&i| a_vec[i].abs() > tiny)
        .max_by(|&i, &j| w[i].abs().total_cmp(&w[j].abs()))
        .unwrap_or(pinned)
}

/// Closed-form root: `A⁻¹a` must itself be an eigenvector of `D·A`, which gives
/// `d_i = λ (A⁻¹a)_i / a_i`. Returns the free entries, or `None` when an axis
/// with zero index loading still couples to the hedge direction.
pub fn direction_seed(
    a_mat: &DMatrix<f64>,
    a_vec: &DVector<f64>,
    pinned: usize,
    fill: &[f64],
) -> Option<Vec<f64>> {
    let w = a_mat.clone().lu().solve(a_vec)?;
    let n = a_vec.len();
    let tiny = 1e-14 * a_vec.amax().max(f64::MIN_POSITIVE);
    if a_vec[pinned].abs() <= tiny || w[pinned] == 0.0 {
        return None;
    }
    let lambda = -a_vec[pinned] / w[pinned];
    let mut free = Vec::with_capacity(n - 1);
    let mut j = 0;
    for i in 0..n {
        if i == pinned {
            continue;
        }
        if a_vec[i].abs() <= tiny {
            if w[i].abs() > 1e-10 * w.amax() {
                return None;
            }
            free.push(fill[j]);
        } else {
            free.push(lambda * w[i] / a_vec[i]);
        }
        j += 1;
    }
    Some(free)
}

fn residual_norm(e: &ResidualEval) -> f64 {
    e.c.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton iteration with a forward-difference Jacobian. Returns the last
/// accepted point, its residual evaluation and the iteration count; `Err` only
/// if the starting point cannot be evaluated.
fn newton(
    start: Vec<f64>,
    a_mat: &DMatrix<f64>,
    a_vec: &DVector<f64>,
    pinned: usize,
    opts: &FactorizeOptions,
) -> Result<(Vec<f64>, ResidualEval, usize, bool), FactorizeError> {
    let mut d = start;
    let mut eval = residual_map_pinned(&d, a_mat, a_vec, pinned)?;
    let m = d.len();
    for it in 0..opts.max_iterations {
        if max_abs(&eval.c) <= opts.tolerance {
            return Ok((d, eval, it, true));
        }
        let mut jac = DMatrix::zeros(m, m);
        for k in 0..m {
            let h = 1e-7 * d[k].abs().max(1.0);
            let mut dk = d.clone();
            dk[k] += h;
            let ek = match residual_map_pinned(&dk, a_mat, a_vec, pinned) {
                Ok(e) => e,
                Err(_) => return Ok((d, eval, it, false)),
            };
            for i in 0..m {
                jac[(i, k)] = (ek.c[i] - eval.c[i]) / h;
            }
        }
        let rhs = -DVector::from_vec(eval.c.clone());
        let step = match jac.svd(true, true).solve(&rhs, 1e-14) {
            Ok(s) => s,
            Err(_) => return Ok((d, eval, it, false)),
        };
        let base = residual_norm(&eval);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-10 {
            let trial: Vec<f64> = d.iter().zip(step.iter()).map(|(x, s)| x + t * s).collect();
            if let Ok(e) = residual_map_pinned(&trial, a_mat, a_vec, pinned) {
                if residual_norm(&e) < base {
                    accepted = Some((trial, e));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((nd, ne)) => {
                d = nd;
                eval = ne;
            }
            None => return Ok((d, eval, it, false)),
        }
    }
    let ok = max_abs(&eval.c) <= opts.tolerance;
    Ok((d, eval, opts.max_iterations, ok))
}

/// Finds `D` and `R` and assembles the factorized system.
pub fn build_transform(
    a_mat: &DMatrix<f64>,
    a_vec: &DVector<f64>,
    opts: &FactorizeOptions,
) -> Result<FactorizedSystem, FactorizeError> {
    let n = a_vec.len();
    let d_init = opts
        .d_init
        .clone()
        .unwrap_or_else(|| vec![0.01; n.saturating_sub(1)]);
    check_dims(a_mat, a_vec, d_init.len())?;

    let spectrum = SymmetricEigen::new(a_mat.clone()).eigenvalues;
    let lo = spectrum.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = spectrum.iter().copied().fold(0.0, f64::max);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > opts.max_condition {
        return Err(FactorizeError::Stiff {
            condition,
            limit: opts.max_condition,
        });
    }

    let mut pinned = opts.pinned.unwrap_or_else(|| default_pin(a_vec)).min(n - 1);
    let (mut eval, mut iterations, mut start) = {
        let (_, e, it, ok) = newton(d_init.clone(), a_mat, a_vec, pinned, opts)?;
        (
            e,
            it,
            if ok {
                Some(RootStart::InitialGuess)
            } else {
                None
            },
        )
    };
    if start.is_none() && opts.direction_seed_fallback {
        let seed_pin = if opts.pinned.is_some() {
            pinned
        } else {
            seed_pin(a_mat, a_vec, pinned)
        };
        if let Some(seed) = direction_seed(a_mat, a_vec, seed_pin, &d_init) {
            let (_, e, it, ok) = newton(seed, a_mat, a_vec, seed_pin, opts)?;
            if ok {
                eval = e;
                iterations += it;
                start = Some(RootStart::DirectionSeed);
                pinned = seed_pin;
            }
        }
    }
    let Some(start) = start else {
        return Err(FactorizeError::NoConvergence {
            iterations,
            residual: max_abs(&eval.c),
        });
    };

    let (p, b) = diagonal_data(&eval.r, a_mat, a_vec);
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(FactorizeError::NonPositiveDiffusion { index, value });
    }
    Ok(FactorizedSystem {
        d: eval.d,
        pinned,
        r: eval.r,
        lambda: eval.lambda,
        beta: b[0] * b[0],
        residual: max_abs(&b[1..]),
        p,
        b,
        iterations,
        start,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport {
    pub max_off_diagonal: f64,
    pub off_diagonal_limit: f64,
    pub residual: f64,
    pub residual_limit: f64,
    pub passed: bool,
}

/// Recomputes `Rᵀ A R` and `a·R` from scratch and checks them.
pub fn verify_factorization(
    fs: &FactorizedSystem,
    a_mat: &DMatrix<f64>,
    a_vec: &DVector<f64>,
    residual_limit: f64,
) -> FactorizationReport {
    let rar = fs.r.transpose() * a_mat * &fs.r;
    let max_off_diagonal = linalg::max_off_diagonal(&rar);
    let off_diagonal_limit = 1e-8 * linalg::norm_inf(a_mat);
    let b = a_vec.transpose() * &fs.r;
    let residual = b.iter().skip(1).fold(0.0f64, |m, x| m.max(x.abs()));
    FactorizationReport {
        max_off_diagonal,
        off_diagonal_limit,
        residual,
        residual_limit,
        passed: max_off_diagonal <= off_diagonal_limit && residual <= residual_limit,
    }
}
