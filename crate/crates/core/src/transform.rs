//! Coordinate changes between log-moneyness `z` and factorized coordinates `u`,
//! plus the terminal data of the transformed value function.
//!
//! With `s(τ) = ∫_{T−τ}^{T} μ̂(t) dt` the shifted variable `w = z + s(τ)` removes
//! the first-order terms, and `u = Rᵀ w` diagonalizes the diffusion.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{effective_drifts, MarketError, MarketModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("transformation matrix is singular (|det R| = {det:e})")]
    Singular { det: f64 },
    #[error("expected a point of dimension {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// Whether the claim is bought (payoff received) or sold (payoff delivered).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Buy,
    Sell,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy => 1.0,
            Side::Sell => -1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoordinateMap {
    r: DMatrix<f64>,
    r_inv_t: DMatrix<f64>,
    model: MarketModel,
}

impl CoordinateMap {
    pub fn new(r: &DMatrix<f64>, model: &MarketModel) -> Result<Self, TransformError> {
        let det = r.determinant();
        if !(det.abs() > 1e-12) {
            return Err(TransformError::Singular { det });
        }
        let r_inv_t = r
            .transpose()
            .try_inverse()
            .ok_or(TransformError::Singular { det })?;
        Ok(Self {
            r: r.clone(),
            r_inv_t,
            model: model.clone(),
        })
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    /// Accumulated drift `s(τ) = τ·M(τ)` in `z`-space.
    pub fn drift_shift(&self, tau: f64) -> Result<DVector<f64>, TransformError> {
        Ok(DVector::from_vec(
            effective_drifts(&self.model, tau)?.shift(),
        ))
    }

    fn check(&self, x: &[f64]) -> Result<(), TransformError> {
        if x.len() != self.dim() {
            return Err(TransformError::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `u = Rᵀ (z + s(τ))`.
    pub fn to_factorized(&self, z: &[f64], tau: f64) -> Result<Vec<f64>, TransformError> {
        self.check(z)?;
        let w = DVector::from_column_slice(z) + self.drift_shift(tau)?;
        Ok((self.r.transpose() * w).as_slice().to_vec())
    }

    /// `z = R⁻ᵀ u − s(τ)`.
    pub fn from_factorized(&self, u: &[f64], tau: f64) -> Result<Vec<f64>, TransformError> {
        self.check(u)?;
        let w = &self.r_inv_t * DVector::from_column_slice(u);
        Ok((w - self.drift_shift(tau)?).as_slice().to_vec())
    }

    /// `R⁻ᵀ u` without the drift shift (the map used at `τ = 0`).
    pub fn unrotate(&self, u: &[f64]) -> Vec<f64> {
        (&self.r_inv_t * DVector::from_column_slice(u))
            .as_slice()
            .to_vec()
    }

    /// Chain rule for gradients: `∇_z = R ∇_u`.
    pub fn gradient_to_z(&self, grad_u: &[f64]) -> Vec<f64> {
        (&self.r * DVector::from_column_slice(grad_u))
            .as_slice()
            .to_vec()
    }
}

/// Net position value at maturity in currency: `K_0 e^{z_0⁻} − Σ α_i K_i e^{z_i⁻}`,
/// signed by `side`.
pub fn terminal_payoff(z: &[f64], alpha: &[f64], model: &MarketModel, side: Side) -> f64 {
    let k = &model.strikes;
    let mut v = k[0] * z[0].min(0.0).exp();
    for (i, a) in alpha.iter().enumerate() {
        v -= a * k[i + 1] * z[i + 1].min(0.0).exp();
    }
    side.sign() * v
}

/// `Φ₀(z) = exp(−γ · payoff(z))`.
pub fn terminal_condition(z: &[f64], alpha: &[f64], model: &MarketModel, side: Side) -> f64 {
    (-model.risk_aversion * terminal_payoff(z, alpha, model, side)).exp()
}

/// Extreme values of `log Φ₀` over all `z`; the payoff is monotone in each
/// `e^{z_i⁻} ∈ (0, 1]`, so the extremes sit at the corners.
pub fn terminal_log_bounds(alpha: &[f64], model: &MarketModel, side: Side) -> (f64, f64) {
    let g = model.risk_aversion * side.sign();
    let k = &model.strikes;
    let mut lo = 0.0;
    let mut hi = 0.0;
    let mut add = |c: f64| {
        // contribution c·x with x ∈ [0, 1]
        lo += c.min(0.0);
        hi += c.max(0.0);
    };
    add(-g * k[0]);
    for (i, a) in alpha.iter().enumerate() {
        add(g * a * k[i + 1]);
    }
    (lo, hi)
}
