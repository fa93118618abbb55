//! Market description: the illiquid asset `Y_0`, the `N` proxy underlyings
//! `Y_1..Y_N`, the traded index and the investor's risk aversion.
//!
//! Everything downstream (factorization, terminal data, the PDE solvers and the
//! pricer) reads from an immutable [`MarketModel`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Eigenvalue floor for correlation matrices.
pub const PSD_FLOOR: f64 = -1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("{field}: expected {expected} entries, found {found}")]
    Length {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{field}[{index}] = {value} must be {requirement}")]
    Value {
        field: &'static str,
        index: usize,
        value: f64,
        requirement: &'static str,
    },
    #[error("corr_yy is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("corr_yy diagonal entry {index} is {value}, expected 1")]
    Diagonal { index: usize, value: f64 },
    #[error("{matrix} is not positive semi-definite: smallest eigenvalue {eigenvalue:e} < {PSD_FLOOR:e}")]
    NotPsd {
        matrix: &'static str,
        eigenvalue: f64,
    },
    #[error("time {tau} outside [0, {maturity}]")]
    TimeOutOfRange { tau: f64, maturity: f64 },
    #[error("term structure: {0}")]
    TermStructure(String),
}

/// Piecewise-constant function of calendar time.
///
/// `values[k]` applies on `(breaks[k-1], breaks[k]]`; the first value also covers
/// everything before the first break and the last value everything after the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TermStructure {
    Constant(f64),
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl TermStructure {
    pub fn validate(&self) -> Result<(), MarketError> {
        match self {
            TermStructure::Constant(v) if !v.is_finite() => {
                Err(MarketError::TermStructure(format!("non-finite value {v}")))
            }
            TermStructure::Constant(_) => Ok(()),
            TermStructure::Piecewise { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(MarketError::TermStructure(format!(
                        "{} breaks need {} values, found {}",
                        breaks.len(),
                        breaks.len() + 1,
                        values.len()
                    )));
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) || breaks.iter().any(|b| !b.is_finite())
                {
                    return Err(MarketError::TermStructure(
                        "breaks must be finite and strictly increasing".into(),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(MarketError::TermStructure("non-finite value".into()));
                }
                Ok(())
            }
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            TermStructure::Constant(v) => *v,
            TermStructure::Piecewise { breaks, values } => {
                let k = breaks.iter().take_while(|&&b| t > b).count();
                values[k]
            }
        }
    }

    /// Exact integral over `[t0, t1]`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        match self {
            TermStructure::Constant(v) => v * (t1 - t0),
            TermStructure::Piecewise { breaks, values } => {
                if t1 <= t0 {
                    return 0.0;
                }
                let mut total = 0.0;
                let mut lo = t0;
                for (k, &value) in values.iter().enumerate() {
                    let hi = breaks.get(k).copied().unwrap_or(f64::INFINITY).min(t1);
                    if hi > lo {
                        total += value * (hi - lo);
                        lo = hi;
                    }
                    if lo >= t1 {
                        break;
                    }
                }
                total
            }
        }
    }
}

/// Inputs of the pricing problem. Index `0` of every per-asset vector is the
/// illiquid asset, indices `1..=N` are the proxies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    pub spots: Vec<f64>,
    pub strikes: Vec<f64>,
    pub drifts: Vec<TermStructure>,
    pub vols: Vec<f64>,
    pub corr_yy: Vec<Vec<f64>>,
    pub corr_xy: Vec<f64>,
    pub index_drift: f64,
    pub index_vol: f64,
    pub rate: f64,
    pub maturity: f64,
    pub risk_aversion: f64,
    /// Market prices of the proxy options, `N` entries.
    pub proxy_prices: Vec<f64>,
}

impl MarketModel {
    /// Number of static-hedge proxies `N`.
    pub fn n_proxies(&self) -> usize {
        self.spots.len().saturating_sub(1)
    }

    /// Number of option underlyings `N + 1`.
    pub fn dim(&self) -> usize {
        self.spots.len()
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        let n = self.dim();
        if n == 0 {
            return Err(MarketError::Length {
                field: "spots",
                expected: 1,
                found: 0,
            });
        }
        let lengths: [(&'static str, usize, usize); 6] = [
            ("strikes", self.strikes.len(), n),
            ("drifts", self.drifts.len(), n),
            ("vols", self.vols.len(), n),
            ("corr_yy", self.corr_yy.len(), n),
            ("corr_xy", self.corr_xy.len(), n),
            ("proxy_prices", self.proxy_prices.len(), n - 1),
        ];
        for (field, found, expected) in lengths {
            if found != expected {
                return Err(MarketError::Length {
                    field,
                    expected,
                    found,
                });
            }
        }
        for (i, row) in self.corr_yy.iter().enumerate() {
            if row.len() != n {
                return Err(MarketError::Length {
                    field: "corr_yy row",
                    expected: n,
                    found: row.len(),
                });
            }
            let _ = i;
        }
        positive("spots", &self.spots)?;
        for (i, &k) in self.strikes.iter().enumerate() {
            if !(k.is_finite() && k >= 0.0) {
                return Err(MarketError::Value {
                    field: "strikes",
                    index: i,
                    value: k,
                    requirement: "finite and >= 0",
                });
            }
        }
        positive("vols", &self.vols)?;
        for d in &self.drifts {
            d.validate()?;
        }
        for (i, &p) in self.proxy_prices.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(MarketError::Value {
                    field: "proxy_prices",
                    index: i + 1,
                    value: p,
                    requirement: "finite and >= 0",
                });
            }
        }
        for (i, &r) in self.corr_xy.iter().enumerate() {
            if !(r.is_finite() && r.abs() <= 1.0) {
                return Err(MarketError::Value {
                    field: "corr_xy",
                    index: i,
                    value: r,
                    requirement: "in [-1, 1]",
                });
            }
        }
        let scalars = [
            ("index_vol", self.index_vol, self.index_vol > 0.0),
            ("maturity", self.maturity, self.maturity > 0.0),
            (
                "risk_aversion",
                self.risk_aversion,
                self.risk_aversion > 0.0,
            ),
            ("index_drift", self.index_drift, true),
            ("rate", self.rate, true),
        ];
        for (field, value, ok) in scalars {
            if !(value.is_finite() && ok) {
                return Err(MarketError::Value {
                    field,
                    index: 0,
                    value,
                    requirement: "finite (and positive where applicable)",
                });
            }
        }
        for i in 0..n {
            let d = self.corr_yy[i][i];
            if (d - 1.0).abs() > 1e-12 {
                return Err(MarketError::Diagonal { index: i, value: d });
            }
            for j in 0..i {
                let (a, b) = (self.corr_yy[i][j], self.corr_yy[j][i]);
                if !(a.is_finite() && b.is_finite()) || (a - b).abs() > 1e-12 {
                    return Err(MarketError::NotSymmetric { row: i, col: j });
                }
            }
        }
        let min_yy = min_eigenvalue(&self.corr_yy_matrix());
        if min_yy < PSD_FLOOR {
            return Err(MarketError::NotPsd {
                matrix: "corr_yy",
                eigenvalue: min_yy,
            });
        }
        let min_full = min_eigenvalue(&self.full_correlation());
        if min_full < PSD_FLOOR {
            return Err(MarketError::NotPsd {
                matrix: "full (index + assets) correlation",
                eigenvalue: min_full,
            });
        }
        Ok(())
    }

    pub fn corr_yy_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.corr_yy[i][j])
    }

    /// `(N+2) x (N+2)` correlation of (index, Y_0, ..., Y_N).
    pub fn full_correlation(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
            (0, 0) => 1.0,
            (0, j) => self.corr_xy[j - 1],
            (i, 0) => self.corr_xy[i - 1],
            (i, j) => self.corr_yy[i - 1][j - 1],
        })
    }

    /// Log-moneyness `z_i = ln(y_i / K_i)` at the current spots. A zero strike
    /// is a claim that pays nothing; its coordinate is reported as `0`.
    pub fn spot_log_moneyness(&self) -> Vec<f64> {
        self.spots
            .iter()
            .zip(&self.strikes)
            .map(|(y, &k)| if k == 0.0 { 0.0 } else { (y / k).ln() })
            .collect()
    }

    pub fn with_risk_aversion(&self, gamma: f64) -> Self {
        let mut m = self.clone();
        m.risk_aversion = gamma;
        m
    }
}

fn positive(field: &'static str, v: &[f64]) -> Result<(), MarketError> {
    for (i, &x) in v.iter().enumerate() {
        if !(x.is_finite() && x > 0.0) {
            return Err(MarketError::Value {
                field,
                index: i,
                value: x,
                requirement: "finite and > 0",
            });
        }
    }
    Ok(())
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Index Sharpe ratio `η_x = (μ_x − r) / σ_x`.
pub fn sharpe_ratio(model: &MarketModel) -> f64 {
    (model.index_drift - model.rate) / model.index_vol
}

/// Covariance-form matrix `A_ij = ρ_ij σ_i σ_j` and the index-loading vector
/// `a_i = ρ_{x,y_i} σ_i`.
pub fn build_quadratic_data(model: &MarketModel) -> (DMatrix<f64>, DVector<f64>) {
    let n = model.dim();
    let s = &model.vols;
    let a = DMatrix::from_fn(n, n, |i, j| model.corr_yy[i][j] * s[i] * s[j]);
    let v = DVector::from_fn(n, |i, _| model.corr_xy[i] * s[i]);
    (a, v)
}

/// Drift-adjusted log-drifts and their averages over the last `tau` years.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveDrifts {
    /// `μ̂_i(t) = μ_i(t) − σ_i²/2 − η_x ρ_{x,y_i} σ_i` as term structures.
    pub adjusted: Vec<TermStructure>,
    /// `M_i`, the average of `μ̂_i` over the window.
    pub average: Vec<f64>,
    pub tau: f64,
}

impl EffectiveDrifts {
    /// `τ · M`, the accumulated log-drift over the window.
    pub fn shift(&self) -> Vec<f64> {
        self.average.iter().map(|m| m * self.tau).collect()
    }
}

/// Computes `μ̂` and its average over the window of length `tau` that ends at
/// maturity, i.e. `M_i = (1/τ) ∫_{T−τ}^{T} μ̂_i(t) dt`.
///
/// At time-to-maturity `τ` the backward equation sees the calendar-time drift
/// `μ̂(T − τ)`, so this window is the one that accumulates exactly. For `τ = T`
/// it is the full `[0, T]` average. For `τ = 0` the limit `μ̂_i(T)` is returned.
pub fn effective_drifts(model: &MarketModel, tau: f64) -> Result<EffectiveDrifts, MarketError> {
    let t = model.maturity;
    if !(0.0..=t).contains(&tau) || tau.is_nan() {
        return Err(MarketError::TimeOutOfRange { tau, maturity: t });
    }
    let eta = sharpe_ratio(model);
    let adjusted: Vec<TermStructure> = model
        .drifts
        .iter()
        .enumerate()
        .map(|(i, mu)| {
            let shift = -0.5 * model.vols[i].powi(2) - eta * model.corr_xy[i] * model.vols[i];
            match mu {
                TermStructure::Constant(v) => TermStructure::Constant(v + shift),
                TermStructure::Piecewise { breaks, values } => TermStructure::Piecewise {
                    breaks: breaks.clone(),
                    values: values.iter().map(|v| v + shift).collect(),
                },
            }
        })
        .collect();
    let average = adjusted
        .iter()
        .map(|m| {
            if tau == 0.0 {
                m.value_at(t)
            } else {
                m.integral(t - tau, t) / tau
            }
        })
        .collect();
    Ok(EffectiveDrifts {
        adjusted,
        average,
        tau,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// The four-asset market used throughout the worked factorization example.
    pub fn example_market() -> MarketModel {
        MarketModel {
            spots: vec![1.0; 4],
            strikes: vec![1.0; 4],
            drifts: vec![TermStructure::Constant(0.05); 4],
            vols: vec![0.3, 0.25, 0.35, 0.5],
            corr_yy: vec![
                vec![1.0, 0.9, 0.6, 0.5],
                vec![0.9, 1.0, 0.75, 0.7],
                vec![0.6, 0.75, 1.0, 0.6],
                vec![0.5, 0.7, 0.6, 1.0],
            ],
            corr_xy: vec![0.23, 0.34, 0.45, 0.4],
            index_drift: 0.08,
            index_vol: 0.25,
            rate: 0.03,
            maturity: 1.0,
            risk_aversion: 0.5,
            proxy_prices: vec![0.9; 3],
        }
    }

    #[test]
    fn sharpe_ratio_cases() {
        let mut m = example_market();
        assert!((sharpe_ratio(&m) - 0.2).abs() < 1e-15);
        m.index_drift = 0.03;
        m.rate = 0.08;
        assert!((sharpe_ratio(&m) + 0.2).abs() < 1e-15);
        m.index_drift = m.rate;
        assert_eq!(sharpe_ratio(&m), 0.0);
    }

    #[test]
    fn quadratic_data_entries() {
        let m = example_market();
        let (a, v) = build_quadratic_data(&m);
        assert!((a[(0, 0)] - 0.09).abs() < 1e-15);
        assert!((v[0] - 0.069).abs() < 1e-15);
        assert_eq!(a, a.transpose());

        let mut id = example_market();
        id.vols = vec![1.0; 4];
        id.corr_yy = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let (a, _) = build_quadratic_data(&id);
        assert_eq!(a, DMatrix::identity(4, 4));
    }

    #[test]
    fn effective_drift_cases() {
        let mut m = example_market();
        m.drifts = vec![TermStructure::Constant(m.rate); 4];
        m.corr_xy = vec![0.0; 4];
        let e = effective_drifts(&m, 0.5).unwrap();
        for i in 0..4 {
            assert!((e.average[i] - (m.rate - 0.5 * m.vols[i].powi(2))).abs() < 1e-15);
        }

        // constant integrand: M independent of tau
        let m = example_market();
        let a = effective_drifts(&m, 0.3).unwrap().average;
        let b = effective_drifts(&m, 1.0).unwrap().average;
        let c = effective_drifts(&m, 0.0).unwrap().average;
        for i in 0..4 {
            assert!((a[i] - b[i]).abs() < 1e-15 && (a[i] - c[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn piecewise_average() {
        let mut m = example_market();
        m.maturity = 2.0;
        m.corr_xy = vec![0.0; 4];
        let s = 0.5 * m.vols[0].powi(2);
        m.drifts[0] = TermStructure::Piecewise {
            breaks: vec![1.0],
            values: vec![0.1 + s, 0.2 + s],
        };
        let e = effective_drifts(&m, 2.0).unwrap();
        assert!((e.average[0] - 0.15).abs() < 1e-14);
        assert!(effective_drifts(&m, -0.1).is_err());
        assert!(effective_drifts(&m, 2.1).is_err());
    }

    #[test]
    fn shift_is_continuous_and_piecewise_linear() {
        let mut m = example_market();
        m.maturity = 3.0;
        m.drifts[1] = TermStructure::Piecewise {
            breaks: vec![1.0, 2.0],
            values: vec![0.3, -0.1, 0.05],
        };
        let f = |tau: f64| effective_drifts(&m, tau).unwrap().shift()[1];
        // continuity across the kinks at tau = 1 and tau = 2
        for k in [1.0, 2.0] {
            assert!((f(k - 1e-9) - f(k + 1e-9)).abs() < 1e-8);
        }
        // linear between kinks: second difference vanishes
        for &t in &[0.3, 0.6, 1.4, 1.7, 2.4] {
            let h = 0.05;
            assert!((f(t + h) - 2.0 * f(t) + f(t - h)).abs() < 1e-13);
        }
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let mut m = example_market();
        assert!(m.validate().is_ok());
        m.corr_yy[0][1] = 0.99;
        m.corr_yy[1][0] = 0.99;
        m.corr_yy[0][2] = -0.9;
        m.corr_yy[2][0] = -0.9;
        assert!(matches!(m.validate(), Err(MarketError::NotPsd { .. })));

        let mut m = example_market();
        m.corr_xy = vec![0.99, -0.99, 0.99, 0.0];
        assert!(matches!(m.validate(), Err(MarketError::NotPsd { .. })));

        let mut m = example_market();
        m.corr_xy[2] = 1.2;
        assert!(matches!(m.validate(), Err(MarketError::Value { .. })));

        let mut m = example_market();
        m.proxy_prices.pop();
        assert!(matches!(m.validate(), Err(MarketError::Length { .. })));
    }

    #[test]
    fn term_structure_integral_matches_value_at() {
        let ts = TermStructure::Piecewise {
            breaks: vec![0.5, 1.25],
            values: vec![1.0, 2.0, -3.0],
        };
        ts.validate().unwrap();
        // midpoint rule on a fine grid is exact except in cells straddling a break
        let n = 4000;
        let (a, b) = (0.1, 2.0);
        let h = (b - a) / n as f64;
        let approx: f64 = (0..n)
            .map(|k| ts.value_at(a + (k as f64 + 0.5) * h) * h)
            .sum();
        assert!((approx - ts.integral(a, b)).abs() < 2.0 * 5.0 * h);
        assert!((ts.integral(a, b) - (0.4 + 1.5 - 2.25)).abs() < 1e-14);
    }
}
