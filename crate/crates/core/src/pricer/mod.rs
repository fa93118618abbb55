//! Indifference prices, static and dynamic hedges, and implied risk aversion.

mod nelder_mead;
mod oracle;

pub use nelder_mead::{maximize, NelderMeadOptions, NelderMeadResult};
pub use oracle::{
    capped_exponential_moment, marginal_price, single_claim_monte_carlo, single_claim_oracle,
    MonteCarloPrice,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factorizer::{
    build_transform, verify_factorization, FactorizationReport, FactorizeError, FactorizeOptions,
    FactorizedSystem,
};
use crate::grid::GridField;
use crate::market::{build_quadratic_data, sharpe_ratio, MarketError, MarketModel};
use crate::solver::{
    evolve, readout, solution_axes, terminal_field, EvolveDiagnostics, SolverConfig, SolverError,
};
use crate::transform::{terminal_log_bounds, CoordinateMap, Side, TransformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("market: {0}")]
    Market(#[from] MarketError),
    #[error("factorization: {0}")]
    Factorize(#[from] FactorizeError),
    #[error(
        "factorization check failed: off-diagonal {:.3e} (limit {:.3e}), residual {:.3e} (limit {:.3e})",
        .0.max_off_diagonal, .0.off_diagonal_limit, .0.residual, .0.residual_limit
    )]
    Verification(FactorizationReport),
    #[error("coordinates: {0}")]
    Transform(#[from] TransformError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("static hedge needs {expected} weights, got {found}")]
    AlphaLength { expected: usize, found: usize },
    #[error(
        "observed price {observed} is outside the attainable range [{low}, {high}] \
         for risk aversion in [{gamma_lo}, {gamma_hi}]"
    )]
    OutOfBracket {
        observed: f64,
        low: f64,
        high: f64,
        gamma_lo: f64,
        gamma_hi: f64,
    },
    #[error("{0}")]
    Unsupported(String),
}

/// Merton value of cash `x` with time-to-maturity `tau` and no claim:
/// `V⁰ = −exp(−γ x e^{rτ} − ½ η_x² τ)`.
pub fn merton_value(x: f64, tau: f64, model: &MarketModel) -> f64 {
    let eta = sharpe_ratio(model);
    -(-model.risk_aversion * x * (model.rate * tau).exp() - 0.5 * eta * eta * tau).exp()
}

/// One PDE solve at a fixed static hedge.
#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub price: f64,
    pub log_phi: f64,
    pub field: GridField,
    pub u_star: Vec<f64>,
    pub diagnostics: EvolveDiagnostics,
}

impl PdeSolution {
    pub fn phi_at_spot(&self) -> f64 {
        self.log_phi.exp()
    }
}

/// A model with its factorization, ready for repeated solves.
#[derive(Debug, Clone)]
pub struct Pricer {
    model: MarketModel,
    system: FactorizedSystem,
    map: CoordinateMap,
    config: SolverConfig,
    side: Side,
    u_star: Vec<f64>,
    a_mat: DMatrix<f64>,
    a_vec: DVector<f64>,
}

impl Pricer {
    pub fn new(
        model: &MarketModel,
        config: &SolverConfig,
        side: Side,
    ) -> Result<Self, PricingError> {
        Self::with_options(model, config, side, &FactorizeOptions::default())
    }

    pub fn with_options(
        model: &MarketModel,
        config: &SolverConfig,
        side: Side,
        opts: &FactorizeOptions,
    ) -> Result<Self, PricingError> {
        model.validate()?;
        let (a_mat, a_vec) = build_quadratic_data(model);
        let system = build_transform(&a_mat, &a_vec, opts)?;
        Self::with_system(model, system, config, side)
    }

    /// Uses a given factorization, e.g. one with rescaled columns.
    pub fn with_system(
        model: &MarketModel,
        system: FactorizedSystem,
        config: &SolverConfig,
        side: Side,
    ) -> Result<Self, PricingError> {
        model.validate()?;
        config.validate(model.dim())?;
        let (a_mat, a_vec) = build_quadratic_data(model);
        let scale = system.p.iter().copied().fold(0.0, f64::max).sqrt();
        let report = verify_factorization(&system, &a_mat, &a_vec, 1e-9 * scale.max(1e-300));
        if !report.passed {
            return Err(PricingError::Verification(report));
        }
        let map = CoordinateMap::new(&system.r, model)?;
        let u_star = map.to_factorized(&model.spot_log_moneyness(), model.maturity)?;
        Ok(Self {
            model: model.clone(),
            system,
            map,
            config: config.clone(),
            side,
            u_star,
            a_mat,
            a_vec,
        })
    }

    pub fn model(&self) -> &MarketModel {
        &self.model
    }

    pub fn system(&self) -> &FactorizedSystem {
        &self.system
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn quadratic_data(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.a_mat, &self.a_vec)
    }

    /// Same pricer with different solver settings.
    pub fn with_config(&self, config: &SolverConfig) -> Result<Self, PricingError> {
        config.validate(self.model.dim())?;
        let mut p = self.clone();
        p.config = config.clone();
        Ok(p)
    }

    fn check_alpha(&self, alpha: &[f64]) -> Result<(), PricingError> {
        let n = self.model.n_proxies();
        if alpha.len() != n {
            return Err(PricingError::AlphaLength {
                expected: n,
                found: alpha.len(),
            });
        }
        Ok(())
    }

    /// `g = −(s/γ) e^{−rT} log Φ + Σ α_i p_{Y,i}`, `s` the side sign.
    pub fn price_from_log_phi(&self, log_phi: f64, alpha: &[f64]) -> f64 {
        let m = &self.model;
        let hedge_cost: f64 = alpha.iter().zip(&m.proxy_prices).map(|(a, p)| a * p).sum();
        -self.side.sign() / m.risk_aversion * (-m.rate * m.maturity).exp() * log_phi + hedge_cost
    }

    /// Price bounds implied by the maximum principle on `Φ`.
    pub fn price_bounds(&self, alpha: &[f64]) -> (f64, f64) {
        let (lo, hi) = terminal_log_bounds(alpha, &self.model, self.side);
        let a = self.price_from_log_phi(lo, alpha);
        let b = self.price_from_log_phi(hi, alpha);
        (a.min(b), a.max(b))
    }

    pub fn solve(&self, alpha: &[f64]) -> Result<PdeSolution, PricingError> {
        self.check_alpha(alpha)?;
        let t = self.model.maturity;
        let axes = solution_axes(&self.system, &self.u_star, t, &self.config);
        let phi0 = terminal_field(&self.model, &self.map, axes, alpha, self.side)?;
        let (field, diagnostics) = evolve(&phi0, &self.system, t, &self.config)?;
        let log_phi = readout(&field, &self.u_star)?;
        Ok(PdeSolution {
            price: self.price_from_log_phi(log_phi, alpha),
            log_phi,
            field,
            u_star: self.u_star.clone(),
            diagnostics,
        })
    }

    pub fn price(&self, alpha: &[f64]) -> Result<f64, PricingError> {
        Ok(self.solve(alpha)?.price)
    }

    /// Optimal index position at `t = 0`, in currency:
    /// `π* = e^{−rT}/(γ σ_x) · (η_x + Σ_i ρ_{x,y_i} σ_i ∂_{z_i} log Φ)`.
    ///
    /// The gradient is taken by central differences of the interpolated field
    /// in `u` and mapped back with `∇_z = R ∇_u`. It does not depend on wealth.
    pub fn dynamic_hedge(&self, solution: &PdeSolution) -> Result<f64, PricingError> {
        let field = &solution.field;
        let u = &solution.u_star;
        let mut grad_u = vec![0.0; u.len()];
        for (k, g) in grad_u.iter_mut().enumerate() {
            let h = field.spacing(k);
            let mut up = u.clone();
            let mut dn = u.clone();
            up[k] += h;
            dn[k] -= h;
            let fu = field.interpolate_log(&up).map_err(SolverError::from)?;
            let fd = field.interpolate_log(&dn).map_err(SolverError::from)?;
            *g = (fu - fd) / (2.0 * h);
        }
        let grad_z = self.map.gradient_to_z(&grad_u);
        Ok(dynamic_hedge_from_gradient(&self.model, &grad_z))
    }
}

/// `π*` for a given `∇_z log Φ` at the spot.
pub fn dynamic_hedge_from_gradient(model: &MarketModel, grad_log_phi: &[f64]) -> f64 {
    let eta = sharpe_ratio(model);
    let tilt: f64 = (0..model.dim())
        .map(|i| model.corr_xy[i] * model.vols[i] * grad_log_phi[i])
        .sum();
    (-model.rate * model.maturity).exp() / (model.risk_aversion * model.index_vol) * (eta + tilt)
}

/// Price and `Φ` at the spot for a fixed static hedge, buyer's side.
pub fn price_given_alpha(
    model: &MarketModel,
    alpha: &[f64],
    cfg: &SolverConfig,
) -> Result<(f64, f64), PricingError> {
    let s = Pricer::new(model, cfg, Side::Buy)?.solve(alpha)?;
    Ok((s.price, s.phi_at_spot()))
}

#[derive(Debug, Clone)]
pub struct PricingResult {
    pub price: f64,
    pub alpha: Vec<f64>,
    pub dynamic_hedge: f64,
    pub log_phi_at_spot: f64,
    pub diagnostics: EvolveDiagnostics,
    pub trace: Vec<(Vec<f64>, f64)>,
    pub converged: bool,
}

impl PricingResult {
    pub fn phi_at_spot(&self) -> f64 {
        self.log_phi_at_spot.exp()
    }
}

/// Maximizes `g(α)` by Nelder–Mead. With `search` set, the search runs on that
/// (cheaper) configuration and only the final `α*` is re-priced with the
/// pricer's own configuration.
pub fn optimize_static_hedge(
    pricer: &Pricer,
    alpha_init: &[f64],
    opts: &NelderMeadOptions,
    search: Option<&SolverConfig>,
) -> Result<PricingResult, PricingError> {
    let n = pricer.model().n_proxies();
    if n == 0 {
        return Err(PricingError::Unsupported(
            "static hedge needs at least one proxy".into(),
        ));
    }
    pricer.check_alpha(alpha_init)?;
    let coarse = match search {
        Some(cfg) => pricer.with_config(cfg)?,
        None => pricer.clone(),
    };
    let nm = maximize(|a| coarse.price(a), alpha_init, opts)?;
    let final_solution = pricer.solve(&nm.best)?;
    Ok(PricingResult {
        price: final_solution.price,
        alpha: nm.best.clone(),
        dynamic_hedge: pricer.dynamic_hedge(&final_solution)?,
        log_phi_at_spot: final_solution.log_phi,
        diagnostics: final_solution.diagnostics,
        trace: nm.trace,
        converged: nm.converged,
    })
}

/// Prices without optimizing, for a fixed `α`.
pub fn price_fixed(pricer: &Pricer, alpha: &[f64]) -> Result<PricingResult, PricingError> {
    let s = pricer.solve(alpha)?;
    Ok(PricingResult {
        price: s.price,
        alpha: alpha.to_vec(),
        dynamic_hedge: pricer.dynamic_hedge(&s)?,
        log_phi_at_spot: s.log_phi,
        diagnostics: s.diagnostics,
        trace: Vec::new(),
        converged: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpliedGammaOptions {
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    /// Relative width of the final bracket.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ImpliedGammaOptions {
    fn default() -> Self {
        Self {
            gamma_lo: 1e-3,
            gamma_hi: 20.0,
            tolerance: 1e-5,
            max_iterations: 100,
        }
    }
}

/// Risk aversion at which the buyer's price equals `observed`; `g` is
/// non-increasing in `γ`, so bisection on `log γ` applies.
pub fn implied_gamma(
    model: &MarketModel,
    alpha: &[f64],
    observed: f64,
    cfg: &SolverConfig,
    opts: &ImpliedGammaOptions,
) -> Result<f64, PricingError> {
    let g = |gamma: f64| -> Result<f64, PricingError> {
        Pricer::new(&model.with_risk_aversion(gamma), cfg, Side::Buy)?.price(alpha)
    };
    let (mut lo, mut hi) = (opts.gamma_lo, opts.gamma_hi);
    let (g_lo, g_hi) = (g(lo)?, g(hi)?);
    if !(observed <= g_lo && observed >= g_hi) {
        return Err(PricingError::OutOfBracket {
            observed,
            low: g_hi,
            high: g_lo,
            gamma_lo: lo,
            gamma_hi: hi,
        });
    }
    for _ in 0..opts.max_iterations {
        if hi / lo - 1.0 <= opts.tolerance {
            break;
        }
        let mid = (lo * hi).sqrt();
        if g(mid)? >= observed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::TermStructure;

    fn single(gamma: f64, rho: f64) -> MarketModel {
        MarketModel {
            spots: vec![10.0],
            strikes: vec![10.0],
            drifts: vec![TermStructure::Constant(0.06)],
            vols: vec![0.3],
            corr_yy: vec![vec![1.0]],
            corr_xy: vec![rho],
            index_drift: 0.07,
            index_vol: 0.2,
            rate: 0.0,
            maturity: 1.0,
            risk_aversion: gamma,
            proxy_prices: vec![],
        }
    }

    #[test]
    fn merton_cases() {
        let mut m = single(1.0, 0.0);
        m.index_drift = m.rate;
        assert_eq!(merton_value(0.0, 1.0, &m), -1.0);
        assert!((merton_value(1.0, 0.0, &m) + (-1.0f64).exp()).abs() < 1e-15);
        assert!(merton_value(2.0, 0.5, &m) > merton_value(1.0, 0.5, &m));
    }

    #[test]
    fn single_asset_matches_oracle() {
        let m = single(0.5, 0.5);
        let cfg = SolverConfig {
            nodes: vec![256],
            time_steps: 8,
            ..Default::default()
        };
        let g = Pricer::new(&m, &cfg, Side::Buy)
            .unwrap()
            .price(&[])
            .unwrap();
        let q = single_claim_oracle(&m).unwrap();
        assert!(((g - q) / q).abs() < 1e-3, "{g} vs {q}");
    }

    #[test]
    fn merton_demand_for_flat_phi() {
        let m = single(2.0, 0.3);
        let pi = dynamic_hedge_from_gradient(&m, &[0.0]);
        assert!((pi - sharpe_ratio(&m) / (2.0 * 0.2)).abs() < 1e-15);
        let m2 = m.with_risk_aversion(4.0);
        assert!(
            (dynamic_hedge_from_gradient(&m2, &[0.7]) * 2.0
                - dynamic_hedge_from_gradient(&m, &[0.7]))
            .abs()
                < 1e-15
        );
        let mut flat = m.clone();
        flat.index_drift = flat.rate;
        flat.corr_xy = vec![0.0];
        assert_eq!(dynamic_hedge_from_gradient(&flat, &[0.4]), 0.0);
    }

    #[test]
    fn sell_side_price_exceeds_buy_side() {
        let m = single(1.0, 0.3);
        let cfg = SolverConfig {
            nodes: vec![128],
            time_steps: 4,
            ..Default::default()
        };
        let bid = Pricer::new(&m, &cfg, Side::Buy)
            .unwrap()
            .price(&[])
            .unwrap();
        let ask = Pricer::new(&m, &cfg, Side::Sell)
            .unwrap()
            .price(&[])
            .unwrap();
        let mid = marginal_price(&m, 0).unwrap();
        assert!(bid < mid && mid < ask, "{bid} {mid} {ask}");
    }
}
