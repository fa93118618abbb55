//! Independent prices for a claim on a single asset.
//!
//! With one asset and the index, the hedged problem is solved by the power
//! transform in closed form:
//! `g = −e^{−rT}/(γκ) · log E[exp(−γκ G)]`, `κ = 1 − ρ²`, where the expectation
//! is under the drift-adjusted log-normal law of `Y_T`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::PricingError;
use crate::market::{effective_drifts, MarketModel};
use crate::quadrature::{gauss_hermite_normal, gauss_legendre};

/// Log-normal law of `log(Y_T / K)`: mean and standard deviation.
fn terminal_law(model: &MarketModel, asset: usize) -> Result<(f64, f64), PricingError> {
    let t = model.maturity;
    let m = effective_drifts(model, t)?.shift()[asset];
    let z0 = (model.spots[asset] / model.strikes[asset]).ln();
    Ok((z0 + m, model.vols[asset] * t.sqrt()))
}

fn single_asset_inputs(model: &MarketModel) -> Result<(f64, f64, f64, f64), PricingError> {
    model.validate()?;
    if model.n_proxies() != 0 {
        return Err(PricingError::Unsupported(
            "the single-claim oracle needs N = 0".into(),
        ));
    }
    let rho = model.corr_xy[0];
    if rho.abs() >= 1.0 {
        return Err(PricingError::Unsupported(format!(
            "|ρ_xy| = {} leaves no unhedgeable risk",
            rho.abs()
        )));
    }
    let c = model.risk_aversion * (1.0 - rho * rho);
    let (mean, sd) = terminal_law(model, 0)?;
    Ok((c, model.strikes[0], mean, sd))
}

/// `E[exp(−c K e^{min(z, 0)})]` for `z ~ N(mean, sd²)`.
///
/// The smooth extension `F(z) = exp(−c K e^z)` is integrated by Gauss–Hermite
/// and the payoff's cap is added back as `∫_{z>0} (e^{−cK} − F) φ`, which is
/// smooth on its own interval.
pub fn capped_exponential_moment(c: f64, k: f64, mean: f64, sd: f64, nodes: usize) -> f64 {
    let smooth = |z: f64| (-c * k * z.exp()).exp();
    let gh = gauss_hermite_normal(nodes);
    let base = gh.expect(|x| smooth(mean + sd * x));
    let cap = (-c * k).exp();
    let lo = (-mean / sd).max(-40.0);
    let hi = lo.max(0.0) + 12.0;
    let gl = gauss_legendre(32);
    let panels = 16;
    let width = (hi - lo) / panels as f64;
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let correction: f64 = (0..panels)
        .map(|p| {
            let a = lo + p as f64 * width;
            gl.integrate(a, a + width, |x| (cap - smooth(mean + sd * x)) * density(x))
        })
        .sum();
    base + correction
}

/// Quadrature price of the claim `min(Y_0, K_0)` with no static hedge.
pub fn single_claim_oracle(model: &MarketModel) -> Result<f64, PricingError> {
    let (c, k, mean, sd) = single_asset_inputs(model)?;
    let e = capped_exponential_moment(c, k, mean, sd, 96);
    Ok(-(-model.rate * model.maturity).exp() / c * e.ln())
}

/// Monte-Carlo estimate of the same price with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloPrice {
    pub price: f64,
    pub std_error: f64,
    pub paths: usize,
}

pub fn single_claim_monte_carlo(
    model: &MarketModel,
    paths: usize,
    seed: u64,
) -> Result<MonteCarloPrice, PricingError> {
    let (c, k, mean, sd) = single_asset_inputs(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..paths {
        let xi: f64 = StandardNormal.sample(&mut rng);
        let g = k * (mean + sd * xi).min(0.0).exp();
        let x = (-c * g).exp();
        s1 += x;
        s2 += x * x;
    }
    let n = paths as f64;
    let m = s1 / n;
    let var = (s2 / n - m * m).max(0.0) * n / (n - 1.0);
    let disc = (-model.rate * model.maturity).exp();
    Ok(MonteCarloPrice {
        price: -disc / c * m.ln(),
        std_error: disc / c * (var / n).sqrt() / m,
        paths,
    })
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Small-risk-aversion limit of the indifference price of `min(Y_i, K_i)`:
/// its discounted expectation under the drift-adjusted law.
pub fn marginal_price(model: &MarketModel, asset: usize) -> Result<f64, PricingError> {
    model.validate()?;
    if asset >= model.dim() {
        return Err(PricingError::Unsupported(format!("no asset {asset}")));
    }
    let (mean, sd) = terminal_law(model, asset)?;
    let k = model.strikes[asset];
    let disc = (-model.rate * model.maturity).exp();
    if sd == 0.0 {
        return Ok(disc * k * mean.min(0.0).exp());
    }
    // E[K e^{min(z,0)}] = K E[e^z; z < 0] + K P(z ≥ 0)
    let below = (mean + 0.5 * sd * sd).exp() * normal_cdf((-mean - sd * sd) / sd);
    let above = normal_cdf(mean / sd);
    Ok(disc * k * (below + above))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::TermStructure;

    pub(crate) fn single(gamma: f64, rho: f64) -> MarketModel {
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
    fn oracle_agrees_with_monte_carlo() {
        for (gamma, rho) in [(0.5, 0.0), (2.0, 0.5), (0.1, 0.9)] {
            let m = single(gamma, rho);
            let q = single_claim_oracle(&m).unwrap();
            let mc = single_claim_monte_carlo(&m, 200_000, 42).unwrap();
            assert!((q - mc.price).abs() < 4.0 * mc.std_error, "{q} vs {mc:?}");
        }
    }

    #[test]
    fn quadrature_converged_in_nodes() {
        let m = single(2.0, 0.3);
        let (c, k, mean, sd) = single_asset_inputs(&m).unwrap();
        let a = capped_exponential_moment(c, k, mean, sd, 96);
        let b = capped_exponential_moment(c, k, mean, sd, 160);
        assert!((a - b).abs() < 1e-13 * a);
    }

    #[test]
    fn small_gamma_tends_to_marginal_price() {
        let m = single(1e-7, 0.4);
        let q = single_claim_oracle(&m).unwrap();
        let e = marginal_price(&m, 0).unwrap();
        assert!((q - e).abs() < 1e-5 * e);
    }

    #[test]
    fn marginal_price_matches_quadrature() {
        let mut m = single(1.0, 0.2);
        m.rate = 0.03;
        m.spots = vec![9.0];
        let (mean, sd) = terminal_law(&m, 0).unwrap();
        let direct = {
            let gl = gauss_legendre(64);
            let below = gl.integrate(-12.0, -mean / sd, |x| {
                (mean + sd * x).exp() * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
            });
            let above = 1.0 - normal_cdf(-mean / sd);
            10.0 * (below + above)
        };
        let e = marginal_price(&m, 0).unwrap();
        assert!((e - (-0.03f64).exp() * direct).abs() < 1e-10);
    }

    #[test]
    fn perfect_correlation_rejected() {
        assert!(single_claim_oracle(&single(1.0, 1.0)).is_err());
    }
}
