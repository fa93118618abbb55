//! A claim on one illiquid asset hedged only with the index: the PDE price
//! against closed-form quadrature and Monte Carlo.
//!
//! `cargo run --release --example single_claim`

use proxy_hedge::market::{MarketModel, TermStructure};
use proxy_hedge::pricer::{marginal_price, single_claim_monte_carlo, single_claim_oracle, Pricer};
use proxy_hedge::solver::SolverConfig;
use proxy_hedge::transform::Side;

fn main() {
    let cfg = SolverConfig {
        nodes: vec![256],
        time_steps: 8,
        ..Default::default()
    };
    println!("gamma  rho   PDE          quadrature   Monte Carlo (SE)        expectation");
    for gamma in [0.1, 0.5, 2.0] {
        for rho in [0.0, 0.5, 0.9] {
            let m = MarketModel {
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
            };
            let pde = Pricer::new(&m, &cfg, Side::Buy)
                .unwrap()
                .price(&[])
                .unwrap();
            let q = single_claim_oracle(&m).unwrap();
            let mc = single_claim_monte_carlo(&m, 200_000, 1).unwrap();
            println!(
                "{gamma:<6} {rho:<5} {pde:<12.6} {q:<12.6} {:.6} ({:.1e})   {:.6}",
                mc.price,
                mc.std_error,
                marginal_price(&m, 0).unwrap()
            );
        }
    }
}
