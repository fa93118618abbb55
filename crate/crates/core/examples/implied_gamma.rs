//! Backs out the risk aversion that reproduces a quoted price.
//!
//! `cargo run --release --example implied_gamma`

use proxy_hedge::market::{MarketModel, TermStructure};
use proxy_hedge::pricer::{implied_gamma, ImpliedGammaOptions, Pricer};
use proxy_hedge::solver::SolverConfig;
use proxy_hedge::transform::Side;

fn main() {
    let m = MarketModel {
        spots: vec![10.0, 10.0],
        strikes: vec![10.0, 10.0],
        drifts: vec![TermStructure::Constant(0.05); 2],
        vols: vec![0.3, 0.25],
        corr_yy: vec![vec![1.0, 0.7], vec![0.7, 1.0]],
        corr_xy: vec![0.5, 0.4],
        index_drift: 0.07,
        index_vol: 0.2,
        rate: 0.0,
        maturity: 1.0,
        risk_aversion: 1.0,
        proxy_prices: vec![9.1],
    };
    let cfg = SolverConfig {
        nodes: vec![64],
        time_steps: 8,
        ..Default::default()
    };
    let alpha = [0.5];
    for true_gamma in [0.2, 1.0, 4.0] {
        let quote = Pricer::new(&m.with_risk_aversion(true_gamma), &cfg, Side::Buy)
            .unwrap()
            .price(&alpha)
            .unwrap();
        let g = implied_gamma(&m, &alpha, quote, &cfg, &ImpliedGammaOptions::default()).unwrap();
        println!("quote {quote:.6} -> implied gamma {g:.6} (generated with {true_gamma})");
    }
    match implied_gamma(&m, &alpha, 100.0, &cfg, &ImpliedGammaOptions::default()) {
        Err(e) => println!("quote 100: {e}"),
        Ok(g) => println!("quote 100: {g}"),
    }
}
