//! Optimal static position in a proxy option, and the dynamic index hedge
//! that goes with it.
//!
//! `cargo run --release --example static_hedge`

use proxy_hedge::market::{MarketModel, TermStructure};
use proxy_hedge::pricer::{marginal_price, optimize_static_hedge, NelderMeadOptions, Pricer};
use proxy_hedge::solver::SolverConfig;
use proxy_hedge::transform::Side;

fn main() {
    let cfg = SolverConfig {
        nodes: vec![128],
        time_steps: 16,
        ..Default::default()
    };
    let search = SolverConfig {
        nodes: vec![64],
        time_steps: 8,
        ..Default::default()
    };
    for rho in [0.0, 0.5, 0.8, 0.95, 0.999] {
        let mut m = MarketModel {
            spots: vec![10.0, 10.0],
            strikes: vec![10.0, 10.0],
            drifts: vec![TermStructure::Constant(0.05); 2],
            vols: vec![0.3, 0.3],
            corr_yy: vec![vec![1.0, rho], vec![rho, 1.0]],
            corr_xy: vec![0.3, 0.3],
            index_drift: 0.07,
            index_vol: 0.2,
            rate: 0.0,
            maturity: 1.0,
            risk_aversion: 0.5,
            proxy_prices: vec![0.0],
        };
        m.proxy_prices[0] = marginal_price(&m, 1).unwrap();
        let pricer = Pricer::new(&m, &cfg, Side::Buy).unwrap();
        let unhedged = pricer.price(&[0.0]).unwrap();
        let r = optimize_static_hedge(
            &pricer,
            &[0.0],
            &NelderMeadOptions::default(),
            Some(&search),
        )
        .unwrap();
        println!(
            "rho {rho:<6} alpha* {:>8.4}  g(alpha*) {:.5}  g(0) {:.5}  pi* {:.4}  ({} evaluations)",
            r.alpha[0],
            r.price,
            unhedged,
            r.dynamic_hedge,
            r.trace.len()
        );
    }
}
