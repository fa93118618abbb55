//! Splitting solver against the finite-difference reference on a two-asset
//! problem, with timings.
//!
//! `cargo run --release --example fd_cross_check`

use std::time::Instant;

use proxy_hedge::fd::{fd_solve, FdConfig};
use proxy_hedge::market::{MarketModel, TermStructure};
use proxy_hedge::pricer::Pricer;
use proxy_hedge::solver::SolverConfig;
use proxy_hedge::transform::Side;

fn main() {
    let m = MarketModel {
        spots: vec![10.0, 10.0],
        strikes: vec![10.0, 10.0],
        drifts: vec![TermStructure::Constant(0.05); 2],
        vols: vec![0.3, 0.25],
        corr_yy: vec![vec![1.0, 0.6], vec![0.6, 1.0]],
        corr_xy: vec![0.5, 0.4],
        index_drift: 0.07,
        index_vol: 0.2,
        rate: 0.0,
        maturity: 1.0,
        risk_aversion: 0.5,
        proxy_prices: vec![9.0],
    };
    let alpha = [0.5];
    for nodes in [64, 128, 256] {
        let cfg = SolverConfig {
            nodes: vec![nodes],
            time_steps: 16,
            ..Default::default()
        };
        let t = Instant::now();
        let pricer = Pricer::new(&m, &cfg, Side::Buy).unwrap();
        let g = pricer.price(&alpha).unwrap();
        println!(
            "splitting M={nodes:<4} g = {g:.8}  ({:.0} ms)",
            t.elapsed().as_secs_f64() * 1e3
        );
    }
    for nodes in [100, 200, 300] {
        let cfg = FdConfig {
            nodes: vec![nodes],
            time_steps: 200,
            ..Default::default()
        };
        let t = Instant::now();
        let field = fd_solve(&m, &alpha, Side::Buy, &cfg).unwrap();
        let log_phi = field.interpolate_log(&m.spot_log_moneyness()).unwrap();
        let pricer = Pricer::new(&m, &SolverConfig::default(), Side::Buy).unwrap();
        println!(
            "finite differences M={nodes:<4} g = {:.8}  ({:.0} ms)",
            pricer.price_from_log_phi(log_phi, &alpha),
            t.elapsed().as_secs_f64() * 1e3
        );
    }
}
