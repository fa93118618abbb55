//! Simultaneous diagonalization of the four-asset market.
//!
//! `cargo run --example factorize`

use proxy_hedge::factorizer::{build_transform, verify_factorization, FactorizeOptions};
use proxy_hedge::market::{build_quadratic_data, MarketModel, TermStructure};

fn main() {
    let market = MarketModel {
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
    };
    let (a, loading) = build_quadratic_data(&market);
    let fs = build_transform(&a, &loading, &FactorizeOptions::default()).expect("factorization");
    let check = verify_factorization(&fs, &a, &loading, 1e-12);

    println!("D diagonal      {:?}", fs.d);
    println!("p = diag(R'AR)  {:?}", fs.p);
    println!("b = a.R         {:?}", fs.b);
    println!("beta = b0^2     {}", fs.beta);
    println!("R:{}", fs.r);
    println!(
        "iterations {}, start {:?}, residual {:.1e}, max off-diagonal {:.1e}, passed {}",
        fs.iterations, fs.start, fs.residual, check.max_off_diagonal, check.passed
    );
    let w = a.clone().lu().solve(&loading).unwrap();
    println!(
        "beta/p0 = {:.6} equals a'A^-1 a = {:.6}",
        fs.nonlinear_ratio(),
        loading.dot(&w)
    );
}
