use nalgebra::SymmetricEigen;
use proptest::prelude::*;

use proxy_hedge::market::{build_quadratic_data, MarketModel, TermStructure};
use proxy_hedge::pricer::{optimize_static_hedge, NelderMeadOptions, Pricer};
use proxy_hedge::solver::SolverConfig;
use proxy_hedge::transform::{terminal_condition, terminal_log_bounds, Side};

fn two_asset(rho: f64, rx0: f64, rx1: f64, gamma: f64, proxy_price: f64) -> MarketModel {
    MarketModel {
        spots: vec![10.0, 9.0],
        strikes: vec![10.0, 10.0],
        drifts: vec![TermStructure::Constant(0.05), TermStructure::Constant(0.04)],
        vols: vec![0.3, 0.25],
        corr_yy: vec![vec![1.0, rho], vec![rho, 1.0]],
        corr_xy: vec![rx0, rx1],
        index_drift: 0.07,
        index_vol: 0.2,
        rate: 0.02,
        maturity: 1.0,
        risk_aversion: gamma,
        proxy_prices: vec![proxy_price],
    }
}

fn coarse() -> SolverConfig {
    SolverConfig {
        nodes: vec![48],
        time_steps: 4,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn diffusion_matrix_is_psd(
        rho in -0.95f64..0.95,
        rx0 in -0.6f64..0.6,
        rx1 in -0.6f64..0.6,
    ) {
        let m = two_asset(rho, rx0, rx1, 1.0, 8.0);
        prop_assume!(m.validate().is_ok());
        let (a, _) = build_quadratic_data(&m);
        prop_assert!((&a - a.transpose()).amax() == 0.0);
        let min = SymmetricEigen::new(a).eigenvalues.min();
        prop_assert!(min >= -1e-14);
    }

    #[test]
    fn terminal_condition_within_bounds(
        z0 in -3.0f64..3.0,
        z1 in -3.0f64..3.0,
        alpha in -2.0f64..2.0,
        sell in any::<bool>(),
    ) {
        let m = two_asset(0.5, 0.3, 0.2, 0.7, 8.0);
        let side = if sell { Side::Sell } else { Side::Buy };
        let (lo, hi) = terminal_log_bounds(&[alpha], &m, side);
        let phi = terminal_condition(&[z0, z1], &[alpha], &m, side);
        prop_assert!(phi > 0.0);
        prop_assert!(phi.ln() >= lo - 1e-12 && phi.ln() <= hi + 1e-12);
    }

    #[test]
    fn price_respects_maximum_principle_bounds(
        rho in -0.8f64..0.8,
        alpha in -1.5f64..1.5,
        gamma in 0.1f64..3.0,
    ) {
        let m = two_asset(rho, 0.3, 0.2, gamma, 8.0);
        prop_assume!(m.validate().is_ok());
        for side in [Side::Buy, Side::Sell] {
            let p = Pricer::new(&m, &coarse(), side).unwrap();
            let g = p.price(&[alpha]).unwrap();
            let (lo, hi) = p.price_bounds(&[alpha]);
            prop_assert!(g >= lo - 1e-9 && g <= hi + 1e-9, "{} not in [{}, {}]", g, lo, hi);
        }
    }
}

#[test]
fn ask_exceeds_bid() {
    let m = two_asset(0.6, 0.4, 0.3, 1.0, 8.0);
    let bid = Pricer::new(&m, &coarse(), Side::Buy)
        .unwrap()
        .price(&[0.5])
        .unwrap();
    let ask = Pricer::new(&m, &coarse(), Side::Sell)
        .unwrap()
        .price(&[-0.5])
        .unwrap();
    assert!(bid < ask, "{bid} {ask}");
}

#[test]
fn optimized_hedge_beats_probes() {
    let m = two_asset(0.8, 0.4, 0.3, 1.0, 8.0);
    let p = Pricer::new(&m, &coarse(), Side::Buy).unwrap();
    let r = optimize_static_hedge(&p, &[0.0], &NelderMeadOptions::default(), None).unwrap();
    assert!(r.converged);
    for probe in [-1.0, -0.3, 0.0, 0.2, 0.5, 1.0, 2.0] {
        assert!(
            r.price >= p.price(&[probe]).unwrap() - 1e-12,
            "alpha {probe}"
        );
    }
}

#[test]
fn coarse_search_then_fine_price() {
    let m = two_asset(0.8, 0.4, 0.3, 1.0, 8.0);
    let fine = SolverConfig {
        nodes: vec![96],
        time_steps: 8,
        ..Default::default()
    };
    let p = Pricer::new(&m, &fine, Side::Buy).unwrap();
    let r =
        optimize_static_hedge(&p, &[0.0], &NelderMeadOptions::default(), Some(&coarse())).unwrap();
    assert_eq!(r.price, p.price(&r.alpha).unwrap());
}

#[test]
fn dynamic_hedge_is_finite_and_repeatable() {
    let m = two_asset(0.6, 0.4, 0.3, 1.0, 8.0);
    let p = Pricer::new(&m, &coarse(), Side::Buy).unwrap();
    let s = p.solve(&[0.3]).unwrap();
    let pi = p.dynamic_hedge(&s).unwrap();
    assert!(pi.is_finite());
    assert_eq!(pi, p.dynamic_hedge(&s).unwrap());
}
