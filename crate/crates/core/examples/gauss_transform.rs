//! Direct Gaussian sums against the IFGT: accuracy by truncation order and
//! cost by problem size.
//!
//! `cargo run --release --example gauss_transform`

use std::time::Instant;

use proxy_hedge::gauss::{
    direct_gauss_1d, ifgt_1d, ifgt_error_bound, taylor_term_count, GaussTransformSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    println!(
        "f(1,4) = {}, f(5,4) = {}",
        taylor_term_count(1, 4),
        taylor_term_count(5, 4)
    );
    println!(
        "{:>6} {:>3} {:>12} {:>12} {:>10} {:>10}",
        "M", "p", "direct ms", "ifgt ms", "max rel", "bound"
    );
    for m in [512, 1024, 2048, 4096] {
        let sources: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let targets: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let spec = GaussTransformSpec::new(sources, weights, targets, 0.1);
        let t = Instant::now();
        let exact = direct_gauss_1d(&spec).unwrap();
        let direct_ms = t.elapsed().as_secs_f64() * 1e3;
        for p in [4, 8, 12] {
            let s = spec.clone().with_order(p);
            let t = Instant::now();
            let fast = ifgt_1d(&s).unwrap();
            let ifgt_ms = t.elapsed().as_secs_f64() * 1e3;
            let err = fast
                .iter()
                .zip(&exact)
                .map(|(a, b)| ((a - b) / b).abs())
                .fold(0.0, f64::max);
            println!(
                "{m:>6} {p:>3} {direct_ms:>12.3} {ifgt_ms:>12.3} {err:>10.1e} {:>10.1e}",
                ifgt_error_bound(p, s.cluster_radius)
            );
        }
    }
}
