//! Drives the same pipeline as the `price` subcommand from a config file.
//!
//! `cargo run --example run_config -- configs/proxy_hedge.toml`

use proxy_hedge::cli::{emit_config, parse_config, run_price};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/configs/proxy_hedge.toml").to_string()
    });
    let text = std::fs::read_to_string(&path).expect("readable config");
    let parsed = match parse_config(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{path}: {e}");
            std::process::exit(1);
        }
    };
    println!("--- canonical config\n{}", emit_config(&parsed.config));
    let outcome = run_price(&parsed, |msg| eprintln!("{msg}"));
    println!("--- report (exit {})\n{}", outcome.code, outcome.output);
}
