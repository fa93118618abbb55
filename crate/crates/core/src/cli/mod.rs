//! Command-line front end: configuration files, subcommands and reports.
//!
//! Every command returns an [`Outcome`] holding the exit code and the full
//! report text; printing and file output are left to the binary. Reports
//! contain no timings, so identical inputs give identical bytes.

mod benchmark;
mod config;
mod report;

pub use benchmark::{run_benchmark, CSV_HEADER};
pub use config::{
    config_hash, emit_config, parse_config, BenchmarkPlan, ConfigError, ParsedConfig, RunConfig,
    RunOptions,
};
pub use report::Report;

use crate::factorizer::{verify_factorization, FactorizedSystem};
use crate::fd::fd_solve;
use crate::pricer::{
    implied_gamma, optimize_static_hedge, price_fixed, Pricer, PricingError, PricingResult,
};
use crate::solver::{SolverConfig, SolverError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub output: String,
}

/// Reads and parses a configuration file. Errors come back as a finished
/// failure report.
pub fn load_config(path: &std::path::Path, command: &str) -> Result<ParsedConfig, Outcome> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        failure(
            command,
            None,
            "config",
            &format!("{}: {e}", path.display()),
            EXIT_CONFIG,
        )
    })?;
    parse_config(&text).map_err(|e| failure(command, None, "config", &e.to_string(), EXIT_CONFIG))
}

fn failure(command: &str, hash: Option<&str>, stage: &str, message: &str, code: i32) -> Outcome {
    let mut r = Report::new(&format!("proxy-hedge {command}"));
    if let Some(h) = hash {
        r.str("config_sha256", h);
    }
    r.str("status", "failed")
        .str("stage", stage)
        .str("error", message);
    Outcome {
        code,
        output: r.finish(),
    }
}

fn exit_code(err: &PricingError) -> i32 {
    match err {
        PricingError::Market(_) | PricingError::AlphaLength { .. } => EXIT_CONFIG,
        PricingError::Solver(SolverError::Config(_)) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn pricing_failure(command: &str, hash: &str, stage: &str, err: &PricingError) -> Outcome {
    failure(command, Some(hash), stage, &err.to_string(), exit_code(err))
}

fn header(r: &mut Report, hash: &str, parsed: &ParsedConfig) {
    r.str("config_sha256", hash).str("status", "ok");
    if !parsed.warnings.is_empty() {
        r.strings("config_warnings", &parsed.warnings);
    }
}

fn factorization_section(r: &mut Report, fs: &FactorizedSystem) {
    r.section("factorization")
        .list("d", &fs.d)
        .raw("pinned", fs.pinned)
        .list("lambda", &fs.lambda)
        .list("p", &fs.p)
        .list("b", &fs.b)
        .num("b0", fs.b[0])
        .num("beta", fs.beta)
        .num("nonlinear_ratio", fs.nonlinear_ratio())
        .num("residual", fs.residual)
        .raw("iterations", fs.iterations)
        .str("start", &format!("{:?}", fs.start));
}

fn grid_section(r: &mut Report, cfg: &SolverConfig, dim: usize) {
    let nodes: Vec<f64> = (0..dim).map(|i| cfg.nodes_on(i) as f64).collect();
    r.section("grid")
        .raw(
            "nodes",
            format!(
                "[{}]",
                nodes
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        )
        .raw("time_steps", cfg.time_steps)
        .str("kernel", &format!("{:?}", cfg.method()))
        .num("half_width_sd", cfg.half_width_sd);
}

/// `factorize`: the transform and its independent verification.
pub fn run_factorize(parsed: &ParsedConfig) -> Outcome {
    let cfg = &parsed.config;
    let hash = config_hash(cfg);
    let pricer =
        match Pricer::with_options(&cfg.market, &cfg.solver, cfg.run.side, &cfg.run.factorize) {
            Ok(p) => p,
            Err(e) => return pricing_failure("factorize", &hash, "factorize", &e),
        };
    let fs = pricer.system();
    let (a_mat, a_vec) = pricer.quadratic_data();
    let check = verify_factorization(fs, a_mat, a_vec, cfg.run.factorize.tolerance.max(1e-12));
    let mut r = Report::new("proxy-hedge factorize");
    header(&mut r, &hash, parsed);
    factorization_section(&mut r, fs);
    r.section("r");
    for i in 0..fs.r.nrows() {
        let row: Vec<f64> = fs.r.row(i).iter().copied().collect();
        r.list(&format!("row{i}"), &row);
    }
    r.section("verification")
        .num("max_off_diagonal", check.max_off_diagonal)
        .num("off_diagonal_limit", check.off_diagonal_limit)
        .num("residual", check.residual)
        .num("residual_limit", check.residual_limit)
        .raw("passed", check.passed);
    Outcome {
        code: if check.passed {
            EXIT_OK
        } else {
            EXIT_NUMERICAL
        },
        output: r.finish(),
    }
}

fn price_report(parsed: &ParsedConfig, hash: &str, pricer: &Pricer, res: &PricingResult) -> Report {
    let cfg = &parsed.config;
    let mut r = Report::new("proxy-hedge price");
    header(&mut r, hash, parsed);
    factorization_section(&mut r, pricer.system());
    let (lo, hi) = pricer.price_bounds(&res.alpha);
    r.section("price")
        .str("side", &format!("{:?}", cfg.run.side).to_lowercase())
        .num("g", res.price)
        .list("alpha", &res.alpha)
        .num("pi_star", res.dynamic_hedge)
        .num("phi_at_spot", res.phi_at_spot())
        .num("log_phi_at_spot", res.log_phi_at_spot)
        .num("bound_low", lo)
        .num("bound_high", hi);
    if !res.trace.is_empty() {
        r.section("optimizer")
            .raw("evaluations", res.trace.len())
            .raw("converged", res.converged);
    }
    grid_section(&mut r, &cfg.solver, cfg.market.dim());
    let d = &res.diagnostics;
    r.section("diagnostics")
        .list(
            "initial_log_range",
            &[d.initial_log_range.0, d.initial_log_range.1],
        )
        .list(
            "final_log_range",
            &d.steps
                .last()
                .map_or([f64::NAN; 2], |s| [s.log_min, s.log_max]),
        )
        .raw("bound_violations", d.bound_violations);
    r
}

fn price_warnings(cfg: &RunConfig, res: &PricingResult) -> Vec<String> {
    let mut w = Vec::new();
    if res.diagnostics.bound_violations > 0 {
        w.push(format!(
            "{} step(s) left the terminal range of log Phi",
            res.diagnostics.bound_violations
        ));
    }
    if !res.trace.is_empty() {
        if !res.converged {
            w.push("optimizer stopped on its evaluation budget".into());
        }
        let o = &cfg.run.optimizer;
        if res.alpha.iter().any(|&a| a <= o.lower || a >= o.upper) {
            w.push("optimal static hedge sits on the search box".into());
        }
    }
    w
}

/// `price`: factorize, solve (optionally optimizing the static hedge), report.
pub fn run_price(parsed: &ParsedConfig, mut progress: impl FnMut(&str)) -> Outcome {
    let cfg = &parsed.config;
    let hash = config_hash(cfg);
    let n = cfg.market.n_proxies();
    let pricer =
        match Pricer::with_options(&cfg.market, &cfg.solver, cfg.run.side, &cfg.run.factorize) {
            Ok(p) => p,
            Err(e) => return pricing_failure("price", &hash, "factorize", &e),
        };
    progress(&format!(
        "factorized: p = {:?}, beta = {}, residual = {:e}",
        pricer.system().p,
        pricer.system().beta,
        pricer.system().residual
    ));
    let alpha = cfg.run.alpha.clone().unwrap_or_else(|| vec![0.0; n]);
    let result = if cfg.run.optimize && n > 0 {
        let search = match (&cfg.run.search_nodes, cfg.run.search_time_steps) {
            (None, None) => None,
            (nodes, steps) => Some(SolverConfig {
                nodes: nodes.clone().unwrap_or_else(|| cfg.solver.nodes.clone()),
                time_steps: steps.unwrap_or(cfg.solver.time_steps),
                ..cfg.solver.clone()
            }),
        };
        optimize_static_hedge(&pricer, &alpha, &cfg.run.optimizer, search.as_ref())
            .map_err(|e| ("optimize", e))
    } else {
        price_fixed(&pricer, &alpha).map_err(|e| ("solve", e))
    };
    let res = match result {
        Ok(r) => r,
        Err((stage, e)) => return pricing_failure("price", &hash, stage, &e),
    };
    progress(&format!("g = {}, alpha = {:?}", res.price, res.alpha));
    let mut r = price_report(parsed, &hash, &pricer, &res);
    if cfg.run.fd_check {
        match fd_solve(&cfg.market, &res.alpha, cfg.run.side, &cfg.fd)
            .map_err(|e| e.to_string())
            .and_then(|f| {
                f.interpolate_log(&cfg.market.spot_log_moneyness())
                    .map_err(|e| e.to_string())
            }) {
            Ok(log_phi) => {
                let g_fd = pricer.price_from_log_phi(log_phi, &res.alpha);
                r.section("fd_check")
                    .num("g", g_fd)
                    .num("relative_gap", ((res.price - g_fd) / g_fd).abs());
            }
            Err(e) => return failure("price", Some(&hash), "fd-check", &e, EXIT_NUMERICAL),
        }
    }
    let warnings = price_warnings(cfg, &res);
    r.section("warnings").strings("messages", &warnings);
    Outcome {
        code: EXIT_OK,
        output: r.finish(),
    }
}

/// `implied-gamma`: the risk aversion that reproduces `run.observed_price`.
pub fn run_implied_gamma(parsed: &ParsedConfig) -> Outcome {
    let cfg = &parsed.config;
    let hash = config_hash(cfg);
    let Some(observed) = cfg.run.observed_price else {
        return failure(
            "implied-gamma",
            Some(&hash),
            "config",
            "[run] observed_price is required",
            EXIT_CONFIG,
        );
    };
    let alpha = cfg
        .run
        .alpha
        .clone()
        .unwrap_or_else(|| vec![0.0; cfg.market.n_proxies()]);
    let opts = &cfg.run.implied_gamma;
    let gamma = match implied_gamma(&cfg.market, &alpha, observed, &cfg.solver, opts) {
        Ok(g) => g,
        Err(e) => return pricing_failure("implied-gamma", &hash, "implied-gamma", &e),
    };
    let check = Pricer::with_options(
        &cfg.market.with_risk_aversion(gamma),
        &cfg.solver,
        crate::transform::Side::Buy,
        &cfg.run.factorize,
    )
    .and_then(|p| p.price(&alpha));
    let g = match check {
        Ok(g) => g,
        Err(e) => return pricing_failure("implied-gamma", &hash, "solve", &e),
    };
    let mut r = Report::new("proxy-hedge implied-gamma");
    header(&mut r, &hash, parsed);
    r.section("implied_gamma")
        .num("observed_price", observed)
        .list("alpha", &alpha)
        .num("gamma", gamma)
        .num("price_at_gamma", g)
        .list("bracket", &[opts.gamma_lo, opts.gamma_hi])
        .num("tolerance", opts.tolerance);
    grid_section(&mut r, &cfg.solver, cfg.market.dim());
    Outcome {
        code: EXIT_OK,
        output: r.finish(),
    }
}
