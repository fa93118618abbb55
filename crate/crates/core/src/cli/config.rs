use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::factorizer::FactorizeOptions;
use crate::fd::FdConfig;
use crate::market::{MarketError, MarketModel};
use crate::pricer::{ImpliedGammaOptions, NelderMeadOptions};
use crate::solver::SolverConfig;
use crate::transform::Side;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: MarketError },
    #[error("[{section}] {message}")]
    Section {
        section: &'static str,
        message: String,
    },
}

/// Everything a run needs, in four sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub market: MarketModel,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub fd: FdConfig,
    #[serde(default)]
    pub run: RunOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    pub side: Side,
    /// Fixed static hedge, or the optimizer's starting point.
    pub alpha: Option<Vec<f64>>,
    pub optimize: bool,
    /// Coarser grid used while the optimizer searches.
    pub search_nodes: Option<Vec<usize>>,
    pub search_time_steps: Option<usize>,
    /// Also solve with the finite-difference reference and report the gap.
    pub fd_check: bool,
    pub observed_price: Option<f64>,
    pub factorize: FactorizeOptions,
    pub optimizer: NelderMeadOptions,
    pub implied_gamma: ImpliedGammaOptions,
    pub benchmark: BenchmarkPlan,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            side: Side::Buy,
            alpha: None,
            optimize: true,
            search_nodes: None,
            search_time_steps: None,
            fd_check: false,
            observed_price: None,
            factorize: FactorizeOptions::default(),
            optimizer: NelderMeadOptions::default(),
            implied_gamma: ImpliedGammaOptions::default(),
            benchmark: BenchmarkPlan::default(),
        }
    }
}

/// Cells of the benchmark matrix: every combination of the four lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkPlan {
    pub dims: Vec<usize>,
    pub nodes: Vec<usize>,
    pub orders: Vec<usize>,
    pub time_steps: Vec<usize>,
    /// Grids with more points than this skip the non-separable transform.
    pub max_nd_points: usize,
    /// Grids with more points than this skip the finite-difference row.
    pub max_fd_points: usize,
}

impl Default for BenchmarkPlan {
    fn default() -> Self {
        Self {
            dims: vec![1, 2],
            nodes: vec![64, 128, 256],
            orders: vec![4, 8],
            time_steps: vec![4],
            max_nd_points: 4096,
            max_fd_points: 40_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

/// Line (1-based) of `key = ...` inside `[section]`, if present.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn section_line(text: &str, section: &str) -> usize {
    text.lines()
        .position(|l| l.trim() == format!("[{section}]"))
        .map_or(1, |i| i + 1)
}

fn market_field(err: &MarketError) -> &'static str {
    match err {
        MarketError::Length { field, .. } | MarketError::Value { field, .. } => match *field {
            "corr_yy row" => "corr_yy",
            f => f,
        },
        MarketError::NotSymmetric { .. } | MarketError::Diagonal { .. } => "corr_yy",
        MarketError::NotPsd { matrix, .. } if matrix.contains("index") => "corr_xy",
        MarketError::NotPsd { .. } => "corr_yy",
        MarketError::TermStructure(_) => "drifts",
        MarketError::TimeOutOfRange { .. } => "maturity",
    }
}

pub fn parse_config(text: &str) -> Result<ParsedConfig, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut warnings = Vec::new();
    let config: RunConfig = serde_ignored::deserialize(de, |path| {
        let path = path.to_string();
        let (section, key) = path.split_once('.').unwrap_or(("", path.as_str()));
        let line = key_line(text, section, key.rsplit('.').next().unwrap_or(key))
            .map(|l| format!("line {l}: "))
            .unwrap_or_default();
        warnings.push(format!("{line}unknown key `{path}` ignored"));
    })
    .map_err(|e| ConfigError::Parse(e.to_string()))?;

    if let Err(source) = config.market.validate() {
        let field = market_field(&source);
        let line = key_line(text, "market", field).unwrap_or_else(|| section_line(text, "market"));
        return Err(ConfigError::Invalid { line, source });
    }
    let dim = config.market.dim();
    config
        .solver
        .validate(dim)
        .map_err(|e| ConfigError::Section {
            section: "solver",
            message: e.to_string(),
        })?;
    if let Some(alpha) = &config.run.alpha {
        if alpha.len() != config.market.n_proxies() {
            return Err(ConfigError::Section {
                section: "run",
                message: format!(
                    "line {}: alpha has {} entries, the market has {} proxies",
                    key_line(text, "run", "alpha").unwrap_or(0),
                    alpha.len(),
                    config.market.n_proxies()
                ),
            });
        }
    }
    Ok(ParsedConfig { config, warnings })
}

/// Canonical text form; `parse_config(&emit_config(c))` returns `c`.
pub fn emit_config(config: &RunConfig) -> String {
    toml::to_string(config).expect("configuration values are always representable")
}

/// SHA-256 of the canonical form, hex encoded.
pub fn config_hash(config: &RunConfig) -> String {
    let digest = Sha256::digest(emit_config(config).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[market]
spots = [10.0]
strikes = [10.0]
drifts = [0.05]
vols = [0.3]
corr_yy = [[1.0]]
corr_xy = [0.5]
index_drift = 0.07
index_vol = 0.2
rate = 0.0
maturity = 1.0
risk_aversion = 0.5
proxy_prices = []
"#;

    #[test]
    fn minimal_single_claim_uses_defaults() {
        let parsed = parse_config(MINIMAL).unwrap();
        assert!(parsed.warnings.is_empty());
        let c = parsed.config;
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.fd, FdConfig::default());
        assert_eq!(c.run, RunOptions::default());
        assert_eq!(c.market.n_proxies(), 0);
    }

    #[test]
    fn emit_then_parse_is_identity() {
        let text = MINIMAL.replace(
            "drifts = [0.05]",
            "drifts = [{ breaks = [0.5], values = [0.04, 0.06] }]",
        ) + "[run]\nside = \"sell\"\noptimize = false\n[solver]\nnodes = [64]\n";
        let c = parse_config(&text).unwrap().config;
        let again = parse_config(&emit_config(&c)).unwrap().config;
        assert_eq!(c, again);
        assert_eq!(config_hash(&c), config_hash(&again));
    }

    #[test]
    fn non_psd_correlation_names_eigenvalue_and_line() {
        let text = r#"
[market]
spots = [1.0, 1.0, 1.0]
strikes = [1.0, 1.0, 1.0]
drifts = [0.05, 0.05, 0.05]
vols = [0.3, 0.3, 0.3]
corr_yy = [[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]]
corr_xy = [0.0, 0.0, 0.0]
index_drift = 0.07
index_vol = 0.2
rate = 0.0
maturity = 1.0
risk_aversion = 0.5
proxy_prices = [0.9, 0.9]
"#;
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.starts_with("line 7:"), "{err}");
        assert!(err.contains("eigenvalue"), "{err}");
    }

    #[test]
    fn unknown_keys_warn_with_line() {
        let text = format!("{MINIMAL}[solver]\nnodez = [64]\n");
        let parsed = parse_config(&text).unwrap();
        assert_eq!(parsed.warnings.len(), 1);
        assert!(
            parsed.warnings[0].contains("solver.nodez"),
            "{:?}",
            parsed.warnings
        );
        assert!(
            parsed.warnings[0].starts_with("line 16"),
            "{:?}",
            parsed.warnings
        );
    }

    #[test]
    fn missing_field_and_syntax_errors_carry_lines() {
        let err = parse_config(&MINIMAL.replace("vols = [0.3]\n", ""))
            .unwrap_err()
            .to_string();
        assert!(err.contains("vols"), "{err}");
        let err = parse_config(&MINIMAL.replace("rate = 0.0", "rate = "))
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 11"), "{err}");
    }
}
