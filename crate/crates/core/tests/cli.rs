use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_proxy-hedge");

fn config(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Value of `key = ...` in the `[section]` of a report.
fn field(report: &str, section: &str, key: &str) -> Option<String> {
    let mut current = "";
    for line in report.lines() {
        if let Some(s) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = s;
        } else if current == section {
            if let Some((k, v)) = line.split_once(" = ") {
                if k == key {
                    return Some(v.to_string());
                }
            }
        }
    }
    None
}

fn top(report: &str, key: &str) -> Option<String> {
    field(report, "", key)
}

#[test]
fn zero_payoff_prices_to_zero() {
    let o = run(&["price", "--config", &config("zero_payoff.toml")]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout(&o);
    assert_eq!(field(&r, "price", "g").as_deref(), Some("0.0"));
    assert_eq!(field(&r, "price", "phi_at_spot").as_deref(), Some("1.0"));
}

#[test]
fn perfect_correlation_is_a_numerical_failure() {
    let o = run(&["price", "--config", &config("singular.toml")]);
    assert_eq!(o.status.code(), Some(2));
    let r = stdout(&o);
    assert_eq!(top(&r, "stage").as_deref(), Some("\"factorize\""));
    assert!(top(&r, "error").unwrap().contains("stiff"), "{r}");
}

#[test]
fn price_report_repeats_factorizer_output() {
    let price = stdout(&run(&["price", "--config", &config("worked_example.toml")]));
    let fact = stdout(&run(&[
        "factorize",
        "--config",
        &config("worked_example.toml"),
    ]));
    for key in ["p", "b0", "beta", "d"] {
        let a = field(&price, "factorization", key);
        assert!(a.is_some(), "{key} missing from price report");
        assert_eq!(a, field(&fact, "factorization", key), "{key}");
    }
    assert_eq!(
        field(&fact, "verification", "passed").as_deref(),
        Some("true")
    );
    assert_eq!(top(&price, "config_sha256"), top(&fact, "config_sha256"));
}

#[test]
fn missing_or_bad_config_exits_one() {
    let o = run(&["price"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["price", "--config", "/nonexistent/file.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(top(&stdout(&o), "stage").as_deref(), Some("\"config\""));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(config("single_claim.toml"))
        .unwrap()
        .replace("vols = [0.3]", "vols = [-0.3]");
    std::fs::write(&bad, text).unwrap();
    let o = run(&["price", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = top(&stdout(&o), "error").unwrap();
    assert!(err.contains("line 6") && err.contains("vols"), "{err}");
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.txt");
    let o = run(&[
        "implied-gamma",
        "--config",
        &config("implied_gamma.toml"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let r = std::fs::read_to_string(Path::new(&out)).unwrap();
    let gamma: f64 = field(&r, "implied_gamma", "gamma")
        .unwrap()
        .parse()
        .unwrap();
    let g: f64 = field(&r, "implied_gamma", "price_at_gamma")
        .unwrap()
        .parse()
        .unwrap();
    assert!(gamma > 1e-3 && gamma < 20.0);
    assert!((g - 8.5).abs() < 1e-4, "{g}");
}

#[test]
fn implied_gamma_outside_range_names_the_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let text = std::fs::read_to_string(config("implied_gamma.toml"))
        .unwrap()
        .replace("observed_price = 8.5", "observed_price = 12.0");
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["implied-gamma", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(top(&stdout(&o), "error")
        .unwrap()
        .contains("attainable range"));
}

#[test]
fn unknown_keys_are_warnings_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let text = std::fs::read_to_string(config("zero_payoff.toml")).unwrap()
        + "\n[solver]\ntime_stpes = 3\n";
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["price", "--verbose", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("solver.time_stpes"));
    assert!(top(&stdout(&o), "config_warnings")
        .unwrap()
        .contains("time_stpes"));
}

#[test]
fn benchmark_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.toml");
    let text = std::fs::read_to_string(config("single_claim.toml")).unwrap()
        + "\n[run.benchmark]\ndims = [1, 2]\nnodes = [256]\norders = [4, 8]\ntime_steps = [2]\n";
    std::fs::write(&cfg, text).unwrap();
    let o = run(&[
        "benchmark",
        "--config",
        cfg.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("method,d,M,p,J,f_dp,wall_time_ns,max_rel_error,status")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 9));
    let ifgt = |p: &str| {
        rows.iter()
            .find(|r| r[0] == "ifgt" && r[1] == "1" && r[2] == "256" && r[3] == p)
            .unwrap()
            .clone()
    };
    assert_eq!(ifgt("4")[5], "4");
    let e4: f64 = ifgt("4")[7].parse().unwrap();
    let e8: f64 = ifgt("8")[7].parse().unwrap();
    assert!(e8 <= e4);
    // a one-asset market cannot supply a two-asset cell
    assert!(rows
        .iter()
        .any(|r| r[1] == "2" && r[8].starts_with("skipped")));
}
