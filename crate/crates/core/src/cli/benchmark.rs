use std::time::Instant;

use super::config::RunConfig;
use super::report::num;
use crate::fd::{fd_solve, FdConfig};
use crate::gauss::{direct_gauss_nd, ifgt_nd, taylor_term_count, GaussTransformSpecNd};
use crate::grid::GridField;
use crate::market::MarketModel;
use crate::pricer::{single_claim_oracle, PdeSolution, Pricer};
use crate::solver::{solution_axes, KernelChoice, SolverConfig};
use crate::transform::Side;

/// Version 1 of the benchmark CSV layout.
pub const CSV_HEADER: &str = "method,d,M,p,J,f_dp,wall_time_ns,max_rel_error,status";

struct Row {
    method: &'static str,
    d: usize,
    m: usize,
    p: Option<usize>,
    j: usize,
    wall_time_ns: Option<u128>,
    max_rel_error: Option<f64>,
    status: String,
}

impl Row {
    fn csv(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.method,
            self.d,
            self.m,
            opt(self.p.map(|p| p.to_string())),
            self.j,
            opt(self.p.map(|p| taylor_term_count(self.d, p).to_string())),
            opt(self.wall_time_ns.map(|t| t.to_string())),
            opt(self.max_rel_error.map(num)),
            self.status.replace(',', ";"),
        )
    }
}

/// The first `d` assets of `model`, unhedged.
fn restrict(model: &MarketModel, d: usize) -> MarketModel {
    let mut m = model.clone();
    m.spots.truncate(d);
    m.strikes.truncate(d);
    m.drifts.truncate(d);
    m.vols.truncate(d);
    m.corr_yy.truncate(d);
    for row in &mut m.corr_yy {
        row.truncate(d);
    }
    m.corr_xy.truncate(d);
    m.proxy_prices.truncate(d - 1);
    m
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| ((x - y) / y).abs())
        .fold(0.0, f64::max)
}

fn field_values(f: &GridField) -> Vec<f64> {
    (0..f.len()).map(|i| f.log_value(i).exp()).collect()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, u128) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_nanos())
}

fn failed(msg: impl std::fmt::Display) -> String {
    format!("error: {msg}")
}

/// `J` heat steps on the solution grid done as one non-separable
/// `d`-variate transform each, against the exact `d`-variate sum.
fn nd_heat_steps(pricer: &Pricer, m: usize, j: usize, order: usize) -> Result<(f64, u128), String> {
    let fs = pricer.system();
    let model = pricer.model();
    let d = fs.dim();
    let cfg = SolverConfig {
        nodes: vec![m],
        ..pricer.config().clone()
    };
    let u0 = vec![0.0; d];
    let axes = solution_axes(fs, &u0, model.maturity, &cfg);
    let dtau = model.maturity / j as f64;
    let h: Vec<f64> = fs.p.iter().map(|p| (2.0 * p * dtau).sqrt()).collect();
    let n: usize = axes.iter().map(Vec::len).product();
    let mut points = Vec::with_capacity(n * d);
    for flat in 0..n {
        let mut rest = flat;
        let mut coords = vec![0.0; d];
        for k in (0..d).rev() {
            let len = axes[k].len();
            coords[k] = axes[k][rest % len] / h[k];
            rest /= len;
        }
        points.extend(coords);
    }
    let spec = |w: Vec<f64>| GaussTransformSpecNd {
        dim: d,
        sources: points.clone(),
        weights: w,
        targets: points.clone(),
        bandwidth: 1.0,
        order,
        cluster_radius: 0.2,
    };
    let start: Vec<f64> = (0..n)
        .map(|flat| {
            let u: Vec<f64> = (0..d).map(|k| points[flat * d + k] * h[k]).collect();
            (-0.5 * u.iter().zip(&fs.p).map(|(x, p)| x * x / p).sum::<f64>()).exp() + 0.1
        })
        .collect();
    let run = |f: &dyn Fn(&GaussTransformSpecNd) -> Result<Vec<f64>, crate::gauss::GaussError>| {
        let mass = f(&spec(vec![1.0; n])).map_err(|e| e.to_string())?;
        let mut v = start.clone();
        for _ in 0..j {
            let s = f(&spec(v)).map_err(|e| e.to_string())?;
            v = s.iter().zip(&mass).map(|(a, b)| a / b).collect();
        }
        Ok::<_, String>(v)
    };
    let (fast, t) = timed(|| run(&ifgt_nd));
    let exact = run(&direct_gauss_nd)?;
    Ok((max_rel(&fast?, &exact), t))
}

/// Runs every cell of `cfg.run.benchmark` and returns the CSV text.
/// Failed or skipped cells keep their row with the reason in `status`.
pub fn run_benchmark(cfg: &RunConfig, mut progress: impl FnMut(&str)) -> String {
    let plan = &cfg.run.benchmark;
    let mut rows: Vec<Row> = Vec::new();
    let mut emit = |row: Row, progress: &mut dyn FnMut(&str)| {
        let line = row.csv();
        progress(&line);
        rows.push(row);
    };
    for &d in &plan.dims {
        for &m in &plan.nodes {
            for &j in &plan.time_steps {
                let base = |method, p, status: String| Row {
                    method,
                    d,
                    m,
                    p,
                    j,
                    wall_time_ns: None,
                    max_rel_error: None,
                    status,
                };
                if d == 0 || d > cfg.market.dim() {
                    emit(
                        base(
                            "direct",
                            None,
                            format!("skipped: market has {} assets", cfg.market.dim()),
                        ),
                        &mut progress,
                    );
                    continue;
                }
                let model = restrict(&cfg.market, d);
                let alpha = vec![0.0; d - 1];
                let solver = |kernel, order| SolverConfig {
                    nodes: vec![m],
                    time_steps: j,
                    kernel,
                    ifgt_order: order,
                    ..cfg.solver.clone()
                };
                let pricer = match Pricer::with_options(
                    &model,
                    &solver(KernelChoice::Direct, cfg.solver.ifgt_order),
                    Side::Buy,
                    &cfg.run.factorize,
                ) {
                    Ok(p) => p,
                    Err(e) => {
                        emit(base("direct", None, failed(e)), &mut progress);
                        continue;
                    }
                };
                let (direct, t) = timed(|| pricer.solve(&alpha));
                let direct: PdeSolution = match direct {
                    Ok(s) => s,
                    Err(e) => {
                        emit(base("direct", None, failed(e)), &mut progress);
                        continue;
                    }
                };
                let oracle_err = (d == 1)
                    .then(|| single_claim_oracle(&model).ok())
                    .flatten()
                    .map(|q| ((direct.price - q) / q).abs());
                emit(
                    Row {
                        wall_time_ns: Some(t),
                        max_rel_error: oracle_err,
                        ..base("direct", None, "ok".into())
                    },
                    &mut progress,
                );
                let exact = field_values(&direct.field);

                for &p in &plan.orders {
                    let row = match pricer.with_config(&solver(KernelChoice::Ifgt, p)) {
                        Err(e) => base("ifgt", Some(p), failed(e)),
                        Ok(fast) => match timed(|| fast.solve(&alpha)) {
                            (Ok(s), t) => Row {
                                wall_time_ns: Some(t),
                                max_rel_error: Some(max_rel(&field_values(&s.field), &exact)),
                                ..base("ifgt", Some(p), "ok".into())
                            },
                            (Err(e), _) => base("ifgt", Some(p), failed(e)),
                        },
                    };
                    emit(row, &mut progress);

                    let points = m.saturating_pow(d as u32);
                    let row = if d > 3 {
                        base("ifgt_nd", Some(p), "skipped: d > 3".into())
                    } else if points > plan.max_nd_points {
                        base(
                            "ifgt_nd",
                            Some(p),
                            format!(
                                "skipped: {points} points > max_nd_points {}",
                                plan.max_nd_points
                            ),
                        )
                    } else {
                        match nd_heat_steps(&pricer, m, j, p) {
                            Ok((err, t)) => Row {
                                wall_time_ns: Some(t),
                                max_rel_error: Some(err),
                                ..base("ifgt_nd", Some(p), "ok".into())
                            },
                            Err(e) => base("ifgt_nd", Some(p), failed(e)),
                        }
                    };
                    emit(row, &mut progress);
                }

                let points = m.saturating_pow(d as u32);
                let row = if d > 2 {
                    base("fd", None, "skipped: d > 2".into())
                } else if points > plan.max_fd_points {
                    base(
                        "fd",
                        None,
                        format!(
                            "skipped: {points} points > max_fd_points {}",
                            plan.max_fd_points
                        ),
                    )
                } else {
                    let fd_cfg = FdConfig {
                        nodes: vec![m],
                        ..cfg.fd.clone()
                    };
                    match timed(|| fd_solve(&model, &alpha, Side::Buy, &fd_cfg)) {
                        (Ok(f), t) => match f.interpolate_log(&model.spot_log_moneyness()) {
                            Ok(lp) => {
                                let g = pricer.price_from_log_phi(lp, &alpha);
                                Row {
                                    wall_time_ns: Some(t),
                                    max_rel_error: Some(((g - direct.price) / direct.price).abs()),
                                    ..base("fd", None, "ok".into())
                                }
                            }
                            Err(e) => base("fd", None, failed(e)),
                        },
                        (Err(e), _) => base("fd", None, failed(e)),
                    }
                };
                emit(row, &mut progress);
            }
        }
    }
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}
