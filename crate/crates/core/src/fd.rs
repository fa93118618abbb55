//! Finite-difference solver for the untransformed equation in log-moneyness
//!
//! ```text
//! Φ_τ = Σ μ̂_i Φ_{z_i} + ½ Σ A_ij Φ_{z_i z_j} − (a·∇Φ)² / (2Φ)
//! ```
//!
//! Douglas ADI: the full operator is applied explicitly, then each axis'
//! drift and second derivative is corrected implicitly with weight `θ`.
//! Cross derivatives and the gradient-squared term stay explicit. The first
//! steps are replaced by fully implicit half-steps to damp the payoff kinks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{uniform_axis, GridError, GridField};
use crate::market::{build_quadratic_data, effective_drifts, MarketError, MarketModel};
use crate::transform::{terminal_payoff, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdError {
    #[error("finite-difference reference supports at most 3 axes, got {0}")]
    TooManyAxes(usize),
    #[error("invalid finite-difference configuration: {0}")]
    Config(String),
    #[error(
        "step {step}: explicit gradient term has Courant number {courant:.3} > {limit}; \
         increase time_steps"
    )]
    Cfl {
        step: usize,
        courant: f64,
        limit: f64,
    },
    #[error(
        "step {step}: solution left [{lo:.6e}, {hi:.6e}] (value {value:.6e}); scheme diverged"
    )]
    Diverged {
        step: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Market(#[from] MarketError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FdConfig {
    /// Nodes per axis; a single entry applies to every axis.
    pub nodes: Vec<usize>,
    pub time_steps: usize,
    /// Half-width in standard deviations `σ_i √T`, added around the drift path.
    pub half_width_sd: f64,
    pub theta: f64,
    /// Leading steps replaced by two implicit half-steps each.
    pub rannacher_steps: usize,
    pub cfl_limit: f64,
    /// Allowed excursion beyond the terminal range, as a fraction of that range.
    pub divergence_tolerance: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            nodes: vec![200],
            time_steps: 200,
            half_width_sd: 6.0,
            theta: 0.5,
            rannacher_steps: 2,
            cfl_limit: 1.0,
            divergence_tolerance: 0.05,
        }
    }
}

impl FdConfig {
    fn validate(&self, dim: usize) -> Result<(), FdError> {
        let fail = |m: &str| Err(FdError::Config(m.to_string()));
        if self.nodes.len() != 1 && self.nodes.len() != dim {
            return fail("nodes needs one entry or one per axis");
        }
        if self.nodes.iter().any(|&m| m < 5) {
            return fail("every axis needs at least 5 nodes");
        }
        if self.time_steps < 1 {
            return fail("time_steps must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return fail("theta must lie in [0, 1]");
        }
        if !(self.half_width_sd > 0.0) {
            return fail("half_width_sd must be > 0");
        }
        Ok(())
    }

    fn nodes_on(&self, axis: usize) -> usize {
        *self.nodes.get(axis).unwrap_or(&self.nodes[0])
    }
}

/// A constant-diffusion problem on a tensor grid.
pub struct FdProblem<'a> {
    pub axes: Vec<Vec<f64>>,
    /// Row-major terminal samples, positive.
    pub initial: Vec<f64>,
    pub cov: DMatrix<f64>,
    /// Gradient-squared loading `a`; zero for a linear problem.
    pub loading: DVector<f64>,
    /// Drift vector as a function of time-to-maturity.
    pub drift: &'a (dyn Fn(f64) -> Vec<f64> + Sync),
    pub horizon: f64,
}

struct Layout {
    shape: Vec<usize>,
    strides: Vec<usize>,
    spacing: Vec<f64>,
    len: usize,
}

impl Layout {
    fn new(axes: &[Vec<f64>]) -> Self {
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let d = shape.len();
        let mut strides = vec![1; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        let spacing = axes
            .iter()
            .map(|a| (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64)
            .collect();
        Self {
            len: shape.iter().product(),
            shape,
            strides,
            spacing,
        }
    }

    fn coords(&self, mut flat: usize, out: &mut [usize]) {
        for k in (0..self.shape.len()).rev() {
            out[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
    }

    fn interior(&self, idx: &[usize]) -> bool {
        idx.iter()
            .zip(&self.shape)
            .all(|(&i, &m)| i > 0 && i + 1 < m)
    }

    fn lines(&self, axis: usize) -> Vec<usize> {
        let m = self.shape[axis];
        let stride = self.strides[axis];
        let outer = self.len / (m * stride);
        (0..outer)
            .flat_map(|o| (0..stride).map(move |i| o * m * stride + i))
            .collect()
    }
}

/// Explicit operator on interior nodes; also returns the largest Courant
/// number of the gradient-squared term.
fn explicit_operator(
    lay: &Layout,
    u: &[f64],
    mu: &[f64],
    cov: &DMatrix<f64>,
    a: &DVector<f64>,
    out: &mut [f64],
) -> f64 {
    let d = lay.shape.len();
    let mut idx = vec![0usize; d];
    let mut grad = vec![0.0; d];
    let mut courant: f64 = 0.0;
    let nonlinear = a.iter().any(|&x| x != 0.0);
    for (flat, o) in out.iter_mut().enumerate() {
        lay.coords(flat, &mut idx);
        if !lay.interior(&idx) {
            *o = 0.0;
            continue;
        }
        let c = u[flat];
        let mut acc = 0.0;
        for i in 0..d {
            let (s, h) = (lay.strides[i], lay.spacing[i]);
            let (up, dn) = (u[flat + s], u[flat - s]);
            grad[i] = (up - dn) / (2.0 * h);
            acc += mu[i] * grad[i] + 0.5 * cov[(i, i)] * (up - 2.0 * c + dn) / (h * h);
            for j in i + 1..d {
                let (t, k) = (lay.strides[j], lay.spacing[j]);
                let cross = (u[flat + s + t] - u[flat + s - t] - u[flat - s + t] + u[flat - s - t])
                    / (4.0 * h * k);
                acc += cov[(i, j)] * cross;
            }
        }
        if nonlinear {
            let ag: f64 = (0..d).map(|i| a[i] * grad[i]).sum();
            acc -= ag * ag / (2.0 * c);
            let speed = (ag / c).abs();
            let cr: f64 = (0..d).map(|i| a[i].abs() * speed / lay.spacing[i]).sum();
            courant = courant.max(cr);
        }
        *o = acc;
    }
    courant
}

/// Solves `(I − w L_i) x = rhs` on every line along `axis`, with `L_i` the
/// 1-D drift-diffusion operator and linear extrapolation at both ends.
fn implicit_axis(
    lay: &Layout,
    axis: usize,
    w: f64,
    mu: f64,
    diff: f64,
    rhs: &[f64],
    out: &mut [f64],
) {
    let m = lay.shape[axis];
    let s = lay.strides[axis];
    let h = lay.spacing[axis];
    let lo = -w * (-mu / (2.0 * h) + 0.5 * diff / (h * h));
    let di = 1.0 + w * diff / (h * h);
    let up = -w * (mu / (2.0 * h) + 0.5 * diff / (h * h));
    let n = m - 2;
    let mut a = vec![lo; n];
    let mut b = vec![di; n];
    let mut c = vec![up; n];
    // U_0 = 2U_1 − U_2 and U_{m−1} = 2U_{m−2} − U_{m−3}
    b[0] += 2.0 * lo;
    c[0] -= lo;
    b[n - 1] += 2.0 * up;
    a[n - 1] -= up;
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    for start in lay.lines(axis) {
        let r = |k: usize| rhs[start + (k + 1) * s];
        cp[0] = c[0] / b[0];
        dp[0] = r(0) / b[0];
        for k in 1..n {
            let den = b[k] - a[k] * cp[k - 1];
            cp[k] = c[k] / den;
            dp[k] = (r(k) - a[k] * dp[k - 1]) / den;
        }
        let mut x = dp[n - 1];
        out[start + n * s] = x;
        for k in (0..n - 1).rev() {
            x = dp[k] - cp[k] * x;
            out[start + (k + 1) * s] = x;
        }
        out[start] = 2.0 * out[start + s] - out[start + 2 * s];
        out[start + (m - 1) * s] = 2.0 * out[start + (m - 2) * s] - out[start + (m - 3) * s];
    }
}

fn apply_axis_operator(lay: &Layout, axis: usize, u: &[f64], mu: f64, diff: f64, out: &mut [f64]) {
    let s = lay.strides[axis];
    let h = lay.spacing[axis];
    let m = lay.shape[axis];
    for start in lay.lines(axis) {
        for k in 1..m - 1 {
            let f = start + k * s;
            out[f] = mu * (u[f + s] - u[f - s]) / (2.0 * h)
                + 0.5 * diff * (u[f + s] - 2.0 * u[f] + u[f - s]) / (h * h);
        }
        out[start] = 0.0;
        out[start + (m - 1) * s] = 0.0;
    }
}

fn extrapolate_boundaries(lay: &Layout, u: &mut [f64]) {
    for axis in 0..lay.shape.len() {
        let s = lay.strides[axis];
        let m = lay.shape[axis];
        for start in lay.lines(axis) {
            u[start] = 2.0 * u[start + s] - u[start + 2 * s];
            u[start + (m - 1) * s] = 2.0 * u[start + (m - 2) * s] - u[start + (m - 3) * s];
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn douglas_step(
    lay: &Layout,
    u: &[f64],
    tau: f64,
    dt: f64,
    theta: f64,
    p: &FdProblem,
    scratch: &mut [Vec<f64>; 3],
) -> (Vec<f64>, f64) {
    let d = lay.shape.len();
    let mu_now = (p.drift)(tau);
    let mu_next = (p.drift)(tau + dt);
    let [f, lu, rhs] = scratch;
    let courant = explicit_operator(lay, u, &mu_now, &p.cov, &p.loading, f) * dt;
    let mut y: Vec<f64> = u.iter().zip(f.iter()).map(|(x, g)| x + dt * g).collect();
    let mut next = vec![0.0; lay.len];
    for i in 0..d {
        apply_axis_operator(lay, i, u, mu_now[i], p.cov[(i, i)], lu);
        for k in 0..lay.len {
            rhs[k] = y[k] - theta * dt * lu[k];
        }
        implicit_axis(
            lay,
            i,
            theta * dt,
            mu_next[i],
            p.cov[(i, i)],
            rhs,
            &mut next,
        );
        std::mem::swap(&mut y, &mut next);
    }
    extrapolate_boundaries(lay, &mut y);
    (y, courant)
}

/// Runs the scheme on an arbitrary problem and returns the values at `horizon`.
pub fn solve_problem(p: &FdProblem, cfg: &FdConfig) -> Result<Vec<f64>, FdError> {
    let d = p.axes.len();
    if d > 3 {
        return Err(FdError::TooManyAxes(d));
    }
    cfg.validate(d)?;
    let lay = Layout::new(&p.axes);
    let (lo, hi) = p
        .initial
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let slack = cfg.divergence_tolerance * (hi - lo).max(1e-12 * hi.abs());
    let mut u = p.initial.clone();
    let mut scratch = [vec![0.0; lay.len], vec![0.0; lay.len], vec![0.0; lay.len]];
    let dt = p.horizon / cfg.time_steps as f64;
    let mut tau = 0.0;
    for step in 1..=cfg.time_steps {
        let pieces: &[(f64, f64)] = if step <= cfg.rannacher_steps {
            &[(0.5, 1.0), (0.5, 1.0)]
        } else {
            &[(1.0, cfg.theta)]
        };
        for &(frac, theta) in pieces {
            let (next, courant) = douglas_step(&lay, &u, tau, frac * dt, theta, p, &mut scratch);
            if courant > cfg.cfl_limit {
                return Err(FdError::Cfl {
                    step,
                    courant,
                    limit: cfg.cfl_limit,
                });
            }
            u = next;
            tau += frac * dt;
        }
        if let Some(&value) = u
            .iter()
            .find(|&&v| !(v.is_finite() && v > 0.0 && v >= lo - slack && v <= hi + slack))
        {
            return Err(FdError::Diverged {
                step,
                value,
                lo: lo - slack,
                hi: hi + slack,
            });
        }
    }
    Ok(u)
}

/// Solves the model's equation for `Φ` on a `z`-grid covering the spot's
/// drift path; the result carries `τ = T`.
pub fn fd_solve(
    model: &MarketModel,
    alpha: &[f64],
    side: Side,
    cfg: &FdConfig,
) -> Result<GridField, FdError> {
    model.validate()?;
    let d = model.dim();
    if d > 3 {
        return Err(FdError::TooManyAxes(d));
    }
    cfg.validate(d)?;
    let t = model.maturity;
    let z0 = model.spot_log_moneyness();
    let shift = effective_drifts(model, t)?.shift();
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let spread = cfg.half_width_sd * model.vols[i] * t.sqrt();
            let lo = z0[i] + shift[i].min(0.0) - spread;
            let hi = z0[i] + shift[i].max(0.0) + spread;
            uniform_axis(0.5 * (lo + hi), 0.5 * (hi - lo), cfg.nodes_on(i))
        })
        .collect();
    let terminal = GridField::from_log_fn(axes.clone(), 0.0, |z| {
        -model.risk_aversion * terminal_payoff(z, alpha, model, side)
    })?;
    let (cov, loading) = build_quadratic_data(model);
    let adjusted = effective_drifts(model, 0.0)?.adjusted;
    let drift = move |tau: f64| -> Vec<f64> {
        let time = (t - tau).clamp(0.0, t);
        adjusted.iter().map(|m| m.value_at(time)).collect()
    };
    let problem = FdProblem {
        axes: axes.clone(),
        initial: terminal.values.clone(),
        cov,
        loading,
        drift: &drift,
        horizon: t,
    };
    let values = solve_problem(&problem, cfg)?;
    Ok(GridField::new(axes, values, terminal.log_scale, t)?)
}
