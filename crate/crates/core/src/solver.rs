//! Strang splitting for `Φ_τ = ½ Σ p_i Φ_{u_i u_i} − ½ β Φ_{u_0}² / Φ`.
//!
//! The `u_0` part is made linear by the power substitution `Φ̄ = Φ^κ`,
//! `κ = 1 − β/p_0`, after which every substep is an exact Gaussian convolution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factorizer::FactorizedSystem;
use crate::gauss::convolve_axis;
use crate::gauss::{heat_step_separable, HeatError, KernelMethod};
use crate::grid::{uniform_axis, GridError, GridField};
use crate::market::MarketModel;
use crate::transform::{terminal_payoff, CoordinateMap, Side, TransformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(
        "Cole–Hopf exponent 1 − β/p₀ = {kappa:e} is within {guard:e} of zero; \
         the power transform is singular, use the finite-difference solver instead"
    )]
    ColeHopfSingular { kappa: f64, guard: f64 },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        source: Box<SolverError>,
    },
    #[error(transparent)]
    Heat(#[from] HeatError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Nodes per axis; a single entry applies to every axis.
    pub nodes: Vec<usize>,
    pub time_steps: usize,
    /// Taylor terms for IFGT convolutions.
    pub ifgt_order: usize,
    pub kernel: KernelChoice,
    /// Grid half-width in standard deviations `√(p_i T)`.
    pub half_width_sd: f64,
    pub cole_hopf_guard: f64,
    /// Allowed excursion of `log Φ` beyond the terminal range before a step is
    /// flagged.
    pub bound_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    #[default]
    Auto,
    Direct,
    Ifgt,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nodes: vec![128],
            time_steps: 16,
            ifgt_order: 12,
            kernel: KernelChoice::Auto,
            half_width_sd: 6.0,
            cole_hopf_guard: 1e-6,
            bound_tolerance: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, dim: usize) -> Result<(), SolverError> {
        let fail = |m: String| Err(SolverError::Config(m));
        if self.time_steps < 1 {
            return fail("time_steps must be >= 1".into());
        }
        if self.ifgt_order < 2 {
            return fail("ifgt_order must be >= 2".into());
        }
        if self.nodes.len() != 1 && self.nodes.len() != dim {
            return fail(format!(
                "nodes needs 1 or {dim} entries, got {}",
                self.nodes.len()
            ));
        }
        if let Some(m) = self.nodes.iter().find(|&&m| m < 8) {
            return fail(format!("every axis needs at least 8 nodes, got {m}"));
        }
        if !(self.half_width_sd > 0.0) || !(self.cole_hopf_guard > 0.0) {
            return fail("half_width_sd and cole_hopf_guard must be > 0".into());
        }
        Ok(())
    }

    pub fn nodes_on(&self, axis: usize) -> usize {
        *self.nodes.get(axis).unwrap_or(&self.nodes[0])
    }

    pub fn method(&self) -> KernelMethod {
        let order = self.ifgt_order;
        match self.kernel {
            KernelChoice::Auto => KernelMethod::Auto { order },
            KernelChoice::Direct => KernelMethod::Direct,
            KernelChoice::Ifgt => KernelMethod::Ifgt { order },
        }
    }
}

/// Per-step record of the solution range.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostic {
    pub step: usize,
    pub tau: f64,
    pub log_min: f64,
    pub log_max: f64,
    pub within_bounds: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvolveDiagnostics {
    pub steps: Vec<StepDiagnostic>,
    pub initial_log_range: (f64, f64),
    pub bound_violations: usize,
}

fn cole_hopf_exponent(p0: f64, beta: f64, guard: f64) -> Result<f64, SolverError> {
    let kappa = 1.0 - beta / p0;
    if kappa.abs() <= guard || !kappa.is_finite() {
        return Err(SolverError::ColeHopfSingular { kappa, guard });
    }
    Ok(kappa)
}

/// Solves `Φ_θ = ½ p_0 Φ_{u_0 u_0} − ½ β Φ_{u_0}²/Φ` along axis 0 for `dtheta`.
pub fn cole_hopf_substep(
    field: &GridField,
    p0: f64,
    beta: f64,
    dtheta: f64,
    guard: f64,
    method: KernelMethod,
) -> Result<GridField, SolverError> {
    let kappa = cole_hopf_exponent(p0, beta, guard)?;
    field.check_positive()?;
    let mut out = field.clone();
    if kappa == 1.0 {
        convolve_axis(&mut out, 0, p0, dtheta, method, |v| v, |v| v)?;
    } else {
        let inv = 1.0 / kappa;
        convolve_axis(
            &mut out,
            0,
            p0,
            dtheta,
            method,
            |v| v.powf(kappa),
            |v| v.powf(inv),
        )?;
    }
    Ok(out)
}

/// Half nonlinear step, full heat step on axes `1..=N`, half nonlinear step.
pub fn strang_step(
    field: &GridField,
    fs: &FactorizedSystem,
    dtau: f64,
    cfg: &SolverConfig,
) -> Result<GridField, SolverError> {
    let method = cfg.method();
    let half = 0.5 * dtau;
    let guard = cfg.cole_hopf_guard;
    let mut f = cole_hopf_substep(field, fs.p[0], fs.beta, half, guard, method)?;
    let axes: Vec<usize> = (1..fs.dim()).collect();
    if !axes.is_empty() {
        f = heat_step_separable(&f, &fs.p, dtau, &axes, method)?;
    }
    f = cole_hopf_substep(&f, fs.p[0], fs.beta, half, guard, method)?;
    f.tau = field.tau + dtau;
    f.renormalize();
    Ok(f)
}

fn log_range(field: &GridField) -> (f64, f64) {
    let (lo, hi) = field.value_range();
    (lo.ln() + field.log_scale, hi.ln() + field.log_scale)
}

/// Advances `phi0` through `cfg.time_steps` Strang steps up to `maturity`.
pub fn evolve(
    phi0: &GridField,
    fs: &FactorizedSystem,
    maturity: f64,
    cfg: &SolverConfig,
) -> Result<(GridField, EvolveDiagnostics), SolverError> {
    evolve_with(phi0, fs, maturity, cfg, |_| {})
}

/// [`evolve`] with a callback after every step.
pub fn evolve_with(
    phi0: &GridField,
    fs: &FactorizedSystem,
    maturity: f64,
    cfg: &SolverConfig,
    mut on_step: impl FnMut(&StepDiagnostic),
) -> Result<(GridField, EvolveDiagnostics), SolverError> {
    cfg.validate(phi0.dim())?;
    let j = cfg.time_steps;
    let dtau = (maturity - phi0.tau) / j as f64;
    let initial = log_range(phi0);
    let mut diag = EvolveDiagnostics {
        initial_log_range: initial,
        ..Default::default()
    };
    let mut field = phi0.clone();
    for step in 1..=j {
        field = strang_step(&field, fs, dtau, cfg).map_err(|e| SolverError::Step {
            step,
            source: Box::new(e),
        })?;
        let (lo, hi) = log_range(&field);
        let tol = cfg.bound_tolerance * (1.0 + initial.0.abs().max(initial.1.abs()));
        let within_bounds = lo >= initial.0 - tol && hi <= initial.1 + tol;
        if !within_bounds {
            diag.bound_violations += 1;
        }
        let d = StepDiagnostic {
            step,
            tau: field.tau,
            log_min: lo,
            log_max: hi,
            within_bounds,
        };
        on_step(&d);
        diag.steps.push(d);
    }
    Ok((field, diag))
}

/// `log Φ` at `u_star`.
pub fn readout(field: &GridField, u_star: &[f64]) -> Result<f64, SolverError> {
    Ok(field.interpolate_log(u_star)?)
}

/// Grid axes centred on the point `u*` that is read out at maturity.
pub fn solution_axes(
    fs: &FactorizedSystem,
    u_star: &[f64],
    maturity: f64,
    cfg: &SolverConfig,
) -> Vec<Vec<f64>> {
    (0..fs.dim())
        .map(|i| {
            let half = cfg.half_width_sd * (fs.p[i] * maturity).sqrt();
            uniform_axis(u_star[i], half, cfg.nodes_on(i))
        })
        .collect()
}

/// Terminal field `Φ₀` sampled at `z = R⁻ᵀ u`.
pub fn terminal_field(
    model: &MarketModel,
    cm: &CoordinateMap,
    axes: Vec<Vec<f64>>,
    alpha: &[f64],
    side: Side,
) -> Result<GridField, SolverError> {
    let gamma = model.risk_aversion;
    Ok(GridField::from_log_fn(axes, 0.0, |u| {
        -gamma * terminal_payoff(&cm.unrotate(u), alpha, model, side)
    })?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorizer::{build_transform, FactorizeOptions};
    use crate::market::{build_quadratic_data, tests::example_market};

    fn bump(axes: Vec<Vec<f64>>) -> GridField {
        GridField::from_log_fn(axes, 0.0, |u| {
            (1.0 + 0.8 * (-u.iter().map(|x| x * x).sum::<f64>() * 8.0).exp()).ln()
        })
        .unwrap()
    }

    #[test]
    fn zero_beta_is_a_heat_step() {
        let f = bump(vec![uniform_axis(0.0, 1.5, 101)]);
        let a = cole_hopf_substep(&f, 0.07, 0.0, 0.1, 1e-6, KernelMethod::Direct).unwrap();
        let b = heat_step_separable(&f, &[0.07], 0.1, &[0], KernelMethod::Direct).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_survive_cole_hopf() {
        let f = GridField::new(vec![uniform_axis(0.0, 1.0, 50)], vec![0.3; 50], 2.0, 0.0).unwrap();
        let g = cole_hopf_substep(
            &f,
            0.0678,
            0.1446f64.powi(2),
            0.01,
            1e-6,
            KernelMethod::Direct,
        )
        .unwrap();
        for v in &g.values {
            assert!((v - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_exponent_rejected() {
        let f = GridField::new(vec![uniform_axis(0.0, 1.0, 10)], vec![1.0; 10], 0.0, 0.0).unwrap();
        let err = cole_hopf_substep(&f, 0.04, 0.04, 0.1, 1e-6, KernelMethod::Direct).unwrap_err();
        assert!(matches!(err, SolverError::ColeHopfSingular { .. }));
        assert!(err.to_string().contains("finite-difference"));
    }

    fn fake_system(p: Vec<f64>, beta: f64) -> FactorizedSystem {
        let n = p.len();
        FactorizedSystem {
            d: vec![-1.0; n],
            pinned: n - 1,
            r: nalgebra::DMatrix::identity(n, n),
            lambda: vec![0.0; n],
            b: {
                let mut b = vec![0.0; n];
                b[0] = beta.sqrt();
                b
            },
            p,
            beta,
            residual: 0.0,
            iterations: 0,
            start: crate::factorizer::RootStart::InitialGuess,
        }
    }

    #[test]
    fn single_axis_half_steps_compose() {
        let fs = fake_system(vec![0.05], 0.01);
        let cfg = SolverConfig {
            kernel: KernelChoice::Direct,
            ..Default::default()
        };
        let f = bump(vec![uniform_axis(0.0, 2.0, 201)]);
        let one = strang_step(&f, &fs, 0.2, &cfg).unwrap();
        let full = cole_hopf_substep(&f, 0.05, 0.01, 0.2, 1e-6, KernelMethod::Direct).unwrap();
        for i in 0..201 {
            if f.axes[0][i].abs() < 1.0 {
                assert!((one.log_value(i) - full.log_value(i)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn linear_case_equals_single_heat_step() {
        let fs = fake_system(vec![0.04, 0.02, 0.03], 0.0);
        let cfg = SolverConfig {
            kernel: KernelChoice::Direct,
            ..Default::default()
        };
        let axes = vec![
            uniform_axis(0.0, 1.0, 41),
            uniform_axis(0.0, 0.8, 33),
            uniform_axis(0.0, 0.9, 29),
        ];
        let f = bump(axes);
        let s = strang_step(&f, &fs, 0.3, &cfg).unwrap();
        let h = heat_step_separable(&f, &fs.p, 0.3, &[0, 1, 2], KernelMethod::Direct).unwrap();
        for i in 0..f.len() {
            let u0 = f.axes[0][i / (33 * 29)];
            if u0.abs() < 0.5 {
                assert!((s.log_value(i) - h.log_value(i)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_payoff_stays_one() {
        let mut m = example_market();
        m.risk_aversion = 1e-300;
        m.spots.truncate(2);
        m.strikes.truncate(2);
        m.drifts.truncate(2);
        m.vols.truncate(2);
        m.corr_yy = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
        m.corr_xy.truncate(2);
        m.proxy_prices.truncate(1);
        let (a, v) = build_quadratic_data(&m);
        let fs = build_transform(&a, &v, &FactorizeOptions::default()).unwrap();
        let cm = CoordinateMap::new(&fs.r, &m).unwrap();
        let cfg = SolverConfig {
            nodes: vec![16],
            time_steps: 4,
            ..Default::default()
        };
        let u = cm
            .to_factorized(&m.spot_log_moneyness(), m.maturity)
            .unwrap();
        let axes = solution_axes(&fs, &u, m.maturity, &cfg);
        let phi0 = terminal_field(&m, &cm, axes, &[0.0], Side::Buy).unwrap();
        let (phi, diag) = evolve(&phi0, &fs, m.maturity, &cfg).unwrap();
        assert_eq!(diag.bound_violations, 0);
        assert!(readout(&phi, &u).unwrap().abs() < 1e-12);
    }
}
