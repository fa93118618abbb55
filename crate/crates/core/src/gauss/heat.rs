use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GaussError, IfgtPlan, CUTOFF};
use crate::grid::GridField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatError {
    #[error("diffusion coefficient on axis {axis} is {value}, must be > 0")]
    Coefficient { axis: usize, value: f64 },
    #[error("time step {0} must be > 0")]
    Step(f64),
    #[error("axis {axis} out of range for a {dim}-dimensional field")]
    Axis { axis: usize, dim: usize },
    #[error(transparent)]
    Gauss(#[from] GaussError),
}

/// How each 1-D convolution is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelMethod {
    /// Truncated discrete stencil, exact to rounding.
    Direct,
    /// IFGT with the given number of Taylor terms.
    Ifgt { order: usize },
    /// IFGT only when its per-node cost is below the stencil width.
    Auto { order: usize },
}

impl Default for KernelMethod {
    fn default() -> Self {
        KernelMethod::Auto { order: 12 }
    }
}

const CLUSTER_RADIUS: f64 = 0.2;

enum AxisKernel {
    Direct {
        weights: Vec<f64>,
        mass: f64,
        pad: usize,
    },
    Ifgt {
        plan: IfgtPlan,
        mass: Vec<f64>,
        pad: usize,
    },
}

impl AxisKernel {
    fn build(m: usize, spacing: f64, h: f64, method: KernelMethod) -> Result<Self, GaussError> {
        let pad = (CUTOFF * h / spacing).ceil() as usize;
        let use_ifgt = match method {
            KernelMethod::Direct => false,
            KernelMethod::Ifgt { .. } => true,
            KernelMethod::Auto { order } => {
                let clusters_in_reach =
                    2.0 * (CUTOFF + CLUSTER_RADIUS) / (2.0 * CLUSTER_RADIUS) + 1.0;
                (2 * pad + 1) as f64 > 2.0 * order as f64 * clusters_in_reach
            }
        };
        if !use_ifgt {
            let weights: Vec<f64> = (0..=2 * pad)
                .map(|k| {
                    let x = (k as f64 - pad as f64) * spacing / h;
                    (-x * x).exp()
                })
                .collect();
            let mass = weights.iter().sum();
            return Ok(AxisKernel::Direct { weights, mass, pad });
        }
        let order = match method {
            KernelMethod::Ifgt { order } | KernelMethod::Auto { order } => order,
            KernelMethod::Direct => unreachable!(),
        };
        let sources: Vec<f64> = (0..m + 2 * pad)
            .map(|k| (k as f64 - pad as f64) * spacing)
            .collect();
        let targets: Vec<f64> = (0..m).map(|k| k as f64 * spacing).collect();
        let plan = IfgtPlan::new(&sources, &targets, h, order, CLUSTER_RADIUS)?;
        let mass = plan.apply(&vec![1.0; sources.len()]);
        Ok(AxisKernel::Ifgt { plan, mass, pad })
    }

    fn pad(&self) -> usize {
        match self {
            AxisKernel::Direct { pad, .. } | AxisKernel::Ifgt { pad, .. } => *pad,
        }
    }

    fn apply(&self, padded: &[f64], out: &mut [f64]) {
        match self {
            AxisKernel::Direct { weights, mass, .. } => {
                for (j, o) in out.iter_mut().enumerate() {
                    let window = &padded[j..j + weights.len()];
                    *o = window.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / mass;
                }
            }
            AxisKernel::Ifgt { plan, mass, .. } => {
                let (lo, hi) = padded
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                        (a.min(v), b.max(v))
                    });
                for ((o, v), m) in out.iter_mut().zip(plan.apply(padded)).zip(mass) {
                    *o = (v / m).clamp(lo, hi);
                }
            }
        }
    }
}

/// Convolves every fiber along `axis` with `x ↦ fiber_fn(x)` applied before
/// and `inverse` after; used directly by the heat step and by the Cole–Hopf
/// substep with a power transform.
pub(crate) fn convolve_axis(
    field: &mut GridField,
    axis: usize,
    coeff: f64,
    dtheta: f64,
    method: KernelMethod,
    pre: impl Fn(f64) -> f64 + Sync,
    post: impl Fn(f64) -> f64 + Sync,
) -> Result<(), HeatError> {
    if axis >= field.dim() {
        return Err(HeatError::Axis {
            axis,
            dim: field.dim(),
        });
    }
    if !(coeff > 0.0 && coeff.is_finite()) {
        return Err(HeatError::Coefficient { axis, value: coeff });
    }
    if !(dtheta > 0.0 && dtheta.is_finite()) {
        return Err(HeatError::Step(dtheta));
    }
    let m = field.axes[axis].len();
    let h = (2.0 * coeff * dtheta).sqrt();
    let kernel = AxisKernel::build(m, field.spacing(axis), h, method)?;
    let pad = kernel.pad();
    let stride = field.stride(axis);
    let starts = field.fiber_starts(axis);
    let values = &field.values;
    let results: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&s| {
            let mut padded = Vec::with_capacity(m + 2 * pad);
            let first = pre(values[s]);
            let last = pre(values[s + (m - 1) * stride]);
            padded.extend(std::iter::repeat_n(first, pad));
            padded.extend((0..m).map(|i| pre(values[s + i * stride])));
            padded.extend(std::iter::repeat_n(last, pad));
            let mut out = vec![0.0; m];
            kernel.apply(&padded, &mut out);
            out.iter_mut().for_each(|v| *v = post(*v));
            out
        })
        .collect();
    for (s, out) in starts.iter().zip(results) {
        for (i, v) in out.into_iter().enumerate() {
            field.values[s + i * stride] = v;
        }
    }
    Ok(())
}

/// Exact heat propagation `∂_θ Φ = ½ p_i ∂²_{u_i} Φ` for time `dtheta` along
/// each listed axis, one axis after another. `coeffs` is indexed by axis.
pub fn heat_step_separable(
    field: &GridField,
    coeffs: &[f64],
    dtheta: f64,
    axes: &[usize],
    method: KernelMethod,
) -> Result<GridField, HeatError> {
    let mut out = field.clone();
    for &axis in axes {
        let coeff = *coeffs.get(axis).ok_or(HeatError::Axis {
            axis,
            dim: coeffs.len(),
        })?;
        convolve_axis(&mut out, axis, coeff, dtheta, method, |v| v, |v| v)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::uniform_axis;

    fn gaussian(axes: Vec<Vec<f64>>, var: &[f64]) -> GridField {
        let var = var.to_vec();
        GridField::from_log_fn(axes, 0.0, move |u| {
            u.iter()
                .zip(&var)
                .map(|(x, v)| -x * x / (2.0 * v) - 0.5 * v.ln())
                .sum()
        })
        .unwrap()
    }

    #[test]
    fn constants_unchanged() {
        for method in [KernelMethod::Direct, KernelMethod::Ifgt { order: 12 }] {
            let f = GridField::new(
                vec![uniform_axis(0.0, 1.0, 40), uniform_axis(0.0, 2.0, 30)],
                vec![0.7; 1200],
                0.0,
                0.0,
            )
            .unwrap();
            let g = heat_step_separable(&f, &[0.3, 0.5], 0.1, &[0, 1], method).unwrap();
            assert!(g.values.iter().all(|v| (v - 0.7).abs() < 1e-12));
        }
    }

    #[test]
    fn bump_variance_grows_by_p_dtheta() {
        let (v, p, dt) = (0.04, 0.09, 0.5);
        for method in [KernelMethod::Direct, KernelMethod::Ifgt { order: 12 }] {
            let f = gaussian(vec![uniform_axis(0.0, 2.0, 401)], &[v]);
            let g = heat_step_separable(&f, &[p], dt, &[0], method).unwrap();
            let w = v + p * dt;
            for (i, &x) in g.axes[0].iter().enumerate() {
                if x.abs() < 0.6 {
                    let exact = (-x * x / (2.0 * w)).exp() / w.sqrt();
                    let got = g.log_value(i).exp();
                    assert!(((got - exact) / exact).abs() < 1e-4, "{method:?} {x}");
                }
            }
        }
    }

    #[test]
    fn product_data_stays_separable() {
        let axes = vec![uniform_axis(0.0, 1.5, 61), uniform_axis(0.2, 1.0, 41)];
        let f = GridField::from_log_fn(axes.clone(), 0.0, |u| {
            (2.0 + u[0].sin()).ln() + (1.5 + u[1] * u[1]).ln()
        })
        .unwrap();
        let g = heat_step_separable(&f, &[0.05, 0.02], 0.3, &[0, 1], KernelMethod::Direct).unwrap();
        let fa = GridField::from_log_fn(vec![axes[0].clone()], 0.0, |u| (2.0 + u[0].sin()).ln())
            .unwrap();
        let fb = GridField::from_log_fn(vec![axes[1].clone()], 0.0, |u| (1.5 + u[0] * u[0]).ln())
            .unwrap();
        let ga = heat_step_separable(&fa, &[0.05], 0.3, &[0], KernelMethod::Direct).unwrap();
        let gb = heat_step_separable(&fb, &[0.02], 0.3, &[0], KernelMethod::Direct).unwrap();
        for i in 0..61 {
            for j in 0..41 {
                let want = ga.log_value(i) + gb.log_value(j);
                let got = g.log_value(i * 41 + j);
                assert!((got - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn semigroup_and_maximum_principle() {
        let f = GridField::from_log_fn(vec![uniform_axis(0.0, 3.0, 301)], 0.0, |u| {
            -2.0 * u[0].min(0.0).exp()
        })
        .unwrap();
        let (lo, hi) = f.value_range();
        let full = heat_step_separable(&f, &[0.1], 0.2, &[0], KernelMethod::Direct).unwrap();
        let half = heat_step_separable(&f, &[0.1], 0.1, &[0], KernelMethod::Direct).unwrap();
        let twice = heat_step_separable(&half, &[0.1], 0.1, &[0], KernelMethod::Direct).unwrap();
        for i in 0..301 {
            assert!(full.values[i] >= lo && full.values[i] <= hi);
            if full.axes[0][i].abs() < 1.0 {
                assert!((full.values[i] - twice.values[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        let f = GridField::new(vec![uniform_axis(0.0, 1.0, 4)], vec![1.0; 4], 0.0, 0.0).unwrap();
        assert!(matches!(
            heat_step_separable(&f, &[0.0], 0.1, &[0], KernelMethod::Direct),
            Err(HeatError::Coefficient { .. })
        ));
        assert!(matches!(
            heat_step_separable(&f, &[0.1], -0.1, &[0], KernelMethod::Direct),
            Err(HeatError::Step(_))
        ));
        assert!(matches!(
            heat_step_separable(&f, &[0.1], 0.1, &[1], KernelMethod::Direct),
            Err(HeatError::Axis { .. })
        ));
    }
}
