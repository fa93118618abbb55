//! Gaussian-kernel summation `v(t_j) = Σ_k w_k exp(−(t_j − s_k)² / h²)`.
//!
//! [`direct_gauss_1d`] is the exact O(M·M) sum, [`ifgt_1d`] the Improved Fast
//! Gauss Transform, and [`heat`] applies both to grid fields.

mod heat;
mod ifgt;
mod ifgt_nd;

pub(crate) use heat::convolve_axis;
pub use heat::{heat_step_separable, HeatError, KernelMethod};
pub use ifgt::{ifgt_1d, ifgt_error_bound, IfgtPlan};
pub use ifgt_nd::{direct_gauss_nd, ifgt_nd, GaussTransformSpecNd};

use thiserror::Error;

/// Kernel support used everywhere, in bandwidths: `e^{−36} ≈ 2.3e−16`.
pub const CUTOFF: f64 = 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussError {
    #[error("bandwidth must be positive and finite, got {0}")]
    Bandwidth(f64),
    #[error("truncation order must be at least 1")]
    Order,
    #[error("{sources} sources but {weights} weights")]
    Weights { sources: usize, weights: usize },
    #[error("non-finite input")]
    NonFinite,
}

/// A 1-D Gaussian transform problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussTransformSpec {
    pub sources: Vec<f64>,
    pub weights: Vec<f64>,
    pub targets: Vec<f64>,
    pub bandwidth: f64,
    /// Number of Taylor terms kept per cluster.
    pub order: usize,
    /// Cluster half-width in units of the bandwidth.
    pub cluster_radius: f64,
}

impl GaussTransformSpec {
    pub fn new(sources: Vec<f64>, weights: Vec<f64>, targets: Vec<f64>, bandwidth: f64) -> Self {
        Self {
            sources,
            weights,
            targets,
            bandwidth,
            order: 12,
            cluster_radius: 0.2,
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn validate(&self) -> Result<(), GaussError> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(GaussError::Bandwidth(self.bandwidth));
        }
        if self.order < 1 {
            return Err(GaussError::Order);
        }
        if self.sources.len() != self.weights.len() {
            return Err(GaussError::Weights {
                sources: self.sources.len(),
                weights: self.weights.len(),
            });
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !(finite(&self.sources) && finite(&self.weights) && finite(&self.targets))
            || !(self.cluster_radius > 0.0 && self.cluster_radius.is_finite())
        {
            return Err(GaussError::NonFinite);
        }
        Ok(())
    }
}

/// Exact kernel sum, every source against every target.
pub fn direct_gauss_1d(spec: &GaussTransformSpec) -> Result<Vec<f64>, GaussError> {
    spec.validate()?;
    let inv_h2 = 1.0 / (spec.bandwidth * spec.bandwidth);
    Ok(spec
        .targets
        .iter()
        .map(|&t| {
            spec.sources
                .iter()
                .zip(&spec.weights)
                .map(|(&s, &w)| w * (-(t - s) * (t - s) * inv_h2).exp())
                .sum()
        })
        .collect())
}

/// `f(d, p) = C(p − 1 + d, d)`: monomials in `d` variables of total degree below `p`.
pub fn taylor_term_count(d: usize, p: usize) -> u64 {
    assert!(
        d >= 1 && p >= 1,
        "taylor_term_count needs d >= 1 and p >= 1"
    );
    let n = (p - 1 + d) as u64;
    let k = d.min(p - 1) as u64;
    let mut c = 1u64;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}
