//! Tensor-product grids of positive samples stored as `exp(log_scale) · values`.
//!
//! The splitting solver's equation is positively 1-homogeneous in `Φ`, so the
//! common factor `exp(log_scale)` is carried separately and never underflows.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("axis {axis} needs at least 2 uniformly spaced nodes")]
    Axis { axis: usize },
    #[error("expected {expected} values, got {found}")]
    Size { expected: usize, found: usize },
    #[error("value at flat index {index} is {value}, expected finite and > 0")]
    NotPositive { index: usize, value: f64 },
    #[error(
        "point {value} on axis {axis} is outside [{lo}, {hi}]; \
         the grid half-width must cover at least {needed} on that axis"
    )]
    OutsideHull {
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
        needed: f64,
    },
    #[error("expected a point of dimension {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub axes: Vec<Vec<f64>>,
    /// Row-major samples, last axis fastest.
    pub values: Vec<f64>,
    pub log_scale: f64,
    pub tau: f64,
}

/// `n` equally spaced nodes on `[center − half, center + half]`.
pub fn uniform_axis(center: f64, half: f64, n: usize) -> Vec<f64> {
    let step = 2.0 * half / (n - 1) as f64;
    (0..n).map(|i| center - half + step * i as f64).collect()
}

impl GridField {
    pub fn new(
        axes: Vec<Vec<f64>>,
        values: Vec<f64>,
        log_scale: f64,
        tau: f64,
    ) -> Result<Self, GridError> {
        for (axis, a) in axes.iter().enumerate() {
            if a.len() < 2 || a.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(GridError::Axis { axis });
            }
        }
        let expected: usize = axes.iter().map(Vec::len).product();
        if values.len() != expected {
            return Err(GridError::Size {
                expected,
                found: values.len(),
            });
        }
        let field = Self {
            axes,
            values,
            log_scale,
            tau,
        };
        field.check_positive()?;
        Ok(field)
    }

    /// Samples `exp(log_f(u))`, normalized by the largest exponent.
    pub fn from_log_fn(
        axes: Vec<Vec<f64>>,
        tau: f64,
        log_f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self, GridError> {
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let total: usize = shape.iter().product();
        let mut point = vec![0.0; axes.len()];
        let mut logs = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            for k in (0..axes.len()).rev() {
                point[k] = axes[k][rem % shape[k]];
                rem /= shape[k];
            }
            logs.push(log_f(&point));
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let values = logs.iter().map(|l| (l - top).exp()).collect();
        Self::new(axes, values, top, tau)
    }

    pub fn check_positive(&self) -> Result<(), GridError> {
        match self
            .values
            .iter()
            .position(|v| !(v.is_finite() && *v > 0.0))
        {
            Some(index) => Err(GridError::NotPositive {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let a = &self.axes[axis];
        (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(Vec::len).product()
    }

    /// Flat index of the first node of every fiber along `axis`.
    pub fn fiber_starts(&self, axis: usize) -> Vec<usize> {
        let stride = self.stride(axis);
        let m = self.axes[axis].len();
        let outer = self.len() / (m * stride);
        (0..outer)
            .flat_map(|o| (0..stride).map(move |i| o * m * stride + i))
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, a)| acc * a.len() + i)
    }

    /// `log Φ` at a node.
    pub fn log_value(&self, flat: usize) -> f64 {
        self.values[flat].ln() + self.log_scale
    }

    /// Smallest and largest stored value (without the scale factor).
    pub fn value_range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Moves the largest value to 1 and folds the factor into `log_scale`.
    pub fn renormalize(&mut self) {
        let top = self.value_range().1;
        if top > 0.0 && top.is_finite() && top != 1.0 {
            let inv = 1.0 / top;
            for v in &mut self.values {
                *v *= inv;
            }
            self.log_scale += top.ln();
        }
    }

    /// Tensor 4-point cubic Lagrange interpolation. The result may overshoot the
    /// stencil's sample range by half its spread (enough for smooth extrema)
    /// but never drops below half the smallest sample. Returns `log Φ`.
    pub fn interpolate_log(&self, u: &[f64]) -> Result<f64, GridError> {
        let d = self.dim();
        if u.len() != d {
            return Err(GridError::Dimension {
                expected: d,
                found: u.len(),
            });
        }
        let mut base = Vec::with_capacity(d);
        let mut weights = Vec::with_capacity(d);
        for (axis, (&x, a)) in u.iter().zip(&self.axes).enumerate() {
            let (lo, hi) = (a[0], a[a.len() - 1]);
            if !(x >= lo && x <= hi) {
                let center = 0.5 * (lo + hi);
                return Err(GridError::OutsideHull {
                    axis,
                    value: x,
                    lo,
                    hi,
                    needed: (x - center).abs(),
                });
            }
            let m = a.len();
            let h = self.spacing(axis);
            let t = (x - lo) / h;
            let (start, n) = if m < 4 {
                (0, m)
            } else {
                let i = (t.floor() as isize).clamp(0, m as isize - 2) as usize;
                (i.saturating_sub(1).min(m - 4), 4)
            };
            let nodes: Vec<f64> = (0..n).map(|k| (start + k) as f64).collect();
            let w: Vec<f64> = (0..n)
                .map(|k| {
                    (0..n)
                        .filter(|&j| j != k)
                        .map(|j| (t - nodes[j]) / (nodes[k] - nodes[j]))
                        .product()
                })
                .collect();
            base.push(start);
            weights.push(w);
        }
        let counts: Vec<usize> = weights.iter().map(Vec::len).collect();
        let total: usize = counts.iter().product();
        let mut acc = 0.0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut idx = vec![0usize; d];
        for flat in 0..total {
            let mut rem = flat;
            let mut w = 1.0;
            for k in (0..d).rev() {
                let o = rem % counts[k];
                rem /= counts[k];
                idx[k] = base[k] + o;
                w *= weights[k][o];
            }
            let v = self.values[self.flat_index(&idx)];
            lo = lo.min(v);
            hi = hi.max(v);
            acc += w * v;
        }
        let slack = 0.5 * (hi - lo);
        Ok(acc.clamp((lo - slack).max(0.5 * lo), hi + slack).ln() + self.log_scale)
    }
}
