use super::{GaussError, CUTOFF};

/// A `d`-variate Gaussian transform with points stored row-major (`n × d`).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussTransformSpecNd {
    pub dim: usize,
    pub sources: Vec<f64>,
    pub weights: Vec<f64>,
    pub targets: Vec<f64>,
    pub bandwidth: f64,
    pub order: usize,
    pub cluster_radius: f64,
}

impl GaussTransformSpecNd {
    fn validate(&self) -> Result<(), GaussError> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(GaussError::Bandwidth(self.bandwidth));
        }
        if self.order < 1 {
            return Err(GaussError::Order);
        }
        if self.dim == 0
            || self.sources.len() != self.weights.len() * self.dim
            || self.targets.len() % self.dim != 0
        {
            return Err(GaussError::Weights {
                sources: self.sources.len() / self.dim.max(1),
                weights: self.weights.len(),
            });
        }
        Ok(())
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn direct_gauss_nd(spec: &GaussTransformSpecNd) -> Result<Vec<f64>, GaussError> {
    spec.validate()?;
    let d = spec.dim;
    let inv_h2 = 1.0 / (spec.bandwidth * spec.bandwidth);
    Ok(spec
        .targets
        .chunks(d)
        .map(|t| {
            spec.sources
                .chunks(d)
                .zip(&spec.weights)
                .map(|(s, &w)| w * (-dist2(t, s) * inv_h2).exp())
                .sum()
        })
        .collect())
}

/// Multi-indices of total degree `< p` in graded order.
fn multi_indices(d: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; d]];
    let mut frontier = vec![(vec![0; d], 0usize)];
    for _ in 1..p {
        let mut next = Vec::new();
        for (alpha, last) in &frontier {
            for k in *last..d {
                let mut b = alpha.clone();
                b[k] += 1;
                next.push((b, k));
            }
        }
        out.extend(next.iter().map(|(a, _)| a.clone()));
        frontier = next;
    }
    out
}

fn monomials(x: &[f64], alphas: &[Vec<usize>], p: usize, out: &mut [f64]) {
    let d = x.len();
    let mut pow = vec![1.0; d * p];
    for k in 0..d {
        for n in 1..p {
            pow[k * p + n] = pow[k * p + n - 1] * x[k];
        }
    }
    for (m, alpha) in alphas.iter().enumerate() {
        out[m] = alpha
            .iter()
            .enumerate()
            .map(|(k, &e)| pow[k * p + e])
            .product();
    }
}

/// Non-separable `d`-variate IFGT with `f(d, p)` Taylor terms per cluster.
pub fn ifgt_nd(spec: &GaussTransformSpecNd) -> Result<Vec<f64>, GaussError> {
    spec.validate()?;
    let (d, p, h) = (spec.dim, spec.order, spec.bandwidth);
    let width = 2.0 * spec.cluster_radius * h;
    let n_src = spec.weights.len();
    let mut origin = vec![f64::INFINITY; d];
    for s in spec.sources.chunks(d) {
        for k in 0..d {
            origin[k] = origin[k].min(s[k]);
        }
    }
    let mut keyed: Vec<(Vec<i64>, usize)> = spec
        .sources
        .chunks(d)
        .enumerate()
        .map(|(i, s)| {
            let key = (0..d)
                .map(|k| ((s[k] - origin[k]) / width).floor() as i64)
                .collect();
            (key, i)
        })
        .collect();
    keyed.sort_unstable();

    let alphas = multi_indices(d, p);
    let f = alphas.len();
    let scale: Vec<f64> = alphas
        .iter()
        .map(|a| {
            a.iter()
                .map(|&e| (1..=e).fold(1.0, |acc, n| acc * 2.0 / n as f64))
                .product()
        })
        .collect();

    let mut centers: Vec<f64> = Vec::new();
    let mut coeffs: Vec<f64> = Vec::new();
    let mut mono = vec![0.0; f];
    let mut k = 0;
    while k < n_src {
        let mut end = k;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        while end < n_src && keyed[end].0 == keyed[k].0 {
            let s = &spec.sources[keyed[end].1 * d..(keyed[end].1 + 1) * d];
            for j in 0..d {
                lo[j] = lo[j].min(s[j]);
                hi[j] = hi[j].max(s[j]);
            }
            end += 1;
        }
        let c: Vec<f64> = (0..d).map(|j| 0.5 * (lo[j] + hi[j])).collect();
        let mut cf = vec![0.0; f];
        for &(_, i) in &keyed[k..end] {
            let s = &spec.sources[i * d..(i + 1) * d];
            let ds: Vec<f64> = (0..d).map(|j| (s[j] - c[j]) / h).collect();
            let e = spec.weights[i] * (-ds.iter().map(|x| x * x).sum::<f64>()).exp();
            monomials(&ds, &alphas, p, &mut mono);
            for m in 0..f {
                cf[m] += e * scale[m] * mono[m];
            }
        }
        centers.extend_from_slice(&c);
        coeffs.extend_from_slice(&cf);
        k = end;
    }

    let n_clusters = centers.len() / d;
    let mut order: Vec<usize> = (0..n_clusters).collect();
    order.sort_by(|&a, &b| centers[a * d].total_cmp(&centers[b * d]));
    let first_axis: Vec<f64> = order.iter().map(|&c| centers[c * d]).collect();
    let reach = (CUTOFF + spec.cluster_radius * (d as f64).sqrt()) * h;

    Ok(spec
        .targets
        .chunks(d)
        .map(|t| {
            let lo = first_axis.partition_point(|&x| x < t[0] - reach);
            let hi = first_axis.partition_point(|&x| x <= t[0] + reach);
            let mut acc = 0.0;
            let mut mono = vec![0.0; f];
            for &c in &order[lo..hi] {
                let cc = &centers[c * d..(c + 1) * d];
                let r2 = dist2(t, cc);
                if r2 > reach * reach {
                    continue;
                }
                let dt: Vec<f64> = (0..d).map(|j| (t[j] - cc[j]) / h).collect();
                monomials(&dt, &alphas, p, &mut mono);
                let cf = &coeffs[c * f..(c + 1) * f];
                let s: f64 = mono.iter().zip(cf).map(|(a, b)| a * b).sum();
                acc += (-r2 / (h * h)).exp() * s;
            }
            acc
        })
        .collect())
}
