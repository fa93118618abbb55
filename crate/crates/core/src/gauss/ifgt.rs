use super::{GaussError, GaussTransformSpec, CUTOFF};

/// Reusable IFGT evaluation structure for fixed source and target positions.
///
/// Sources are binned into boxes of width `2ρh`; each box is expanded about
/// the midpoint of its occupied range with the factorization
/// `e^{−(Δt−Δs)²} = e^{−Δt²} e^{−Δs²} Σ_n (2ⁿ/n!) Δtⁿ Δsⁿ`, truncated after `p` terms.
/// Everything that depends only on positions is precomputed, so [`IfgtPlan::apply`]
/// is a pair of dense multiply-add sweeps.
#[derive(Debug, Clone)]
pub struct IfgtPlan {
    order: usize,
    n_sources: usize,
    centers: Vec<f64>,
    source_cluster: Vec<usize>,
    source_factor: Vec<f64>,
    target_range: Vec<(usize, usize)>,
    target_offset: Vec<usize>,
    target_factor: Vec<f64>,
}

impl IfgtPlan {
    pub fn new(
        sources: &[f64],
        targets: &[f64],
        bandwidth: f64,
        order: usize,
        cluster_radius: f64,
    ) -> Result<Self, GaussError> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(GaussError::Bandwidth(bandwidth));
        }
        if order < 1 {
            return Err(GaussError::Order);
        }
        let p = order;
        let width = 2.0 * cluster_radius * bandwidth;
        let origin = sources.iter().copied().fold(f64::INFINITY, f64::min);
        let mut keyed: Vec<(i64, usize)> = sources
            .iter()
            .enumerate()
            .map(|(i, &s)| (((s - origin) / width).floor() as i64, i))
            .collect();
        keyed.sort_unstable();

        let mut centers = Vec::new();
        let mut source_cluster = vec![0; sources.len()];
        let mut k = 0;
        while k < keyed.len() {
            let mut end = k;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            while end < keyed.len() && keyed[end].0 == keyed[k].0 {
                let s = sources[keyed[end].1];
                lo = lo.min(s);
                hi = hi.max(s);
                source_cluster[keyed[end].1] = centers.len();
                end += 1;
            }
            centers.push(0.5 * (lo + hi));
            k = end;
        }

        let scale: Vec<f64> = {
            let mut c = vec![1.0; p];
            for n in 1..p {
                c[n] = c[n - 1] * 2.0 / n as f64;
            }
            c
        };
        let mut source_factor = vec![0.0; sources.len() * p];
        for (i, &s) in sources.iter().enumerate() {
            let ds = (s - centers[source_cluster[i]]) / bandwidth;
            let mut term = (-ds * ds).exp();
            for n in 0..p {
                source_factor[i * p + n] = scale[n] * term;
                term *= ds;
            }
        }

        let reach = (CUTOFF + cluster_radius) * bandwidth;
        let mut target_range = Vec::with_capacity(targets.len());
        let mut target_offset = Vec::with_capacity(targets.len() + 1);
        let mut target_factor = Vec::new();
        for &t in targets {
            let lo = centers.partition_point(|&c| c < t - reach);
            let hi = centers.partition_point(|&c| c <= t + reach);
            target_range.push((lo, hi));
            target_offset.push(target_factor.len());
            for &c in &centers[lo..hi] {
                let dt = (t - c) / bandwidth;
                let mut term = (-dt * dt).exp();
                for _ in 0..p {
                    target_factor.push(term);
                    term *= dt;
                }
            }
        }
        target_offset.push(target_factor.len());

        Ok(Self {
            order: p,
            n_sources: sources.len(),
            centers,
            source_cluster,
            source_factor,
            target_range,
            target_offset,
            target_factor,
        })
    }

    pub fn from_spec(spec: &GaussTransformSpec) -> Result<Self, GaussError> {
        spec.validate()?;
        Self::new(
            &spec.sources,
            &spec.targets,
            spec.bandwidth,
            spec.order,
            spec.cluster_radius,
        )
    }

    pub fn n_clusters(&self) -> usize {
        self.centers.len()
    }

    /// Evaluates the transform for one weight vector.
    pub fn apply(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(
            weights.len(),
            self.n_sources,
            "weight count must match sources"
        );
        let p = self.order;
        let mut coeff = vec![0.0; self.centers.len() * p];
        for (i, &w) in weights.iter().enumerate() {
            let c = self.source_cluster[i] * p;
            let f = &self.source_factor[i * p..(i + 1) * p];
            for n in 0..p {
                coeff[c + n] += w * f[n];
            }
        }
        self.target_range
            .iter()
            .enumerate()
            .map(|(j, &(lo, hi))| {
                let tf = &self.target_factor[self.target_offset[j]..self.target_offset[j + 1]];
                let cf = &coeff[lo * p..hi * p];
                tf.iter().zip(cf).map(|(a, b)| a * b).sum()
            })
            .collect()
    }
}

/// IFGT approximation of [`super::direct_gauss_1d`].
pub fn ifgt_1d(spec: &GaussTransformSpec) -> Result<Vec<f64>, GaussError> {
    Ok(IfgtPlan::from_spec(spec)?.apply(&spec.weights))
}

/// Absolute error per unit of `Σ|w_k|`: the Taylor remainder
/// `e^{−x²} (2ρx)ᵖ/p! e^{2ρx}` maximized over target distances `x` inside the
/// cutoff, plus the kernel mass dropped beyond it.
pub fn ifgt_error_bound(order: usize, cluster_radius: f64) -> f64 {
    let reach = CUTOFF + cluster_radius;
    let log_fact: f64 = (1..=order).map(|n| (n as f64).ln()).sum();
    let mut worst = f64::NEG_INFINITY;
    for k in 1..=2000 {
        let x = reach * k as f64 / 2000.0;
        let y = 2.0 * cluster_radius * x;
        let l = -x * x + order as f64 * y.ln() - log_fact + y;
        worst = worst.max(l);
    }
    worst.exp() + (-CUTOFF * CUTOFF).exp()
}
