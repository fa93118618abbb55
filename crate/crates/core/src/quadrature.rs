//! Gauss rules from the Golub–Welsch eigenvalue construction.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of an `n`-point rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn golub_welsch(n: usize, off: impl Fn(usize) -> f64, mass: f64) -> Rule {
    let mut j = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = off(k);
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], mass * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Rule for `E[f(ξ)]` with `ξ ~ N(0, 1)`.
pub fn gauss_hermite_normal(n: usize) -> Rule {
    golub_welsch(n, |k| (k as f64).sqrt(), 1.0)
}

/// Rule for `∫_{-1}^{1} f(x) dx`.
pub fn gauss_legendre(n: usize) -> Rule {
    golub_welsch(
        n,
        |k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        },
        2.0,
    )
}

impl Rule {
    /// `∫_a^b f`, using the Legendre rule mapped to `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let r = gauss_hermite_normal(64);
        assert!((r.expect(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!(r.expect(|x| x).abs() < 1e-13);
        assert!((r.expect(|x| x * x) - 1.0).abs() < 1e-12);
        assert!((r.expect(|x| x.powi(4)) - 3.0).abs() < 1e-11);
        // lognormal mean
        assert!((r.expect(|x| (0.4 * x).exp()) - 0.08f64.exp()).abs() < 1e-13);
    }

    #[test]
    fn legendre_polynomials_and_smooth_functions() {
        let r = gauss_legendre(20);
        assert!((r.integrate(-1.0, 1.0, |x| x.powi(38)) - 2.0 / 39.0).abs() < 1e-14);
        assert!((r.integrate(0.0, std::f64::consts::PI, f64::sin) - 2.0).abs() < 1e-14);
    }
}
