use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Settings for a bounded Nelder–Mead maximization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadOptions {
    pub lower: f64,
    pub upper: f64,
    pub initial_step: f64,
    pub max_evaluations: usize,
    /// Stop when the simplex spans less than this in every coordinate.
    pub x_tolerance: f64,
    /// Stop when function values across the simplex differ by less than this.
    pub f_tolerance: f64,
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            lower: -5.0,
            upper: 5.0,
            initial_step: 0.5,
            max_evaluations: 200,
            x_tolerance: 1e-5,
            f_tolerance: 1e-10,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub best: Vec<f64>,
    pub value: f64,
    /// Every distinct evaluation in order.
    pub trace: Vec<(Vec<f64>, f64)>,
    pub converged: bool,
}

struct Cached<F> {
    f: F,
    cache: HashMap<Vec<i64>, f64>,
    trace: Vec<(Vec<f64>, f64)>,
    budget: usize,
}

impl<F, E> Cached<F>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    fn eval(&mut self, x: &[f64]) -> Result<Option<f64>, E> {
        let key: Vec<i64> = x.iter().map(|v| (v * 1e9).round() as i64).collect();
        if let Some(&v) = self.cache.get(&key) {
            return Ok(Some(v));
        }
        if self.trace.len() >= self.budget {
            return Ok(None);
        }
        let v = (self.f)(x)?;
        self.cache.insert(key, v);
        self.trace.push((x.to_vec(), v));
        Ok(Some(v))
    }
}

/// Maximizes `f` over the box `[lower, upper]^n`; points outside the box are
/// projected onto it. Evaluations are cached on `x` rounded to 1e−9.
pub fn maximize<E>(
    f: impl FnMut(&[f64]) -> Result<f64, E>,
    start: &[f64],
    opts: &NelderMeadOptions,
) -> Result<NelderMeadResult, E> {
    let n = start.len();
    let clamp = |x: Vec<f64>| -> Vec<f64> {
        x.into_iter()
            .map(|v| v.clamp(opts.lower, opts.upper))
            .collect()
    };
    let mut ev = Cached {
        f,
        cache: HashMap::new(),
        trace: Vec::new(),
        budget: opts.max_evaluations,
    };
    let mut origin = clamp(start.to_vec());
    let mut converged = false;

    'restarts: for _round in 0..=opts.restarts {
        converged = false;
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let Some(v) = ev.eval(&origin)? else { break };
        simplex.push((origin.clone(), v));
        for k in 0..n {
            let mut x = origin.clone();
            x[k] += if x[k] + opts.initial_step <= opts.upper {
                opts.initial_step
            } else {
                -opts.initial_step
            };
            let Some(v) = ev.eval(&x)? else {
                break 'restarts;
            };
            simplex.push((x, v));
        }
        loop {
            // best first; ties keep insertion order
            simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
            let spread = simplex[0].1 - simplex[n].1;
            let size = (0..n)
                .map(|k| {
                    let (lo, hi) = simplex
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
                            (l.min(p.0[k]), h.max(p.0[k]))
                        });
                    hi - lo
                })
                .fold(0.0, f64::max);
            if spread.abs() <= opts.f_tolerance && size <= opts.x_tolerance
                || size <= opts.x_tolerance * 1e-3
            {
                converged = true;
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|k| simplex[..n].iter().map(|p| p.0[k]).sum::<f64>() / n as f64)
                .collect();
            let worst = simplex[n].clone();
            let along = |t: f64| {
                clamp(
                    (0..n)
                        .map(|k| centroid[k] + t * (worst.0[k] - centroid[k]))
                        .collect(),
                )
            };
            let xr = along(-1.0);
            let Some(fr) = ev.eval(&xr)? else {
                break 'restarts;
            };
            if fr > simplex[0].1 {
                let xe = along(-2.0);
                let Some(fe) = ev.eval(&xe)? else {
                    break 'restarts;
                };
                simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr > simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, t) = if fr > worst.1 {
                (along(-0.5), fr)
            } else {
                (along(0.5), worst.1)
            };
            let Some(fc) = ev.eval(&xc)? else {
                break 'restarts;
            };
            if fc > t {
                simplex[n] = (xc, fc);
                continue;
            }
            let best = simplex[0].0.clone();
            for p in simplex.iter_mut().skip(1) {
                let x = clamp((0..n).map(|k| best[k] + 0.5 * (p.0[k] - best[k])).collect());
                let Some(v) = ev.eval(&x)? else {
                    break 'restarts;
                };
                *p = (x, v);
            }
        }
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        origin = simplex[0].0.clone();
    }

    let (best, value) = ev
        .trace
        .iter()
        .fold(None::<&(Vec<f64>, f64)>, |acc, p| match acc {
            Some(a) if a.1 >= p.1 => Some(a),
            _ => Some(p),
        })
        .cloned()
        .unwrap_or((origin, f64::NAN));
    Ok(NelderMeadResult {
        best,
        value,
        trace: ev.trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn finds_quadratic_peak() {
        let f = |x: &[f64]| -> Result<f64, Infallible> {
            Ok(-(x[0] - 1.3).powi(2) - 2.0 * (x[1] + 0.4).powi(2))
        };
        let r = maximize(f, &[0.0, 0.0], &NelderMeadOptions::default()).unwrap();
        assert!(
            (r.best[0] - 1.3).abs() < 1e-4 && (r.best[1] + 0.4).abs() < 1e-4,
            "{:?}",
            r.best
        );
        assert!(r.trace.len() <= 200);
    }

    #[test]
    fn respects_box() {
        let f = |x: &[f64]| -> Result<f64, Infallible> { Ok(x[0]) };
        let r = maximize(f, &[0.0], &NelderMeadOptions::default()).unwrap();
        assert_eq!(r.best, vec![5.0]);
    }

    #[test]
    fn budget_caps_evaluations() {
        let mut calls = 0;
        let f = |x: &[f64]| -> Result<f64, Infallible> {
            calls += 1;
            Ok((x[0] * 3.0).sin() + (x[1] * 5.0).cos())
        };
        let opts = NelderMeadOptions {
            max_evaluations: 15,
            x_tolerance: 0.0,
            f_tolerance: 0.0,
            ..Default::default()
        };
        let r = maximize(f, &[0.1, 0.2], &opts).unwrap();
        assert!(r.trace.len() <= 15);
        assert_eq!(calls, r.trace.len());
    }
}
