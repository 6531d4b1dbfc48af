//! Poisson maximum-likelihood fit of binned decay curves.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 500;
const MAX_HALVINGS: usize = 60;
const STEP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FitOptions {
    /// Float a constant background term b ≥ 0 per bin.
    pub background: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpFit {
    /// 1/s
    pub gamma: f64,
    pub gamma_sigma: f64,
    /// Expected counts per bin at t = 0.
    pub amplitude: f64,
    /// Expected background counts per bin, when floated.
    pub background: Option<f64>,
    pub iterations: usize,
    pub log_likelihood: f64,
}

/// Poisson log-likelihood without the ln(n!) term.
fn loglik(counts: &[f64], mu: impl Iterator<Item = f64>) -> f64 {
    counts
        .iter()
        .zip(mu)
        .map(|(&n, m)| if n > 0.0 { n * m.ln() - m } else { -m })
        .sum()
}

fn validate(t: &[f64], counts: &[f64]) -> Result<()> {
    if t.len() != counts.len() {
        return Err(Error::Precondition(format!(
            "{} bin times but {} counts",
            t.len(),
            counts.len()
        )));
    }
    if t.len() < 3 {
        return Err(Error::Precondition(format!("need at least 3 bins, got {}", t.len())));
    }
    if counts.iter().any(|&n| !(n >= 0.0) || !n.is_finite()) {
        return Err(Error::Precondition("counts must be finite and non-negative".into()));
    }
    if t.iter().any(|x| !x.is_finite()) {
        return Err(Error::Precondition("bin times must be finite".into()));
    }
    if counts.iter().all(|&n| n == 0.0) {
        return Err(Error::AllZeroCounts);
    }
    Ok(())
}

/// Fits counts ~ Poisson(A e^{−γt} [+ b]) by damped Newton iteration.
///
/// Times are centered internally, so the fit is invariant under a common
/// shift of `t` apart from the reported amplitude.
pub fn fit_exponential(t: &[f64], counts: &[f64], opts: FitOptions) -> Result<ExpFit> {
    validate(t, counts)?;
    let t0 = t.iter().sum::<f64>() / t.len() as f64;
    let x: Vec<f64> = t.iter().map(|&v| v - t0).collect();
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::Precondition("bin times must not all coincide".into()));
    }
    if opts.background {
        fit_with_background(&x, counts, t0)
    } else {
        fit_pure(&x, counts, t0)
    }
}

fn fit_pure(x: &[f64], counts: &[f64], t0: f64) -> Result<ExpFit> {
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let mut p = Vector2::new(mean.ln(), 0.0);
    let model = |p: &Vector2<f64>| {
        let (a, g) = (p[0], p[1]);
        x.iter().map(move |&xi| (a - g * xi).exp())
    };
    let mut ll = loglik(counts, model(&p));

    for iter in 1..=MAX_ITERATIONS {
        let mut g = Vector2::zeros();
        let mut info = Matrix2::zeros();
        for ((&xi, &n), m) in x.iter().zip(counts).zip(model(&p)) {
            let d = Vector2::new(1.0, -xi);
            g += d * (n - m);
            info += d * d.transpose() * m;
        }
        let step = info
            .try_inverse()
            .ok_or(Error::NonConvergence { iterations: iter })?
            * g;
        let (next, next_ll) = line_search(&p, &step, ll, |q| loglik(counts, model(q)))
            .ok_or(Error::NonConvergence { iterations: iter })?;
        let moved = (next - p).abs();
        p = next;
        ll = next_ll;
        if moved[0] < STEP_TOL * p[0].abs().max(1.0) && moved[1] < STEP_TOL * p[1].abs().max(1.0) {
            let mut info = Matrix2::zeros();
            for (&xi, m) in x.iter().zip(model(&p)) {
                let d = Vector2::new(1.0, -xi);
                info += d * d.transpose() * m;
            }
            let cov = info.try_inverse().ok_or(Error::NonConvergence { iterations: iter })?;
            return Ok(ExpFit {
                gamma: p[1],
                gamma_sigma: cov[(1, 1)].sqrt(),
                amplitude: (p[0] + p[1] * t0).exp(),
                background: None,
                iterations: iter,
                log_likelihood: ll,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
    })
}

/// Halves the step until the likelihood does not decrease.
fn line_search<V>(p: &V, step: &V, ll: f64, f: impl Fn(&V) -> f64) -> Option<(V, f64)>
where
    V: Clone + std::ops::Add<Output = V> + std::ops::Mul<f64, Output = V>,
{
    let mut scale = 1.0;
    for _ in 0..MAX_HALVINGS {
        let q = p.clone() + step.clone() * scale;
        let v = f(&q);
        if v.is_finite() && v >= ll - 1e-12 * ll.abs().max(1.0) {
            return Some((q, v));
        }
        scale *= 0.5;
    }
    None
}

fn fit_with_background(x: &[f64], counts: &[f64], t0: f64) -> Result<ExpFit> {
    let n = counts.len();
    let mean = counts.iter().sum::<f64>() / n as f64;
    // tail average as the starting background
    let tail = counts[n - n / 4 - 1..].iter().sum::<f64>() / (n / 4 + 1) as f64;
    let b0 = (0.5 * tail).min(0.5 * mean);
    let mut p = Vector3::new((mean - b0).max(1e-3 * mean).ln(), 0.0, b0);
    let model = |p: &Vector3<f64>| {
        let (a, g, b) = (p[0], p[1], p[2]);
        x.iter().map(move |&xi| (a - g * xi).exp() + b)
    };
    let objective = |q: &Vector3<f64>| {
        if q[2] < 0.0 {
            f64::NEG_INFINITY
        } else {
            loglik(counts, model(q))
        }
    };
    let mut ll = objective(&p);

    let fisher = |p: &Vector3<f64>| {
        let mut g = Vector3::zeros();
        let mut info = Matrix3::zeros();
        for (&xi, &c) in x.iter().zip(counts) {
            let e = (p[0] - p[1] * xi).exp();
            let m = e + p[2];
            let d = Vector3::new(e, -xi * e, 1.0);
            g += d * (c / m - 1.0);
            info += d * d.transpose() / m;
        }
        (g, info)
    };

    for iter in 1..=MAX_ITERATIONS {
        let (g, info) = fisher(&p);
        let mut step = info
            .try_inverse()
            .ok_or(Error::NonConvergence { iterations: iter })?
            * g;
        // keep the background on its boundary rather than crossing zero
        if p[2] + step[2] < 0.0 {
            step[2] = -p[2];
        }
        let (next, next_ll) = line_search(&p, &step, ll, objective)
            .ok_or(Error::NonConvergence { iterations: iter })?;
        let moved = (next - p).abs();
        p = next;
        ll = next_ll;
        let scale_b = p[2].abs().max(1e-6 * mean);
        if moved[0] < STEP_TOL * p[0].abs().max(1.0)
            && moved[1] < STEP_TOL * p[1].abs().max(1.0)
            && moved[2] < 1e3 * STEP_TOL * scale_b
        {
            let cov = observed_information(x, counts, &p)
                .try_inverse()
                .or_else(|| fisher(&p).1.try_inverse())
                .ok_or(Error::NonConvergence { iterations: iter })?;
            return Ok(ExpFit {
                gamma: p[1],
                gamma_sigma: cov[(1, 1)].abs().sqrt(),
                amplitude: (p[0] + p[1] * t0).exp(),
                background: Some(p[2]),
                iterations: iter,
                log_likelihood: ll,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
    })
}

/// −∂²ℓ/∂θ² for θ = (a, γ, b).
fn observed_information(x: &[f64], counts: &[f64], p: &Vector3<f64>) -> Matrix3<f64> {
    let mut h = Matrix3::zeros();
    for (&xi, &c) in x.iter().zip(counts) {
        let e = (p[0] - p[1] * xi).exp();
        let m = e + p[2];
        let d = Vector3::new(e, -xi * e, 1.0);
        let second = Matrix3::new(e, -xi * e, 0.0, -xi * e, xi * xi * e, 0.0, 0.0, 0.0, 0.0);
        h += d * d.transpose() * (c / (m * m)) - second * (c / m - 1.0);
    }
    h
}
