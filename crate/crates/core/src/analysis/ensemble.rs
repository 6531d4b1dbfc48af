//! Ensemble lifetime estimate over a grid of analysis windows and binnings.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_exponential, FitOptions};
use crate::error::{Error, Result};
use crate::events::EventRecord;
use crate::units::ms_to_s;

/// Equal-width histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<f64>,
}

impl Histogram {
    /// `nbins` bins spanning [min, max] of the samples; the maximum lands in the last bin.
    pub fn from_samples(values: &[f64], nbins: usize) -> Result<Self> {
        if values.is_empty() || nbins == 0 {
            return Err(Error::DegenerateHistogram("no samples or no bins".into()));
        }
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::DegenerateHistogram("non-finite sample".into()));
        }
        let width = if hi > lo { (hi - lo) / nbins as f64 } else { 1.0 };
        let mut counts = vec![0.0; nbins];
        for &v in values {
            let k = (((v - lo) / width) as usize).min(nbins - 1);
            counts[k] += 1.0;
        }
        Ok(Self { lo, width, counts })
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|k| self.lo + (k as f64 + 0.5) * self.width)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub mean: f64,
    pub std: f64,
    /// Coefficient of determination of the least-squares fit.
    pub r_squared: f64,
    /// Set when the width is bounded by the bin width instead of fitted.
    pub degenerate: bool,
    /// Set when r² < 0.9.
    pub poor_fit: bool,
}

const POOR_FIT_R2: f64 = 0.9;

/// Least-squares fit of A exp[−(x − µ)²/2σ²] to the histogram (Levenberg–Marquardt).
pub fn gaussian_fit(hist: &Histogram) -> Result<GaussianFit> {
    let x = hist.centers();
    let y = &hist.counts;
    let filled: Vec<usize> = (0..y.len()).filter(|&k| y[k] > 0.0).collect();
    match filled.len() {
        0 => return Err(Error::DegenerateHistogram("histogram is empty".into())),
        1 => {
            return Ok(GaussianFit {
                amplitude: y[filled[0]],
                mean: x[filled[0]],
                std: hist.width / 12f64.sqrt(),
                r_squared: 1.0,
                degenerate: true,
                poor_fit: false,
            })
        }
        2..=4 => {
            return Err(Error::DegenerateHistogram(format!(
                "{} non-empty bins, need at least 5",
                filled.len()
            )))
        }
        _ => {}
    }

    let total: f64 = y.iter().sum();
    let m0 = x.iter().zip(y).map(|(x, y)| x * y).sum::<f64>() / total;
    let v0 = x.iter().zip(y).map(|(x, y)| y * (x - m0).powi(2)).sum::<f64>() / total;
    let s0 = v0.sqrt().max(0.5 * hist.width);
    let a0 = y.iter().cloned().fold(0.0, f64::max);
    // θ = (A, µ, ln σ)
    let mut p = Vector3::new(a0, m0, s0.ln());

    let ssr = |p: &Vector3<f64>| -> f64 {
        let s = p[2].exp();
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| (yi - p[0] * (-0.5 * ((xi - p[1]) / s).powi(2)).exp()).powi(2))
            .sum()
    };
    let mut cost = ssr(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..500 {
        let s = p[2].exp();
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&xi, &yi) in x.iter().zip(y) {
            let z = (xi - p[1]) / s;
            let e = (-0.5 * z * z).exp();
            let r = yi - p[0] * e;
            let j = Vector3::new(e, p[0] * e * z / s, p[0] * e * z * z);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] *= 1.0 + lambda;
            }
            let Some(step) = damped.try_inverse().map(|inv| inv * jtr) else {
                lambda *= 10.0;
                continue;
            };
            let q = p + step;
            let c = ssr(&q);
            if c.is_finite() && c <= cost {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                let small = step.abs().max() < 1e-12 * (1.0 + p.abs().max());
                p = q;
                cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                converged = rel < 1e-14 || small;
                break;
            }
            lambda *= 10.0;
        }
        if !improved || converged {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations: 500 });
    }
    let ybar = total / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - cost / sst } else { 1.0 };
    Ok(GaussianFit {
        amplitude: p[0],
        mean: p[1],
        std: p[2].exp(),
        r_squared,
        degenerate: false,
        poor_fit: r_squared < POOR_FIT_R2,
    })
}

/// Bins sorted times on [start, end] with the grid offset by `shift` bin
/// widths; only bins lying fully inside the range are kept.
pub fn bin_events(sorted_t: &[f64], start: f64, end: f64, nbins: usize, shift: f64) -> (Vec<f64>, Vec<f64>) {
    let w = (end - start) / nbins as f64;
    let offset = shift * w;
    let nfull = if offset > 0.0 { nbins - 1 } else { nbins };
    let edge = |j: usize| start + offset + j as f64 * w;
    let mut centers = Vec::with_capacity(nfull);
    let mut counts = Vec::with_capacity(nfull);
    let mut below = sorted_t.partition_point(|&t| t < edge(0));
    for j in 0..nfull {
        let upper = if offset == 0.0 && j + 1 == nfull { end } else { edge(j + 1) };
        let next = if j + 1 == nfull {
            sorted_t.partition_point(|&t| t <= upper)
        } else {
            sorted_t.partition_point(|&t| t < upper)
        };
        centers.push(edge(j) + 0.5 * w);
        counts.push((next - below) as f64);
        below = next;
    }
    (centers, counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    /// Inclusive range of analysis start times, ms, in 1 ms steps.
    pub start_ms: (u32, u32),
    pub end_ms: (u32, u32),
    /// Inclusive range of bin counts.
    pub bins: (usize, usize),
    /// Grid shifts per bin width, in equal subdivisions.
    pub shifts: usize,
    /// Energy band in keV; `None` keeps all energies.
    pub band_kev: Option<(f64, f64)>,
    /// Detectors to combine; empty keeps all.
    pub detectors: Vec<String>,
    pub background: bool,
    pub histogram_bins: usize,
    pub min_counts: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            start_ms: (30, 40),
            end_ms: (88, 90),
            bins: (40, 100),
            shifts: 10,
            band_kev: Some((3.75, 4.75)),
            detectors: Vec::new(),
            background: false,
            histogram_bins: 60,
            min_counts: 10,
        }
    }
}

impl EnsembleConfig {
    fn members(&self) -> Vec<(f64, f64, usize, f64)> {
        let mut out = Vec::new();
        for start in self.start_ms.0..=self.start_ms.1 {
            for end in self.end_ms.0..=self.end_ms.1 {
                for nb in self.bins.0..=self.bins.1 {
                    for k in 0..self.shifts {
                        out.push((ms_to_s(start as f64), ms_to_s(end as f64), nb, k as f64 / self.shifts as f64));
                    }
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.start_ms.0 > self.start_ms.1 || self.end_ms.0 > self.end_ms.1 || self.bins.0 > self.bins.1 {
            return Err(Error::Precondition("ensemble ranges must be ordered".into()));
        }
        if self.start_ms.1 >= self.end_ms.0 {
            return Err(Error::Precondition("every start must precede every end".into()));
        }
        if self.bins.0 < 4 || self.shifts == 0 || self.histogram_bins == 0 {
            return Err(Error::Precondition("need at least 4 bins, 1 shift and 1 histogram bin".into()));
        }
        Ok(())
    }
}

/// τ interval; `None` marks an unbounded end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauInterval {
    pub low: Option<f64>,
    pub high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// Mean decay rate, 1/s.
    pub gamma: f64,
    /// Spread of the rate distribution, 1/s.
    pub gamma_sigma: f64,
    /// 1/γ, absent when γ ≤ 0.
    pub tau: Option<f64>,
    pub tau_interval: TauInterval,
    pub n_fits: usize,
    pub n_failed: usize,
}

impl FitResult {
    fn from_rate(gamma: f64, sigma: f64, n_fits: usize, n_failed: usize) -> Self {
        let inv = |g: f64| (g > 0.0).then(|| 1.0 / g);
        Self {
            gamma,
            gamma_sigma: sigma,
            tau: inv(gamma),
            tau_interval: TauInterval {
                low: inv(gamma + sigma),
                high: inv(gamma - sigma),
            },
            n_fits,
            n_failed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleResult {
    pub fit: FitResult,
    pub gaussian: Option<GaussianFit>,
    pub histogram: Histogram,
    /// Fitted rates in enumeration order (start, end, bins, shift).
    pub gammas: Vec<f64>,
    pub counts_in_window: usize,
    pub config: EnsembleConfig,
}

/// Fits every member of the window/binning grid and summarizes the rate
/// distribution by a Gaussian.
pub fn lifetime_ensemble(events: &[EventRecord], cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    cfg.validate()?;
    let mut t: Vec<f64> = events
        .iter()
        .filter(|e| cfg.detectors.is_empty() || cfg.detectors.iter().any(|d| *d == e.detector))
        .filter(|e| cfg.band_kev.is_none_or(|(lo, hi)| e.e_kev >= lo && e.e_kev < hi))
        .map(|e| e.t)
        .collect();
    t.sort_by(f64::total_cmp);
    let (w0, w1) = (ms_to_s(cfg.start_ms.0 as f64), ms_to_s(cfg.end_ms.1 as f64));
    let in_window = t.iter().filter(|&&x| x >= w0 && x <= w1).count();
    if in_window < cfg.min_counts {
        return Err(Error::InsufficientEvents {
            found: in_window,
            needed: cfg.min_counts,
        });
    }

    let opts = FitOptions {
        background: cfg.background,
    };
    let fits: Vec<Option<f64>> = cfg
        .members()
        .par_iter()
        .map(|&(start, end, nb, shift)| {
            let (centers, counts) = bin_events(&t, start, end, nb, shift);
            fit_exponential(&centers, &counts, opts).ok().map(|f| f.gamma)
        })
        .collect();
    let n_failed = fits.iter().filter(|g| g.is_none()).count();
    let gammas: Vec<f64> = fits.into_iter().flatten().collect();
    if gammas.is_empty() {
        return Err(Error::NonConvergence { iterations: 0 });
    }

    let histogram = Histogram::from_samples(&gammas, cfg.histogram_bins)?;
    let n = gammas.len() as f64;
    let mean = gammas.iter().sum::<f64>() / n;
    let hi = gammas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (gaussian, gamma, sigma) = if hi - histogram.lo <= 1e-12 * mean.abs().max(1.0) {
        (None, mean, 0.0)
    } else {
        match gaussian_fit(&histogram) {
            Ok(g) => (Some(g), g.mean, g.std),
            Err(_) => {
                let var = gammas.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
                (None, mean, var.sqrt())
            }
        }
    };
    Ok(EnsembleResult {
        fit: FitResult::from_rate(gamma, sigma, gammas.len(), n_failed),
        gaussian,
        histogram,
        gammas,
        counts_in_window: in_window,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Uniform};

    fn events_at(times: impl IntoIterator<Item = f64>) -> Vec<EventRecord> {
        times
            .into_iter()
            .enumerate()
            .map(|(k, t)| EventRecord {
                pulse_id: k as u64,
                detector: if k % 2 == 0 { "Du" } else { "Dd" }.into(),
                t,
                e_kev: 4.09,
            })
            .collect()
    }

    #[test]
    fn member_count_and_binning() {
        let cfg = EnsembleConfig::default();
        assert_eq!(cfg.members().len(), 11 * 3 * 61 * 10);
        let t: Vec<f64> = (0..1000).map(|k| k as f64 / 1e4).collect();
        let (c, n) = bin_events(&t, 0.03, 0.09, 60, 0.0);
        assert_eq!(c.len(), 60);
        assert_eq!(n.iter().sum::<f64>(), 601.0);
        let (c, n) = bin_events(&t, 0.03, 0.09, 60, 0.5);
        assert_eq!(c.len(), 59);
        assert!(n.iter().sum::<f64>() <= 600.0);
        assert_relative_eq!(c[0], 0.031, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_from_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = Normal::new(2.17, 0.5).unwrap();
        let s: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        let g = gaussian_fit(&Histogram::from_samples(&s, 60).unwrap()).unwrap();
        assert_relative_eq!(g.mean, 2.17, max_relative = 0.01);
        assert_relative_eq!(g.std, 0.5, max_relative = 0.01);
        assert!(!g.poor_fit && !g.degenerate);
    }

    #[test]
    fn gaussian_degenerate_and_bimodal() {
        let spike = Histogram {
            lo: 0.0,
            width: 0.2,
            counts: vec![0.0, 0.0, 50.0, 0.0],
        };
        let g = gaussian_fit(&spike).unwrap();
        assert!(g.degenerate);
        assert_relative_eq!(g.std, 0.2 / 12f64.sqrt());
        assert_relative_eq!(g.mean, 0.5);
        let few = Histogram {
            lo: 0.0,
            width: 1.0,
            counts: vec![1.0, 3.0, 1.0],
        };
        assert!(matches!(gaussian_fit(&few), Err(Error::DegenerateHistogram(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Normal::new(-3.0, 0.5).unwrap();
        let b = Normal::new(3.0, 0.5).unwrap();
        let s: Vec<f64> = (0..20_000)
            .map(|k| if k % 2 == 0 { a.sample(&mut rng) } else { b.sample(&mut rng) })
            .collect();
        let g = gaussian_fit(&Histogram::from_samples(&s, 60).unwrap()).unwrap();
        assert!(g.poor_fit, "r² = {}", g.r_squared);
    }

    #[test]
    fn noiseless_decay_gives_narrow_distribution() {
        // deterministic quantiles of the truncated exponential on [0, 0.1)
        let gamma: f64 = 2.17;
        let n = 400_000;
        let norm = -(-gamma * 0.1).exp_m1();
        let t = (0..n).map(|k| -(-(k as f64 + 0.5) / n as f64 * norm).ln_1p() / gamma);
        let r = lifetime_ensemble(&events_at(t), &EnsembleConfig::default()).unwrap();
        assert_eq!(r.fit.n_failed, 0);
        assert_relative_eq!(r.fit.gamma, gamma, max_relative = 1e-3);
        assert!(r.fit.gamma_sigma < 5e-3, "{}", r.fit.gamma_sigma);
        assert_relative_eq!(r.fit.tau.unwrap(), 1.0 / gamma, max_relative = 1e-3);
    }

    #[test]
    fn flat_background_centers_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = Uniform::new(0.0, 0.1).unwrap();
        let t: Vec<f64> = (0..3000).map(|_| u.sample(&mut rng)).collect();
        let r = lifetime_ensemble(&events_at(t), &EnsembleConfig::default()).unwrap();
        assert!(r.fit.gamma.abs() <= 2.0 * r.fit.gamma_sigma, "{:?}", r.fit);
    }

    #[test]
    fn too_few_events() {
        let r = lifetime_ensemble(&events_at([0.05, 0.06]), &EnsembleConfig::default());
        assert!(matches!(r, Err(Error::InsufficientEvents { found: 2, needed: 10 })));
    }

    #[test]
    fn interval_mapping() {
        let f = FitResult::from_rate(2.0, 0.5, 1, 0);
        assert_relative_eq!(f.tau.unwrap(), 0.5);
        assert_relative_eq!(f.tau_interval.low.unwrap(), 0.4);
        assert_relative_eq!(f.tau_interval.high.unwrap(), 1.0 / 1.5);
        let g = FitResult::from_rate(0.3, 0.5, 1, 0);
        assert!(g.tau_interval.high.is_none());
        assert!(FitResult::from_rate(-0.1, 0.05, 1, 0).tau.is_none());
    }
}
