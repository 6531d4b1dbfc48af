use rayon::prelude::*;
use serde::Serialize;

use super::{time_spectrum, LineSet, TimeGrid, TimeSpectrum};
use crate::analysis::{snr, BandRate};
use crate::catalog::{sigma_resonant, DetectorModel, IsomerSpec, TargetSpec};
use crate::error::{Error, Result};
use crate::units;

const GRID_SLACK: f64 = 1e-12;

/// Trapezoidal integral of the rate over [t1, t2], interpolating linearly
/// at window edges that fall between samples.
pub fn integrate_window(ts: &TimeSpectrum, t1: f64, t2: f64) -> Result<f64> {
    let (lo, hi) = match (ts.t.first(), ts.t.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::EmptyRange("time spectrum has no samples".into())),
    };
    let slack = GRID_SLACK * (hi - lo).abs().max(1.0);
    if t1 < lo - slack || t2 > hi + slack || t1 > t2 {
        return Err(Error::OutOfGrid { t1, t2, lo, hi });
    }
    let (t1, t2) = (t1.clamp(lo, hi), t2.clamp(lo, hi));
    if t1 == t2 {
        return Ok(0.0);
    }
    let at = |t: f64| -> f64 {
        let k = ts.t.partition_point(|&x| x <= t).clamp(1, ts.t.len() - 1);
        let (ta, tb) = (ts.t[k - 1], ts.t[k]);
        let f = (t - ta) / (tb - ta);
        ts.rate[k - 1] + f * (ts.rate[k] - ts.rate[k - 1])
    };
    // first and last sample strictly inside (t1, t2)
    let first = ts.t.partition_point(|&x| x <= t1);
    let last = ts.t.partition_point(|&x| x < t2);
    let mut sum = 0.0;
    let mut prev = (t1, at(t1));
    for k in first..last {
        let cur = (ts.t[k], ts.rate[k]);
        sum += 0.5 * (cur.0 - prev.0) * (cur.1 + prev.1);
        prev = cur;
    }
    sum += 0.5 * (t2 - prev.0) * (at(t2) + prev.1);
    Ok(sum)
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowIntegral {
    pub dgamma: f64,
    /// Expected counts per pulse, or per second when the flux is per second.
    pub integral: f64,
}

/// Window integrals for each broadening in `dgammas`, evaluated in parallel.
pub fn window_integrals(
    template: &LineSet,
    dgammas: &[f64],
    window: (f64, f64),
    grid: TimeGrid,
    isomer: &IsomerSpec,
    n_gamma0: f64,
) -> Result<Vec<WindowIntegral>> {
    dgammas
        .par_iter()
        .map(|&dg| {
            let ls = template.with_dgamma(dg)?;
            let ts = time_spectrum(&ls, grid, isomer, n_gamma0)?;
            Ok(WindowIntegral {
                dgamma: dg,
                integral: integrate_window(&ts, window.0, window.1)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitProbe {
    pub dgamma: f64,
    /// counts / 10,000 s
    pub signal: f64,
    pub snr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionLimit {
    /// Smallest grid broadening (Γ₀ units) whose SNR falls below the threshold.
    pub bound: f64,
    pub probes: Vec<LimitProbe>,
}

/// Bisects the broadening grid for the SNR threshold crossing.
///
/// The signal is the NFS window integral over the detector gate, converted
/// to counts per 10,000 s and spread over `band_kev`; the background is the
/// detector's rate in that band.
#[allow(clippy::too_many_arguments)]
pub fn detection_limit_scan(
    template: &LineSet,
    isomer: &IsomerSpec,
    flux: f64,
    det: &DetectorModel,
    band_kev: f64,
    snr_threshold: f64,
    dgamma_grid: &[f64],
) -> Result<DetectionLimit> {
    if dgamma_grid.is_empty() {
        return Err(Error::EmptyRange("broadening grid is empty".into()));
    }
    if dgamma_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("broadening grid must be strictly increasing".into()));
    }
    if !(band_kev > 0.0) {
        return Err(Error::Precondition("energy band must be positive".into()));
    }
    if !(snr_threshold > 0.0) || !flux.is_finite() {
        return Err(Error::Unbounded {
            threshold: snr_threshold,
        });
    }
    let grid = TimeGrid {
        t_max: det.gate_close_s.max(0.1),
        n_intervals: 1 << 17,
    };
    let window = (det.gate_open_s, det.gate_close_s);
    let mut probes = Vec::new();
    let mut probe = |dg: f64| -> Result<f64> {
        let ls = template.with_dgamma(dg)?;
        let ts = time_spectrum(&ls, grid, isomer, flux)?;
        let signal = units::per_s_to_per_reference(integrate_window(&ts, window.0, window.1)?);
        let signal_rate = BandRate::expected(signal / band_kev, (0.0, band_kev), window);
        let ratio = snr(&signal_rate, det.background_rate)?;
        probes.push(LimitProbe {
            dgamma: dg,
            signal,
            snr: ratio,
        });
        Ok(ratio)
    };

    let last = dgamma_grid.len() - 1;
    if probe(dgamma_grid[last])? >= snr_threshold {
        return Err(Error::Unbounded {
            threshold: snr_threshold,
        });
    }
    if probe(dgamma_grid[0])? < snr_threshold {
        return Ok(DetectionLimit {
            bound: dgamma_grid[0],
            probes,
        });
    }
    let (mut lo, mut hi) = (0usize, last);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if probe(dgamma_grid[mid])? >= snr_threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    probes.sort_by(|a, b| a.dgamma.total_cmp(&b.dgamma));
    Ok(DetectionLimit {
        bound: dgamma_grid[hi],
        probes,
    })
}

/// Thickness maximizing the forward signal, L = 2 Le, and its optical thickness.
pub fn optimal_thickness(target: &TargetSpec) -> Result<(f64, f64)> {
    let l_opt = 2.0 * target.le_um;
    if l_opt == 0.0 {
        return Ok((0.0, 0.0));
    }
    let sigma = sigma_resonant(target)?;
    Ok((l_opt, sigma * target.n0_per_cm3 * units::um_to_cm(l_opt) / 4.0))
}
