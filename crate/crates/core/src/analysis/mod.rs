//! Band rates, SNR, internal-conversion extraction and decay fitting.

mod ensemble;
mod fit;

pub use ensemble::{
    bin_events, gaussian_fit, lifetime_ensemble, EnsembleConfig, EnsembleResult, FitResult,
    GaussianFit, Histogram, TauInterval,
};
pub use fit::{fit_exponential, ExpFit, FitOptions};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::EventRecord;
use crate::units::RATE_REFERENCE_S;

/// Count rate in an energy band and delay window, per keV per 10,000 s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandRate {
    pub rate: f64,
    pub sigma: f64,
    /// keV
    pub band: (f64, f64),
    /// s
    pub window: (f64, f64),
    /// s
    pub live_time: f64,
}

impl BandRate {
    /// Rate given directly, with σ = 0.
    pub fn exact(rate: f64, band: (f64, f64), window: (f64, f64)) -> Self {
        Self {
            rate,
            sigma: 0.0,
            band,
            window,
            live_time: RATE_REFERENCE_S,
        }
    }

    /// Rate given directly with an explicit uncertainty.
    pub fn measured(rate: f64, sigma: f64, band: (f64, f64), window: (f64, f64), live_time: f64) -> Self {
        Self {
            rate,
            sigma,
            band,
            window,
            live_time,
        }
    }

    /// Expected rate with the Poisson σ for one reference interval.
    pub fn expected(rate: f64, band: (f64, f64), window: (f64, f64)) -> Self {
        let width = band.1 - band.0;
        let counts = (rate * width).max(0.0);
        Self {
            rate,
            sigma: if width > 0.0 { counts.sqrt() / width } else { 0.0 },
            band,
            window,
            live_time: RATE_REFERENCE_S,
        }
    }

    pub fn band_width(&self) -> f64 {
        self.band.1 - self.band.0
    }

    /// Raw counts implied by the normalization.
    pub fn counts(&self) -> f64 {
        self.rate * self.band_width() * self.live_time / RATE_REFERENCE_S
    }
}

/// Counts with band.0 ≤ E < band.1 and window.0 ≤ t ≤ window.1,
/// normalized to counts/keV/10,000 s.
pub fn band_rate(events: &[EventRecord], band: (f64, f64), window: (f64, f64), live_time: f64) -> Result<BandRate> {
    if !(band.1 > band.0) {
        return Err(Error::EmptyRange(format!("energy band [{}, {}] keV", band.0, band.1)));
    }
    if !(window.1 > window.0) {
        return Err(Error::EmptyRange(format!("time window [{}, {}] s", window.0, window.1)));
    }
    if !(live_time > 0.0) {
        return Err(Error::Precondition(format!("live time must be positive, got {live_time} s")));
    }
    let n = events
        .iter()
        .filter(|e| e.e_kev >= band.0 && e.e_kev < band.1 && e.t >= window.0 && e.t <= window.1)
        .count() as f64;
    let norm = (band.1 - band.0) * live_time / RATE_REFERENCE_S;
    Ok(BandRate {
        rate: n / norm,
        sigma: n.sqrt() / norm,
        band,
        window,
        live_time,
    })
}

/// Operational SNR: signal rate over background rate in the same band.
pub fn snr(signal: &BandRate, background_rate: f64) -> Result<f64> {
    if !(background_rate > 0.0) {
        return Err(Error::Precondition(format!(
            "background rate must be positive, got {background_rate}"
        )));
    }
    Ok(signal.rate / background_rate)
}

/// (1 − e^{−u})/(2u), equal to 1/2 at u = 0 and finite for u < 0.
fn half_escape(u: f64) -> f64 {
    if u.abs() < 1e-12 {
        0.5 - u / 4.0
    } else {
        -(-u).exp_m1() / (2.0 * u)
    }
}

/// Relative fluorescence yield into both detectors for emission at an
/// energy with attenuation length `le_um`, excited with attenuation length
/// `l12_um`, in a foil of thickness `l_um`.
pub fn yield_correction(le_um: f64, l12_um: f64, l_um: f64) -> Result<f64> {
    for (name, v) in [("L_E", le_um), ("L12", l12_um), ("L", l_um)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be positive and finite, got {v} µm")));
        }
    }
    let u1 = l_um * (1.0 / l12_um + 1.0 / le_um);
    let u2 = l_um * (1.0 / l12_um - 1.0 / le_um);
    Ok(half_escape(u1) + half_escape(u2) * (-l_um / le_um).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConversionCoefficient {
    pub alpha_k: f64,
    pub sigma: f64,
}

/// α_K = [(R₄ − 2R_B)/(R₁₂ − 2R_B)] (1/ω_K) (Y₁₂/Y₄), σ by first-order propagation.
pub fn conversion_coefficient(
    r4: &BandRate,
    r12: &BandRate,
    rb: f64,
    omega_k: f64,
    y4: f64,
    y12: f64,
) -> Result<ConversionCoefficient> {
    if !(omega_k > 0.0 && omega_k <= 1.0) {
        return Err(Error::Domain(format!("fluorescence yield {omega_k} is outside (0, 1]")));
    }
    if !(y4 > 0.0 && y12 > 0.0) {
        return Err(Error::Domain("yield corrections must be positive".into()));
    }
    if !(rb >= 0.0) {
        return Err(Error::Domain(format!("background rate must be non-negative, got {rb}")));
    }
    let d4 = r4.rate - 2.0 * rb;
    let d12 = r12.rate - 2.0 * rb;
    let margin = 3.0 * r12.sigma;
    if !(d12 > 0.0) || d12 <= margin {
        return Err(Error::SignalBelowBackground {
            signal: r12.rate,
            background: 2.0 * rb,
            margin,
        });
    }
    let alpha = d4 / d12 / omega_k * (y12 / y4);
    let rel4 = if d4 != 0.0 { r4.sigma / d4 } else { 0.0 };
    let rel12 = r12.sigma / d12;
    let sigma = if d4 != 0.0 {
        alpha.abs() * rel4.hypot(rel12)
    } else {
        r4.sigma / d12 / omega_k * (y12 / y4)
    };
    Ok(ConversionCoefficient { alpha_k: alpha, sigma })
}
