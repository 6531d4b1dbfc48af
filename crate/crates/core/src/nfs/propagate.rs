//! Frequency-domain transmission and its Fourier transform to the time domain.
//!
//! The delayed field for a spectrally flat pulse is the inverse transform of
//! t(Ω) − t(∞). It is computed on a contour shifted into the upper half
//! plane by κ = c − Γ/2, which turns the transform into that of
//! E(s)·e^{−κs}: a function decaying as e^{−cs} regardless of Γ. Periodic
//! images of the DFT are then suppressed by e^{−cP}, and multiplying back by
//! e^{κs} is exact. The first two orders of exp(u) − 1 are transformed
//! analytically so the numerically transformed remainder starts as s².

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{LineSet, Method, SpectrumMeta, TimeGrid, TimeSpectrum};
use crate::catalog::IsomerSpec;
use crate::error::{Error, Result};

const MIN_SAMPLES: usize = 1 << 12;
const MIN_TMAX_S: f64 = 0.1;
const WINDOW_FACTOR: f64 = 50.0;
/// c·P, with P the DFT period in units of τ₀.
const DAMPING_PRODUCT: f64 = 32.0;
const CAUSALITY_LIMIT: f64 = 1e-6;

fn exponent(omega: Complex64, ls: &LineSet, width: f64) -> Complex64 {
    // u(Ω) = −i Σ wⱼ ξ / (Ω − Ωⱼ + i·width)
    let i = Complex64::i();
    ls.lines
        .iter()
        .map(|l| -i * (l.weight * ls.xi) / (omega - l.detuning + i * width))
        .sum()
}

/// Complex transmission t(Ω) at detuning Ω (Γ₀ units).
pub fn transmission_amplitude(omega: f64, ls: &LineSet) -> Complex64 {
    let u = exponent(Complex64::new(omega, 0.0), ls, ls.gamma_total / 2.0);
    (-0.5 * ls.le_ratio).exp() * u.exp()
}

/// Time-domain transform of u + u²/2 on the shifted contour, per unit s.
fn analytic_part(s: f64, ls: &LineSet, c: f64) -> Complex64 {
    let xi = ls.xi;
    let mut first = Complex64::new(0.0, 0.0);
    let mut second = Complex64::new(0.0, 0.0);
    for a in &ls.lines {
        first += a.weight * Complex64::from_polar(1.0, -a.detuning * s);
        for b in &ls.lines {
            let half_diff = 0.5 * (a.detuning - b.detuning) * s;
            let sinc = if half_diff.abs() < 1e-8 {
                1.0 - half_diff * half_diff / 6.0
            } else {
                half_diff.sin() / half_diff
            };
            let phase = -0.5 * (a.detuning + b.detuning) * s;
            second += a.weight * b.weight * s * sinc * Complex64::from_polar(1.0, phase);
        }
    }
    (-c * s).exp() * (-xi * first + 0.5 * xi * xi * second)
}

/// Delayed NFS intensity for a unit flat pulse, computed by DFT.
///
/// `grid.n_intervals` must be a power of two of at least 4096 and
/// `grid.t_max` at least 100 ms. The DFT spans [−t_max, t_max); samples at
/// negative delay must vanish to 1e-6 of the peak.
pub fn propagate_pulse(
    ls: &LineSet,
    grid: TimeGrid,
    isomer: &IsomerSpec,
    n_gamma0: f64,
) -> Result<TimeSpectrum> {
    let n = grid.n_intervals;
    if n < MIN_SAMPLES || !n.is_power_of_two() {
        return Err(Error::Precondition(format!(
            "sample count must be a power of two >= {MIN_SAMPLES}, got {n}"
        )));
    }
    if !(grid.t_max >= MIN_TMAX_S) {
        return Err(Error::Precondition(format!(
            "t_max must be at least {MIN_TMAX_S} s, got {}",
            grid.t_max
        )));
    }

    let m = 2 * n;
    let period = 2.0 * grid.t_max / isomer.tau0_s;
    let ds = period / m as f64;
    let dx = 2.0 * std::f64::consts::PI / period;
    let window = m as f64 * dx;

    let reach = ls
        .lines
        .iter()
        .map(|l| l.detuning.abs())
        .fold(0.0, f64::max)
        + ls.gamma_total;
    if window < WINDOW_FACTOR * reach {
        return Err(Error::Resolution(format!(
            "frequency window {window:.3e} Γ₀ is narrower than {WINDOW_FACTOR} × {reach:.3e} Γ₀"
        )));
    }
    let (lo, hi) = ls
        .lines
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| {
            (lo.min(l.detuning), hi.max(l.detuning))
        });
    if hi > lo {
        let beat = 2.0 * std::f64::consts::PI / (hi - lo);
        if beat < 10.0 * ds {
            return Err(Error::Resolution(format!(
                "beat period {beat:.3e} τ₀ is not resolved by step {ds:.3e} τ₀"
            )));
        }
    }

    let c = DAMPING_PRODUCT / period;
    let kappa = c - 0.5 * ls.gamma_total;

    let mut buf: Vec<Complex64> = (0..m)
        .map(|k| {
            let k = if k < n { k as f64 } else { k as f64 - m as f64 };
            let u = exponent(Complex64::new(k * dx, 0.0), ls, c);
            u.exp() - 1.0 - u - 0.5 * u * u
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let scale = 1.0 / period;

    let attenuation = (-0.5 * ls.le_ratio).exp();
    let shifted: Vec<Complex64> = (0..=n)
        .map(|j| {
            let s = j as f64 * ds;
            buf[j] * scale + analytic_part(s, ls, c)
        })
        .collect();

    let peak = shifted.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let acausal = buf[n + 1..]
        .iter()
        .map(|z| z.norm() * scale)
        .fold(0.0, f64::max);
    if peak > 0.0 && acausal > CAUSALITY_LIMIT * peak {
        return Err(Error::Resolution(format!(
            "response before the pulse reaches {:.2e} of the peak",
            acausal / peak
        )));
    }

    let pre = 2.0 * std::f64::consts::PI * n_gamma0 / isomer.tau0_s;
    let dt = grid.step();
    let mut t = Vec::with_capacity(n + 1);
    let mut rate = Vec::with_capacity(n + 1);
    for (j, z) in shifted.iter().enumerate() {
        let s = j as f64 * ds;
        let amp = z.norm() * attenuation * (kappa * s).exp();
        t.push(j as f64 * dt);
        rate.push(pre * amp * amp);
    }
    Ok(TimeSpectrum {
        t,
        rate,
        meta: SpectrumMeta {
            xi: ls.xi,
            gamma_total: ls.gamma_total,
            le_ratio: ls.le_ratio,
            n_gamma0,
            method: Method::Fourier,
        },
    })
}
