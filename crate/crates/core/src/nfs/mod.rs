//! Coherent nuclear forward scattering (NFS) time response.
//!
//! Energies inside this module are expressed in units of the natural width
//! Γ₀ and times are converted to units of τ₀ = ħ/Γ₀ before evaluation. All
//! rates are photons per second for an incident spectral density of
//! `n_gamma0` photons per Γ₀ per pulse.

mod bessel;
mod propagate;
mod window;

use std::f64::consts::PI;

use serde::Serialize;

use crate::catalog::IsomerSpec;
use crate::error::{Error, Result};

pub use bessel::{bessel_j1, j1_ratio};
pub use propagate::{propagate_pulse, transmission_amplitude};
pub use window::{
    detection_limit_scan, integrate_window, optimal_thickness, window_integrals,
    DetectionLimit, LimitProbe, WindowIntegral,
};

/// One resonance line: detuning in Γ₀ units and relative weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Line {
    pub detuning: f64,
    pub weight: f64,
}

/// Resonance lines sharing an optical thickness and a per-line width.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineSet {
    lines: Vec<Line>,
    gamma_total: f64,
    xi: f64,
    le_ratio: f64,
}

const WEIGHT_TOLERANCE: f64 = 1e-9;

impl LineSet {
    /// `gamma_total` is Γ₀ + ΔΓ in Γ₀ units; `le_ratio` is L/Le.
    pub fn new(lines: Vec<Line>, gamma_total: f64, xi: f64, le_ratio: f64) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::invariant("lines", "at least one line is required"));
        }
        if lines.iter().any(|l| !(l.weight > 0.0) || !l.detuning.is_finite()) {
            return Err(Error::invariant("lines", "weights must be positive and detunings finite"));
        }
        let total: f64 = lines.iter().map(|l| l.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::invariant("lines", format!("weights sum to {total}, not 1")));
        }
        if !(gamma_total >= 1.0) || !gamma_total.is_finite() {
            return Err(Error::invariant("gamma_total", "line width must be at least Γ₀"));
        }
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(Error::invariant("xi", "must be non-negative"));
        }
        if !(le_ratio >= 0.0) {
            return Err(Error::invariant("le_ratio", "must be non-negative"));
        }
        Ok(LineSet {
            lines,
            gamma_total,
            xi,
            le_ratio,
        })
    }

    /// Rescales arbitrary positive weights to unit sum, moving the factor
    /// into ξ so every product wⱼ·ξ is preserved.
    pub fn normalized(lines: Vec<Line>, gamma_total: f64, xi: f64, le_ratio: f64) -> Result<Self> {
        let total: f64 = lines.iter().map(|l| l.weight).sum();
        if !(total > 0.0) {
            return Err(Error::invariant("lines", "weights must be positive"));
        }
        let lines = lines
            .into_iter()
            .map(|l| Line {
                detuning: l.detuning,
                weight: l.weight / total,
            })
            .collect();
        Self::new(lines, gamma_total, xi * total, le_ratio)
    }

    /// A single unsplit line at zero detuning with broadening ΔΓ (Γ₀ units).
    pub fn single(xi: f64, dgamma: f64, le_ratio: f64) -> Result<Self> {
        Self::new(
            vec![Line {
                detuning: 0.0,
                weight: 1.0,
            }],
            1.0 + dgamma,
            xi,
            le_ratio,
        )
    }

    /// Equal-weight lines at the given detunings.
    pub fn uniform(detunings: &[f64], xi: f64, dgamma: f64, le_ratio: f64) -> Result<Self> {
        let w = 1.0 / detunings.len().max(1) as f64;
        let lines = detunings
            .iter()
            .map(|&d| Line {
                detuning: d,
                weight: w,
            })
            .collect();
        Self::normalized(lines, 1.0 + dgamma, xi, le_ratio)
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn gamma_total(&self) -> f64 {
        self.gamma_total
    }

    pub fn dgamma(&self) -> f64 {
        self.gamma_total - 1.0
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn le_ratio(&self) -> f64 {
        self.le_ratio
    }

    /// Same lines and thickness with a different broadening.
    pub fn with_dgamma(&self, dgamma: f64) -> Result<Self> {
        Self::new(self.lines.clone(), 1.0 + dgamma, self.xi, self.le_ratio)
    }

    pub fn is_single_unshifted(&self) -> bool {
        self.lines.len() == 1 && self.lines[0].detuning == 0.0
    }

    fn require_single(&self) -> Result<()> {
        if self.is_single_unshifted() {
            Ok(())
        } else {
            Err(Error::Precondition(
                "closed-form rates need exactly one line at zero detuning".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ThinTarget,
    Exact,
    Fourier,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumMeta {
    pub xi: f64,
    pub gamma_total: f64,
    pub le_ratio: f64,
    pub n_gamma0: f64,
    pub method: Method,
}

/// Sampled delayed-count rate R(t).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSpectrum {
    /// Delays, s. Strictly increasing.
    pub t: Vec<f64>,
    /// photons/s
    pub rate: Vec<f64>,
    pub meta: SpectrumMeta,
}

/// Uniform delay grid: `n_intervals` steps from 0 to `t_max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_intervals: usize,
}

impl TimeGrid {
    pub const DEFAULT: TimeGrid = TimeGrid {
        t_max: 0.2,
        n_intervals: 1 << 18,
    };

    pub fn step(&self) -> f64 {
        self.t_max / self.n_intervals as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.step();
        (0..=self.n_intervals).map(move |j| j as f64 * dt)
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self::DEFAULT
    }
}

fn prefactor(isomer: &IsomerSpec, n_gamma0: f64) -> f64 {
    2.0 * PI * n_gamma0 / isomer.tau0_s
}

/// Thin-target approximation, valid for t ≪ τ₀/ξ:
/// R(t) = 2π (N/τ₀) ξ² exp[−(Γ + ξΓ₀) t/ħ − L/Le].
pub fn thin_target_rate(t: f64, ls: &LineSet, isomer: &IsomerSpec, n_gamma0: f64) -> Result<f64> {
    ls.require_single()?;
    let s = t / isomer.tau0_s;
    let xi = ls.xi;
    Ok(prefactor(isomer, n_gamma0)
        * xi
        * xi
        * (-(ls.gamma_total + xi) * s - ls.le_ratio).exp())
}

/// Single-line dynamical response without the thin-target approximation:
/// R(t) = 2π (N/τ₀) exp[−Γt/ħ − L/Le] (ξ/T) J₁²(2√(ξT)), T = t/τ₀.
pub fn exact_rate(t: f64, ls: &LineSet, isomer: &IsomerSpec, n_gamma0: f64) -> Result<f64> {
    ls.require_single()?;
    Ok(exact_unchecked(t / isomer.tau0_s, ls) * prefactor(isomer, n_gamma0))
}

fn exact_unchecked(s: f64, ls: &LineSet) -> f64 {
    let xi = ls.xi;
    let g = j1_ratio(xi * s.max(0.0));
    xi * xi * g * g * (-ls.gamma_total * s - ls.le_ratio).exp()
}

/// Samples [`exact_rate`] on a uniform grid.
pub fn sample_exact(
    ls: &LineSet,
    grid: TimeGrid,
    isomer: &IsomerSpec,
    n_gamma0: f64,
) -> Result<TimeSpectrum> {
    ls.require_single()?;
    let pre = prefactor(isomer, n_gamma0);
    let t: Vec<f64> = grid.points().collect();
    let rate = t
        .iter()
        .map(|&t| pre * exact_unchecked(t / isomer.tau0_s, ls))
        .collect();
    Ok(TimeSpectrum {
        t,
        rate,
        meta: SpectrumMeta {
            xi: ls.xi,
            gamma_total: ls.gamma_total,
            le_ratio: ls.le_ratio,
            n_gamma0,
            method: Method::Exact,
        },
    })
}

/// Uses the closed form for a single unshifted line and the Fourier
/// propagation otherwise.
pub fn time_spectrum(
    ls: &LineSet,
    grid: TimeGrid,
    isomer: &IsomerSpec,
    n_gamma0: f64,
) -> Result<TimeSpectrum> {
    if ls.is_single_unshifted() {
        sample_exact(ls, grid, isomer, n_gamma0)
    } else {
        propagate_pulse(ls, grid, isomer, n_gamma0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;
    use approx::assert_relative_eq;

    fn sc() -> IsomerSpec {
        Catalog::builtin().isomer("45Sc").unwrap().clone()
    }

    #[test]
    fn thin_target_at_origin() {
        let ls = LineSet::single(2.25, 0.0, 0.0).unwrap();
        let r = thin_target_rate(0.0, &ls, &sc(), 1.0).unwrap();
        assert_relative_eq!(r, 2.0 * PI / 0.47 * 2.25 * 2.25, max_relative = 1e-12);
        assert_relative_eq!(r, 67.7, max_relative = 1e-3);
    }

    #[test]
    fn no_resonant_nuclei_no_signal() {
        let ls = LineSet::single(0.0, 10.0, 0.0).unwrap();
        for t in [0.0, 1e-3, 0.05] {
            assert_eq!(thin_target_rate(t, &ls, &sc(), 1.0).unwrap(), 0.0);
            assert_eq!(exact_rate(t, &ls, &sc(), 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn thin_target_decay_matches_scalar_evaluation() {
        let iso = sc();
        let ls = LineSet::single(2.25, 500.0, 0.0).unwrap();
        let r0 = thin_target_rate(0.0, &ls, &iso, 1.0).unwrap();
        let r2 = thin_target_rate(0.002, &ls, &iso, 1.0).unwrap();
        let gamma0 = iso.gamma0_ev;
        let expected = (-(501.0 * gamma0 + 2.25 * gamma0) * 0.002 / crate::units::HBAR_EV_S).exp();
        assert_relative_eq!(r2 / r0, expected, max_relative = 1e-10);
    }

    #[test]
    fn exact_equals_thin_at_origin() {
        let iso = sc();
        let ls = LineSet::single(2.25, 0.0, 0.7).unwrap();
        assert_eq!(
            exact_rate(0.0, &ls, &iso, 1.0).unwrap(),
            thin_target_rate(0.0, &ls, &iso, 1.0).unwrap()
        );
    }

    #[test]
    fn exact_close_to_thin_in_validity_domain() {
        let iso = sc();
        let ls = LineSet::single(2.25, 0.0, 0.0).unwrap();
        let t = 0.01 * iso.tau0_s / 2.25;
        let a = exact_rate(t, &ls, &iso, 1.0).unwrap();
        let b = thin_target_rate(t, &ls, &iso, 1.0).unwrap();
        assert_relative_eq!(a, b, max_relative = 0.01);
    }

    #[test]
    fn exact_vanishes_at_bessel_zero() {
        let iso = sc();
        let xi = 2.25;
        let ls = LineSet::single(xi, 0.0, 0.0).unwrap();
        let z = 3.831_705_970_207_512_3_f64;
        let t = (z / 2.0).powi(2) / xi * iso.tau0_s;
        let r = exact_rate(t, &ls, &iso, 1.0).unwrap();
        assert!(r < 1e-25, "{r}");
    }

    #[test]
    fn multi_line_rejected_by_closed_forms() {
        let ls = LineSet::uniform(&[-5.0, 5.0], 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            thin_target_rate(0.0, &ls, &sc(), 1.0),
            Err(Error::Precondition(_))
        ));
        assert!(exact_rate(0.0, &ls, &sc(), 1.0).is_err());
    }

    #[test]
    fn lineset_invariants() {
        let l = |d, w| Line {
            detuning: d,
            weight: w,
        };
        assert!(LineSet::new(vec![l(0.0, 0.5)], 1.0, 1.0, 0.0).is_err());
        assert!(LineSet::new(vec![l(0.0, 1.0)], 0.5, 1.0, 0.0).is_err());
        assert!(LineSet::new(vec![l(0.0, 0.5), l(1.0, -0.5)], 1.0, 1.0, 0.0).is_err());
        let n = LineSet::normalized(vec![l(0.0, 2.0), l(3.0, 6.0)], 1.0, 0.5, 0.0).unwrap();
        assert_relative_eq!(n.xi(), 4.0);
        assert_relative_eq!(n.lines()[1].weight, 0.75);
    }
}
