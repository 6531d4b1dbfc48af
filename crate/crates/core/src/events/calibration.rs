//! Run configuration reproducing the published band rates.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::{Notch, ProcessAssignment, ProcessSpec, RunConfig, Train};
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::units::ev_to_kev;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceCalibration {
    pub duration_s: f64,
    /// Target band rates, counts/keV/10,000 s, summed over the detectors.
    pub r4: f64,
    pub r12: f64,
    /// Background per detector in the analysis window, counts/keV/10,000 s.
    pub rb: f64,
    pub tau_s: f64,
    /// Line energies in keV; external data, not from the measurement.
    pub kalpha_kev: f64,
    pub kbeta_kev: f64,
    pub kbeta_fraction: f64,
    pub band4_kev: (f64, f64),
    pub band12_kev: (f64, f64),
    pub window_s: (f64, f64),
    pub detectors: Vec<String>,
    /// Peak density of the prompt profile, counts/keV/10,000 s.
    pub prompt_rate: f64,
    pub prompt_center_kev: f64,
    pub prompt_width_kev: f64,
    pub notch: Option<Notch>,
    pub pile_up: bool,
}

impl Default for ReferenceCalibration {
    fn default() -> Self {
        Self {
            duration_s: 9e4,
            r4: 328.0,
            r12: 7.3,
            rb: 0.9,
            tau_s: 0.46,
            kalpha_kev: 4.09,
            kbeta_kev: 4.46,
            kbeta_fraction: 0.12,
            band4_kev: (3.75, 4.75),
            band12_kev: (12.15, 12.65),
            window_s: (0.015, 0.1),
            detectors: vec!["Du".into(), "Dd".into()],
            prompt_rate: 2e3,
            prompt_center_kev: 12.1,
            prompt_width_kev: 0.3,
            notch: None,
            pile_up: true,
        }
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Fraction of a Gaussian line at `center` with width `sigma` inside `band`.
fn band_fraction(center: f64, sigma: f64, band: (f64, f64)) -> f64 {
    normal_cdf((band.1 - center) / sigma) - normal_cdf((band.0 - center) / sigma)
}

/// Fraction of a truncated exponential on [0, period) inside `window`.
fn window_fraction(tau: f64, period: f64, window: (f64, f64)) -> f64 {
    let w0 = window.0.clamp(0.0, period);
    let w1 = window.1.clamp(0.0, period);
    ((-w0 / tau).exp() - (-w1 / tau).exp()) / -(-period / tau).exp_m1()
}

/// Builds a run whose expected band rates in the analysis window equal
/// `r4` and `r12`, with background `rb` per detector in that window.
pub fn calibrated_run(catalog: &Catalog, cal: &ReferenceCalibration, seed: u64) -> Result<RunConfig> {
    let isomer = catalog.isomer("45Sc")?;
    let beam = &catalog.beamline;
    let period = 1.0 / beam.rep_rate_hz;
    let detectors = cal
        .detectors
        .iter()
        .map(|d| catalog.detector(d).cloned())
        .collect::<Result<Vec<_>>>()?;
    if detectors.is_empty() {
        return Err(Error::Precondition("calibration needs at least one detector".into()));
    }
    let nd = detectors.len() as f64;
    if !(cal.r4 > nd * cal.rb && cal.r12 > nd * cal.rb) {
        return Err(Error::SignalBelowBackground {
            signal: cal.r4.min(cal.r12),
            background: nd * cal.rb,
            margin: 0.0,
        });
    }
    if !(0.0..=1.0).contains(&cal.kbeta_fraction) {
        return Err(Error::invariant("kbeta_fraction", "must lie in [0, 1]"));
    }
    let ft = window_fraction(cal.tau_s, period, cal.window_s);
    let w4 = cal.band4_kev.1 - cal.band4_kev.0;
    let w12 = cal.band12_kev.1 - cal.band12_kev.0;
    let window_share = (cal.window_s.1.min(period) - cal.window_s.0.max(0.0)) / period;

    let mut processes = Vec::new();
    for det in &detectors {
        let sigma = ev_to_kev(det.energy_sigma_ev);
        let c4 = (1.0 - cal.kbeta_fraction) * band_fraction(cal.kalpha_kev, sigma, cal.band4_kev)
            + cal.kbeta_fraction * band_fraction(cal.kbeta_kev, sigma, cal.band4_kev);
        let c12 = band_fraction(isomer.e0_kev(), sigma, cal.band12_kev);
        let line4 = (cal.r4 - nd * cal.rb) * w4 / (nd * ft * c4);
        let line12 = (cal.r12 - nd * cal.rb) * w12 / (nd * ft * c12);
        let mut push = |process| {
            processes.push(ProcessAssignment {
                detector: det.name.clone(),
                process,
            })
        };
        push(ProcessSpec::DelayedLine {
            energy_center_kev: cal.kalpha_kev,
            rate: line4 * (1.0 - cal.kbeta_fraction),
            decay_tau_s: cal.tau_s,
        });
        push(ProcessSpec::DelayedLine {
            energy_center_kev: cal.kbeta_kev,
            rate: line4 * cal.kbeta_fraction,
            decay_tau_s: cal.tau_s,
        });
        push(ProcessSpec::DelayedLine {
            energy_center_kev: isomer.e0_kev(),
            rate: line12,
            decay_tau_s: cal.tau_s,
        });
        push(ProcessSpec::FlatBackground {
            rate: cal.rb / window_share,
        });
        if cal.prompt_rate > 0.0 {
            push(ProcessSpec::PromptCompton {
                energy_center_kev: cal.prompt_center_kev,
                energy_width_kev: cal.prompt_width_kev,
                rate: cal.prompt_rate,
            });
        }
    }
    let cfg = RunConfig {
        duration_s: cal.duration_s,
        rep_rate_hz: beam.rep_rate_hz,
        detectors,
        processes,
        seed,
        notch: cal.notch,
        pile_up: cal.pile_up,
        train: Train {
            pulses: beam.pulses_per_train,
            spacing_s: beam.pulse_spacing_s,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fractions() {
        assert_relative_eq!(band_fraction(0.0, 1.0, (-1.96, 1.96)), 0.95, epsilon = 1e-4);
        assert_relative_eq!(window_fraction(0.46, 0.1, (0.0, 0.1)), 1.0, max_relative = 1e-14);
        let f = window_fraction(0.46, 0.1, (0.015, 0.1));
        assert!(f > 0.82 && f < 0.86, "{f}");
    }

    #[test]
    fn calibrated_rates() {
        let cfg = calibrated_run(&Catalog::builtin(), &ReferenceCalibration::default(), 1).unwrap();
        assert_eq!(cfg.n_pulses(), 900_000);
        assert_eq!(cfg.processes.len(), 10);
        let below = ReferenceCalibration {
            r12: 1.0,
            ..Default::default()
        };
        assert!(calibrated_run(&Catalog::builtin(), &below, 1).is_err());
    }
}
