//! Monte Carlo photon-event streams for pulsed isomer excitation.
//!
//! Each macropulse draws from its own ChaCha8 stream (seed, stream =
//! pulse index), so the output does not depend on how pulses are spread
//! over threads.

mod calibration;
mod io;

pub use calibration::{calibrated_run, ReferenceCalibration};
pub use io::{
    metadata_path, read_events, write_atomic, write_events, write_events_to, RunMetadata, GENERATOR,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::DetectorModel;
use crate::error::{Error, Result};
use crate::units::{ev_to_kev, RATE_REFERENCE_S};

/// One detected photon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub pulse_id: u64,
    pub detector: String,
    /// Delay after excitation, s.
    pub t: f64,
    /// Deposited energy, keV.
    pub e_kev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessSpec {
    /// Gaussian profile emitted at the micropulse times.
    /// `rate` is the peak density, counts/keV/10,000 s.
    PromptCompton {
        energy_center_kev: f64,
        energy_width_kev: f64,
        rate: f64,
    },
    /// Monoenergetic line decaying with `decay_tau_s`.
    /// `rate` is counts/10,000 s over the full inter-pulse window.
    DelayedLine {
        energy_center_kev: f64,
        rate: f64,
        decay_tau_s: f64,
    },
    /// Uniform in energy over the detector range and in delay; counts/keV/10,000 s.
    FlatBackground { rate: f64 },
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        let rate = match *self {
            ProcessSpec::PromptCompton {
                energy_width_kev,
                rate,
                ..
            } => {
                if !(energy_width_kev > 0.0) {
                    return Err(Error::invariant("energy_width_kev", "must be positive"));
                }
                rate
            }
            ProcessSpec::DelayedLine { rate, decay_tau_s, .. } => {
                if !(decay_tau_s > 0.0) {
                    return Err(Error::invariant("decay_tau_s", "must be positive"));
                }
                rate
            }
            ProcessSpec::FlatBackground { rate } => rate,
        };
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::invariant("rate", format!("must be finite and non-negative, got {rate}")));
        }
        Ok(())
    }

    fn is_delayed(&self) -> bool {
        matches!(self, ProcessSpec::DelayedLine { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessAssignment {
    pub detector: String,
    #[serde(flatten)]
    pub process: ProcessSpec,
}

/// Injected loss of delayed counts in a time slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Notch {
    pub t_center_s: f64,
    pub width_s: f64,
    /// Fraction of delayed counts removed inside the slot.
    pub depth: f64,
}

impl Notch {
    fn contains(&self, t: f64) -> bool {
        (t - self.t_center_s).abs() <= 0.5 * self.width_s
    }
}

/// Micropulse structure within one macropulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Train {
    pub pulses: u32,
    pub spacing_s: f64,
}

impl Default for Train {
    fn default() -> Self {
        Self {
            pulses: 400,
            spacing_s: 440e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub duration_s: f64,
    pub rep_rate_hz: f64,
    pub detectors: Vec<DetectorModel>,
    pub processes: Vec<ProcessAssignment>,
    pub seed: u64,
    #[serde(default)]
    pub notch: Option<Notch>,
    /// Include decays carried over from earlier macropulses.
    #[serde(default = "default_true")]
    pub pile_up: bool,
    #[serde(default)]
    pub train: Train,
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::invariant("duration_s", "must be positive"));
        }
        if !(self.rep_rate_hz > 0.0) || !self.rep_rate_hz.is_finite() {
            return Err(Error::invariant("rep_rate_hz", "must be positive"));
        }
        if self.n_pulses() == 0 {
            return Err(Error::invariant("duration_s", "shorter than one macropulse period"));
        }
        for d in &self.detectors {
            d.validate()?;
        }
        for p in &self.processes {
            if !self.detectors.iter().any(|d| d.name == p.detector) {
                return Err(Error::Unknown {
                    kind: "detector",
                    name: p.detector.clone(),
                });
            }
            p.process.validate()?;
        }
        if let Some(n) = self.notch {
            if !(n.width_s >= 0.0) || !(0.0..=1.0).contains(&n.depth) {
                return Err(Error::invariant("notch", "width must be ≥ 0 and depth in [0, 1]"));
            }
        }
        if self.train.pulses == 0 || !(self.train.spacing_s >= 0.0) {
            return Err(Error::invariant("train", "needs at least one pulse and a non-negative spacing"));
        }
        if self.train.spacing_s * f64::from(self.train.pulses - 1) >= self.period() {
            return Err(Error::invariant("train", "longer than the macropulse period"));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.rep_rate_hz
    }

    pub fn n_pulses(&self) -> u64 {
        (self.duration_s * self.rep_rate_hz).round() as u64
    }
}

/// Per-process constants resolved against its detector.
struct Prepared<'a> {
    det: &'a DetectorModel,
    process: &'a ProcessSpec,
    /// Expected counts per macropulse in steady state.
    mean: f64,
    smear: Normal<f64>,
}

fn prepare(cfg: &RunConfig) -> Result<Vec<Prepared<'_>>> {
    let per_pulse = cfg.period() / RATE_REFERENCE_S;
    cfg.processes
        .iter()
        .map(|a| {
            let det = cfg
                .detectors
                .iter()
                .find(|d| d.name == a.detector)
                .ok_or_else(|| Error::Unknown {
                    kind: "detector",
                    name: a.detector.clone(),
                })?;
            let mean = match a.process {
                ProcessSpec::PromptCompton {
                    energy_width_kev,
                    rate,
                    ..
                } => rate * energy_width_kev * (2.0 * std::f64::consts::PI).sqrt() * per_pulse,
                ProcessSpec::DelayedLine { rate, .. } => rate * per_pulse,
                ProcessSpec::FlatBackground { rate } => {
                    rate * (det.energy_range_kev.1 - det.energy_range_kev.0) * per_pulse
                }
            };
            let smear = Normal::new(0.0, ev_to_kev(det.energy_sigma_ev))
                .map_err(|e| Error::invariant("energy_sigma_eV", e.to_string()))?;
            Ok(Prepared {
                det,
                process: &a.process,
                mean,
                smear,
            })
        })
        .collect()
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

fn simulate_pulse(cfg: &RunConfig, prepared: &[Prepared<'_>], pulse: u64) -> Vec<EventRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(pulse);
    let period = cfg.period();
    let mut out = Vec::new();
    for p in prepared {
        let mut mean = p.mean;
        if let ProcessSpec::DelayedLine { decay_tau_s, .. } = *p.process {
            if cfg.pile_up {
                // decays from earlier pulses are absent at the start of the run
                mean *= -(-((pulse + 1) as f64) * period / decay_tau_s).exp_m1();
            }
        }
        let n = poisson(&mut rng, mean);
        for _ in 0..n {
            let (t, e) = match *p.process {
                ProcessSpec::PromptCompton {
                    energy_center_kev,
                    energy_width_kev,
                    ..
                } => {
                    let k = rng.random_range(0..cfg.train.pulses);
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    (f64::from(k) * cfg.train.spacing_s, energy_center_kev + energy_width_kev * z)
                }
                ProcessSpec::DelayedLine {
                    energy_center_kev,
                    decay_tau_s,
                    ..
                } => {
                    let u: f64 = rng.random();
                    let span = -(-period / decay_tau_s).exp_m1();
                    let t = -decay_tau_s * (-u * span).ln_1p();
                    (t.min(period * (1.0 - f64::EPSILON)), energy_center_kev)
                }
                ProcessSpec::FlatBackground { .. } => {
                    let (lo, hi) = p.det.energy_range_kev;
                    (rng.random::<f64>() * period, rng.random_range(lo..hi))
                }
            };
            let e = e + p.smear.sample(&mut rng);
            if p.process.is_delayed() {
                if let Some(notch) = cfg.notch {
                    let u: f64 = rng.random();
                    if notch.contains(t) && u < notch.depth {
                        continue;
                    }
                }
            }
            if p.det.gate_contains(t) && p.det.energy_contains(e) {
                out.push(EventRecord {
                    pulse_id: pulse,
                    detector: p.det.name.clone(),
                    t,
                    e_kev: e,
                });
            }
        }
    }
    out
}

fn event_order(a: &EventRecord, b: &EventRecord) -> std::cmp::Ordering {
    a.pulse_id
        .cmp(&b.pulse_id)
        .then(a.t.total_cmp(&b.t))
        .then_with(|| a.detector.cmp(&b.detector))
        .then(a.e_kev.total_cmp(&b.e_kev))
}

/// Generates the full event stream, sorted by (pulse, t, detector, E).
pub fn simulate_run(cfg: &RunConfig) -> Result<Vec<EventRecord>> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    let mut events: Vec<EventRecord> = (0..cfg.n_pulses())
        .into_par_iter()
        .flat_map_iter(|pulse| simulate_pulse(cfg, &prepared, pulse))
        .collect();
    events.par_sort_by(event_order);
    Ok(events)
}

/// Keeps events with gate_open ≤ t ≤ gate_close.
pub fn gate_events(events: impl IntoIterator<Item = EventRecord>, det: &DetectorModel) -> Vec<EventRecord> {
    events.into_iter().filter(|e| det.gate_contains(e.t)).collect()
}
