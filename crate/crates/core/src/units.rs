//! Physical constants and unit converters.
//!
//! Internal conventions: energies in eV, times in s, lengths in µm,
//! number densities in cm⁻³. Every conversion to and from other units goes
//! through one of the functions below.

use std::f64::consts::PI;

/// Reduced Planck constant, eV·s (CODATA 2018).
pub const HBAR_EV_S: f64 = 6.582_119_569e-16;
/// Elementary charge, J/eV.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Nuclear magneton, J/T.
pub const NUCLEAR_MAGNETON_J_T: f64 = 5.050_783_7e-27;
/// µ₀/4π, T·m/A.
pub const MU0_OVER_4PI: f64 = 1e-7;

/// Counts are quoted per 10,000 s of beam time.
pub const RATE_REFERENCE_S: f64 = 1e4;

pub fn kev_to_ev(kev: f64) -> f64 {
    kev * 1e3
}

pub fn ev_to_kev(ev: f64) -> f64 {
    ev / 1e3
}

pub fn mj_to_joule(mj: f64) -> f64 {
    mj / 1e3
}

pub fn joule_to_ev(j: f64) -> f64 {
    j / ELEMENTARY_CHARGE
}

pub fn um_to_cm(um: f64) -> f64 {
    um / 1e4
}

pub fn angstrom_to_m(a: f64) -> f64 {
    a / 1e10
}

pub fn ms_to_s(ms: f64) -> f64 {
    ms / 1e3
}

pub fn s_to_ms(s: f64) -> f64 {
    s * 1e3
}

pub fn mhz_to_hz(mhz: f64) -> f64 {
    mhz * 1e6
}

/// Natural width ħ/τ in eV.
pub fn width_ev_from_lifetime(tau_s: f64) -> f64 {
    HBAR_EV_S / tau_s
}

/// Converts a width in eV to ordinary frequency (Hz), Γ/(2πħ).
pub fn ev_to_hz(ev: f64) -> f64 {
    ev / (2.0 * PI * HBAR_EV_S)
}

/// Converts counts per 10,000 s to counts per second.
pub fn per_reference_to_per_s(rate: f64) -> f64 {
    rate / RATE_REFERENCE_S
}

pub fn per_s_to_per_reference(rate: f64) -> f64 {
    rate * RATE_REFERENCE_S
}
