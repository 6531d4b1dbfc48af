//! Broadening and splitting estimates, reported in units of Γ₀.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::catalog::{Endpoint, IsomerSpec, Spin, TargetSpec};
use crate::error::{Error, Result};
use crate::units;

/// Quadrupole sublevels of one nuclear state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperfineLevels {
    pub spin: f64,
    /// Eigenvalues in ascending order, MHz (units of eQV_zz/h).
    pub energies: Vec<f64>,
    /// Magnetic quantum number with the largest weight in each eigenvector.
    pub dominant_m: Vec<f64>,
}

impl HyperfineLevels {
    pub fn span(&self) -> f64 {
        match (self.energies.first(), self.energies.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    DipoleDipole,
    Quadrupole,
    Zeeman,
}

#[derive(Debug, Clone, Serialize)]
pub struct BroadeningEstimate {
    pub mechanism: Mechanism,
    /// Γ₀ units.
    pub magnitude: f64,
    pub inputs: Vec<(String, f64)>,
}

/// Diagonalizes H_Q = C/(4I(2I−1)) [3I_z² − I(I+1) + η(I_x² − I_y²)].
pub fn quadrupole_levels(spin: Spin, coupling_mhz: f64, eta: f64) -> Result<HyperfineLevels> {
    if spin.twice() < 2 {
        return Err(Error::Domain(format!("spin {spin} has no quadrupole moment")));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("asymmetry {eta} is outside [0, 1]")));
    }
    let i = spin.value();
    let dim = spin.multiplicity();
    let m_of = |k: usize| i - k as f64;
    let pre = coupling_mhz / (4.0 * i * (2.0 * i - 1.0));

    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim {
        let m = m_of(k);
        h[(k, k)] = pre * (3.0 * m * m - i * (i + 1.0));
    }
    // (I₊² + I₋²)/2 couples m and m ± 2
    let ladder = |m: f64| (i * (i + 1.0) - m * (m + 1.0)).max(0.0).sqrt();
    for k in 2..dim {
        // lower state index k has m_low = m_of(k), raised twice reaches k − 2
        let m = m_of(k);
        let elem = ladder(m) * ladder(m + 1.0);
        let v = pre * eta * 0.5 * elem;
        h[(k - 2, k)] = v;
        h[(k, k - 2)] = v;
    }

    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let dominant_m = order
        .iter()
        .map(|&k| {
            let col = eig.eigenvectors.column(k);
            let arg = (0..dim)
                .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()))
                .unwrap_or(0);
            m_of(arg)
        })
        .collect();
    Ok(HyperfineLevels {
        spin: i,
        energies,
        dominant_m,
    })
}

fn mhz_to_gamma0(mhz: f64, isomer: &IsomerSpec) -> f64 {
    units::mhz_to_hz(mhz) / isomer.gamma0_hz
}

fn j_to_gamma0(joule: f64, isomer: &IsomerSpec) -> f64 {
    units::joule_to_ev(joule) / isomer.gamma0_ev
}

/// Ground plus excited quadrupole span, MHz, using the worst-case sum.
pub fn transition_span_mhz(isomer: &IsomerSpec, target: &TargetSpec, end: Endpoint) -> Result<f64> {
    let q = target.quadrupole(end)?;
    let (ig, ie) = isomer.spins()?;
    let ratio = isomer.quadrupole_ratio()?;
    let span = |spin: Spin, c: f64| -> Result<f64> {
        if spin.twice() < 2 {
            return Ok(0.0);
        }
        Ok(quadrupole_levels(spin, c, q.eta)?.span())
    };
    Ok(span(ig, q.coupling_mhz)? + span(ie, q.coupling_mhz * ratio)?)
}

/// Maximal transition-energy spread from quadrupole splitting, Γ₀ units.
pub fn transition_span_gamma0(isomer: &IsomerSpec, target: &TargetSpec) -> Result<f64> {
    transition_span_mhz(isomer, target, Endpoint::default()).map(|mhz| mhz_to_gamma0(mhz, isomer))
}

/// U = 2 (µ₀/4π) µ_g µ_e / r³, moments in nuclear magnetons and r in Å.
pub fn dipole_broadening(mu_g: f64, mu_e: f64, r_angstrom: f64, isomer: &IsomerSpec) -> Result<f64> {
    if !(r_angstrom > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {r_angstrom} Å")));
    }
    let r = units::angstrom_to_m(r_angstrom);
    let mu_n2 = units::NUCLEAR_MAGNETON_J_T * units::NUCLEAR_MAGNETON_J_T;
    let u = 2.0 * units::MU0_OVER_4PI * (mu_g * mu_e).abs() * mu_n2 / (r * r * r);
    Ok(j_to_gamma0(u, isomer))
}

/// Full Zeeman span of the ground multiplet, 2µB, in Γ₀ units.
pub fn zeeman_splitting(mu: f64, spin: Spin, b_tesla: f64, isomer: &IsomerSpec) -> Result<f64> {
    if spin.twice() == 0 {
        return Err(Error::Domain("spin-zero state has no magnetic moment".into()));
    }
    if !(b_tesla >= 0.0) {
        return Err(Error::Domain(format!("field must be non-negative, got {b_tesla} T")));
    }
    Ok(j_to_gamma0(2.0 * mu.abs() * units::NUCLEAR_MAGNETON_J_T * b_tesla, isomer))
}

/// All three estimates for one target, with isomer moments from the catalog.
pub fn broadening_table(
    isomer: &IsomerSpec,
    target: &TargetSpec,
    field_tesla: f64,
) -> Result<Vec<BroadeningEstimate>> {
    let mut out = Vec::new();
    if let (Some(mu_g), Some(mu_e), Some(r)) = (isomer.mu_g, isomer.mu_e, target.r_nn_angstrom) {
        out.push(BroadeningEstimate {
            mechanism: Mechanism::DipoleDipole,
            magnitude: dipole_broadening(mu_g, mu_e, r, isomer)?,
            inputs: vec![("mu_g".into(), mu_g), ("mu_e".into(), mu_e), ("r_A".into(), r)],
        });
    }
    if let Ok(q) = target.quadrupole(Endpoint::default()) {
        out.push(BroadeningEstimate {
            mechanism: Mechanism::Quadrupole,
            magnitude: transition_span_gamma0(isomer, target)?,
            inputs: vec![("eQgVzz_MHz".into(), q.coupling_mhz), ("eta".into(), q.eta)],
        });
    }
    if let (Some(mu_g), Some(ig)) = (isomer.mu_g, isomer.ground_spin) {
        out.push(BroadeningEstimate {
            mechanism: Mechanism::Zeeman,
            magnitude: zeeman_splitting(mu_g, ig, field_tesla, isomer)?,
            inputs: vec![("mu".into(), mu_g), ("B_T".into(), field_tesla)],
        });
    }
    Ok(out)
}

/// Converts a magnitude in Γ₀ units to Hz.
pub fn gamma0_to_hz(value: f64, isomer: &IsomerSpec) -> f64 {
    value * isomer.gamma0_hz
}
