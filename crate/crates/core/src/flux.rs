//! Spectral density and flux along the beamline.
//!
//! The pulse train is treated as a single macropulse; the flux unit is
//! photons per natural linewidth Γ₀ per second.

use serde::Serialize;

use crate::catalog::{BeamlineSpec, IsomerSpec};
use crate::error::{Error, Result};
use crate::units;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralFlux {
    /// Photons per Γ₀ per second.
    pub value: f64,
    pub at_point: String,
}

/// S_p = (E_p − E_bg) / ΔE_p in mJ/eV.
pub fn spectral_density(ep_mj: f64, ebg_mj: f64, dep_ev: f64) -> Result<f64> {
    if !(dep_ev > 0.0) {
        return Err(Error::Domain(format!("bandwidth must be positive, got {dep_ev} eV")));
    }
    if !(ep_mj >= ebg_mj) {
        return Err(Error::Domain(format!(
            "pulse energy {ep_mj} mJ is below the background {ebg_mj} mJ"
        )));
    }
    Ok((ep_mj - ebg_mj) / dep_ev)
}

/// Converts a spectral density in mJ/eV to photons per Γ₀ of the isomer.
pub fn density_to_ph_per_gamma0(density_mj_per_ev: f64, isomer: &IsomerSpec) -> f64 {
    let photons_per_ev = units::joule_to_ev(units::mj_to_joule(density_mj_per_ev)) / isomer.e0_ev;
    photons_per_ev * isomer.gamma0_ev
}

/// Inverse of [`density_to_ph_per_gamma0`].
pub fn ph_per_gamma0_to_density(ph_per_gamma0: f64, isomer: &IsomerSpec) -> f64 {
    let photons_per_ev = ph_per_gamma0 / isomer.gamma0_ev;
    photons_per_ev * isomer.e0_ev * units::ELEMENTARY_CHARGE * 1e3
}

pub fn chain_transmission(factors: &[f64]) -> Result<f64> {
    factors.iter().try_fold(1.0, |acc, &t| {
        if t > 0.0 && t <= 1.0 {
            Ok(acc * t)
        } else {
            Err(Error::Domain(format!("transmission factor {t} is outside (0, 1]")))
        }
    })
}

/// Photons per Γ₀ in a single pulse of the beam.
pub fn photons_per_gamma0_per_pulse(beam: &BeamlineSpec, isomer: &IsomerSpec) -> Result<f64> {
    let s = spectral_density(
        beam.pulse_energy_mj,
        beam.background_energy_mj,
        beam.bandwidth_ev,
    )?;
    Ok(density_to_ph_per_gamma0(s, isomer))
}

/// Flux after the given chain of transmissions.
pub fn flux_at(beam: &BeamlineSpec, isomer: &IsomerSpec, chain: &[f64]) -> Result<SpectralFlux> {
    beam.validate()?;
    let per_pulse = photons_per_gamma0_per_pulse(beam, isomer)?;
    let t = chain_transmission(chain)?;
    let at_point = if chain.is_empty() {
        "undulator exit".to_string()
    } else {
        format!("after {} element(s)", chain.len())
    };
    Ok(SpectralFlux {
        value: beam.rep_rate_hz * per_pulse * f64::from(beam.pulses_per_train) * t,
        at_point,
    })
}

/// One row of the beamline flux table.
#[derive(Debug, Clone, Serialize)]
pub struct FluxRow {
    pub location: String,
    pub element: Option<String>,
    pub transmission: f64,
    pub cumulative_transmission: f64,
    pub flux: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FluxReport {
    pub spectral_density_mj_per_ev: f64,
    pub photons_per_gamma0_per_pulse: f64,
    pub rows: Vec<FluxRow>,
}

/// Flux at the undulator exit and after every element of the beamline.
pub fn flux_table(beam: &BeamlineSpec, isomer: &IsomerSpec) -> Result<FluxReport> {
    beam.validate()?;
    let density = spectral_density(
        beam.pulse_energy_mj,
        beam.background_energy_mj,
        beam.bandwidth_ev,
    )?;
    let source = flux_at(beam, isomer, &[])?;
    let mut rows = vec![FluxRow {
        location: source.at_point.clone(),
        element: None,
        transmission: 1.0,
        cumulative_transmission: 1.0,
        flux: source.value,
    }];
    let mut chain = Vec::with_capacity(beam.elements.len());
    for e in &beam.elements {
        chain.push(e.transmission);
        let f = flux_at(beam, isomer, &chain)?;
        rows.push(FluxRow {
            location: e.point.clone().unwrap_or_else(|| format!("after {}", e.name)),
            element: Some(e.name.clone()),
            transmission: e.transmission,
            cumulative_transmission: chain_transmission(&chain)?,
            flux: f.value,
        });
    }
    Ok(FluxReport {
        spectral_density_mj_per_ev: density,
        photons_per_gamma0_per_pulse: density_to_ph_per_gamma0(density, isomer),
        rows,
    })
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
    fn densities() {
        assert_relative_eq!(spectral_density(0.55, 0.08, 0.6).unwrap(), 0.783, max_relative = 1e-3);
        assert_relative_eq!(spectral_density(0.35, 0.0, 1.3).unwrap(), 0.269, max_relative = 1e-3);
        assert_eq!(spectral_density(0.3, 0.3, 0.6).unwrap(), 0.0);
        assert!(spectral_density(0.55, 0.08, 0.0).is_err());
        assert!(spectral_density(0.05, 0.08, 0.6).is_err());
    }

    #[test]
    fn photons_per_gamma0() {
        assert_relative_eq!(density_to_ph_per_gamma0(0.78, &sc()), 5.5e-4, max_relative = 0.02);
        assert_relative_eq!(density_to_ph_per_gamma0(0.27, &sc()), 1.9e-4, max_relative = 0.02);
        assert_eq!(density_to_ph_per_gamma0(0.0, &sc()), 0.0);
    }

    #[test]
    fn transmissions() {
        assert_relative_eq!(chain_transmission(&[0.66, 0.7, 0.75, 0.87]).unwrap(), 0.301455, max_relative = 1e-9);
        assert_eq!(chain_transmission(&[]).unwrap(), 1.0);
        assert_eq!(chain_transmission(&[0.44]).unwrap(), 0.44);
        assert!(chain_transmission(&[0.5, 0.0]).is_err());
        assert!(chain_transmission(&[1.01]).is_err());
    }

    #[test]
    fn default_beam_fluxes() {
        let cat = Catalog::builtin();
        let beam = &cat.beamline;
        let iso = sc();
        assert_relative_eq!(flux_at(beam, &iso, &[]).unwrap().value, 2.2, max_relative = 0.03);
        assert_relative_eq!(flux_at(beam, &iso, &[0.44]).unwrap().value, 1.0, max_relative = 0.03);
        let all = beam.transmissions();
        assert_relative_eq!(flux_at(beam, &iso, &all).unwrap().value, 0.3, max_relative = 0.03);
    }

    #[test]
    fn table_has_one_row_per_element() {
        let cat = Catalog::builtin();
        let report = flux_table(&cat.beamline, &sc()).unwrap();
        assert_eq!(report.rows.len(), cat.beamline.elements.len() + 1);
        assert_eq!(report.rows[1].location, "resonance-detection unit");
        assert_eq!(report.rows.last().unwrap().location, "NFS target");
    }
}
