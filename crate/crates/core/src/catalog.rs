//! Isomer, target, beamline and detector data.
//!
//! A catalog is a TOML document with `[[isomer]]`, `[[target]]`,
//! `[beamline]` (with `[[beamline.element]]`) and `[[detector]]` tables.
//! The built-in catalog is compiled into the binary; see
//! `data/default_catalog.toml` for the full key list.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

const DEFAULT_CATALOG: &str = include_str!("../data/default_catalog.toml");
const DERIVED_TOLERANCE: f64 = 1e-6;

/// Nuclear spin stored as twice its value so half-integers stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin(u32);

impl Spin {
    pub fn from_twice(twice: u32) -> Self {
        Spin(twice)
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// Number of magnetic substates, 2I + 1.
    pub fn multiplicity(self) -> usize {
        self.0 as usize + 1
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl FromStr for Spin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invariant("spin", format!("`{s}` is not an integer or half-integer"));
        if let Some(num) = s.strip_suffix("/2") {
            let n: u32 = num.trim().parse().map_err(|_| bad())?;
            if n % 2 == 0 {
                return Err(bad());
            }
            return Ok(Spin(n));
        }
        let v: f64 = s.parse().map_err(|_| bad())?;
        let twice = 2.0 * v;
        if v < 0.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(bad());
        }
        Ok(Spin(twice.round() as u32))
    }
}

impl Serialize for Spin {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Spin {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Natural-resonance constants of one isomer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsomerSpec {
    pub name: String,
    /// Transition energy, eV.
    pub e0_ev: f64,
    /// Natural lifetime, s.
    pub tau0_s: f64,
    pub gamma0_ev: f64,
    pub gamma0_hz: f64,
    pub q0: f64,
    pub ground_spin: Option<Spin>,
    pub excited_spin: Option<Spin>,
    pub alpha_k: Option<f64>,
    pub omega_k: Option<f64>,
    /// Q_e / Q_g.
    pub quadrupole_ratio: Option<f64>,
    /// Ground- and excited-state magnetic moments, nuclear magnetons.
    pub mu_g: Option<f64>,
    pub mu_e: Option<f64>,
}

impl IsomerSpec {
    pub fn new(name: impl Into<String>, e0_kev: f64, tau0_s: f64) -> Result<Self> {
        if !(e0_kev > 0.0 && e0_kev.is_finite()) {
            return Err(Error::invariant("E0_keV", "must be positive"));
        }
        if !(tau0_s > 0.0 && tau0_s.is_finite()) {
            return Err(Error::invariant("tau0_s", "must be positive"));
        }
        let e0_ev = units::kev_to_ev(e0_kev);
        let gamma0_ev = units::width_ev_from_lifetime(tau0_s);
        Ok(IsomerSpec {
            name: name.into(),
            e0_ev,
            tau0_s,
            gamma0_ev,
            gamma0_hz: units::ev_to_hz(gamma0_ev),
            q0: e0_ev / gamma0_ev,
            ground_spin: None,
            excited_spin: None,
            alpha_k: None,
            omega_k: None,
            quadrupole_ratio: None,
            mu_g: None,
            mu_e: None,
        })
    }

    pub fn e0_kev(&self) -> f64 {
        units::ev_to_kev(self.e0_ev)
    }

    fn require<T: Copy>(&self, v: Option<T>, what: &str) -> Result<T> {
        v.ok_or_else(|| Error::AbsentData {
            name: self.name.clone(),
            what: what.to_string(),
        })
    }

    pub fn spins(&self) -> Result<(Spin, Spin)> {
        Ok((
            self.require(self.ground_spin, "Ig")?,
            self.require(self.excited_spin, "Ie")?,
        ))
    }

    pub fn omega_k(&self) -> Result<f64> {
        self.require(self.omega_k, "omegaK")
    }

    pub fn quadrupole_ratio(&self) -> Result<f64> {
        self.require(self.quadrupole_ratio, "Qratio")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Magnetism {
    Diamagnetic,
    Paramagnetic,
}

/// A tabulated quantity that may be quoted as a range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Interval { low: v, high: v }
    }

    pub fn at(&self, end: Endpoint) -> f64 {
        match end {
            Endpoint::Lower => self.low,
            Endpoint::Upper => self.high,
        }
    }
}

/// Which end of a tabulated range to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Endpoint {
    Lower,
    /// Largest coupling, i.e. worst-case splitting.
    #[default]
    Upper,
}

/// Quadrupole data at one endpoint of the tabulated ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrupoleCoupling {
    /// e Q_g V_zz / h, MHz.
    pub coupling_mhz: f64,
    pub eta: f64,
}

/// Crystal target data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetSpec {
    pub name: String,
    /// Photoelectric absorption length, µm.
    pub le_um: f64,
    /// Resonant-nucleus number density, cm⁻³.
    pub n0_per_cm3: f64,
    /// Crystal thickness, µm.
    pub thickness_um: Option<f64>,
    pub xi: Option<f64>,
    /// Optical thickness at L = 2 Le.
    pub xi_star: Option<f64>,
    pub coupling_mhz: Option<Interval>,
    pub eta: Option<Interval>,
    pub magnetism: Magnetism,
    /// Nearest resonant-neighbour distance, Å.
    pub r_nn_angstrom: Option<f64>,
}

impl TargetSpec {
    /// Quadrupole coupling and asymmetry at the chosen end of the ranges.
    pub fn quadrupole(&self, end: Endpoint) -> Result<QuadrupoleCoupling> {
        let absent = |what: &str| Error::AbsentData {
            name: self.name.clone(),
            what: what.to_string(),
        };
        let c = self.coupling_mhz.ok_or_else(|| absent("eQgVzz_MHz"))?;
        let eta = self.eta.ok_or_else(|| absent("eta"))?;
        Ok(QuadrupoleCoupling {
            coupling_mhz: c.at(end),
            eta: eta.at(end),
        })
    }

    /// L / Le, when a thickness is tabulated.
    pub fn le_ratio(&self) -> Option<f64> {
        self.thickness_um.map(|l| l / self.le_um)
    }
}

/// Resonant cross-section σ_R in cm² inverted from the optical thickness.
///
/// Uses ξ = σ N0 L / 4 when both ξ and L are tabulated, otherwise the
/// optimized value ξ* = σ N0 Le / 2.
pub fn sigma_resonant(target: &TargetSpec) -> Result<f64> {
    if let (Some(xi), Some(l)) = (target.xi, target.thickness_um) {
        sigma_from_thickness(xi, target.n0_per_cm3, l)
    } else if let Some(xs) = target.xi_star {
        sigma_from_optimized(xs, target.n0_per_cm3, target.le_um)
    } else {
        Err(Error::AbsentData {
            name: target.name.clone(),
            what: "xi or xi_star".into(),
        })
    }
}

/// σ_R = 4ξ / (N0 L), L in µm.
pub fn sigma_from_thickness(xi: f64, n0_per_cm3: f64, l_um: f64) -> Result<f64> {
    if xi < 0.0 || n0_per_cm3 <= 0.0 || l_um <= 0.0 {
        return Err(Error::Precondition(
            "xi must be non-negative, N0 and L positive".into(),
        ));
    }
    Ok(4.0 * xi / (n0_per_cm3 * units::um_to_cm(l_um)))
}

/// σ_R = 2ξ* / (N0 Le), Le in µm.
pub fn sigma_from_optimized(xi_star: f64, n0_per_cm3: f64, le_um: f64) -> Result<f64> {
    if xi_star < 0.0 || n0_per_cm3 <= 0.0 || le_um <= 0.0 {
        return Err(Error::Precondition(
            "xi* must be non-negative, N0 and Le positive".into(),
        ));
    }
    Ok(2.0 * xi_star / (n0_per_cm3 * units::um_to_cm(le_um)))
}

/// One optical element of the beamline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamlineElement {
    pub name: String,
    #[serde(rename = "T")]
    pub transmission: f64,
    /// Label of the location reached after this element, if it is a named point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamlineSpec {
    /// Pulse energy, mJ.
    #[serde(rename = "Ep_mJ")]
    pub pulse_energy_mj: f64,
    /// SASE background share of the pulse energy, mJ.
    #[serde(rename = "Ebg_mJ")]
    pub background_energy_mj: f64,
    /// Bandwidth, eV.
    #[serde(rename = "dEp_eV")]
    pub bandwidth_ev: f64,
    #[serde(rename = "np")]
    pub pulses_per_train: u32,
    pub pulse_spacing_s: f64,
    pub train_duration_s: f64,
    #[serde(rename = "rep_rate_Hz")]
    pub rep_rate_hz: f64,
    #[serde(rename = "element", default)]
    pub elements: Vec<BeamlineElement>,
}

impl BeamlineSpec {
    pub fn validate(&self) -> Result<()> {
        for e in &self.elements {
            if !(e.transmission > 0.0 && e.transmission <= 1.0) {
                return Err(Error::invariant(
                    format!("beamline.element[{}].T", e.name),
                    format!("transmission {} is outside (0, 1]", e.transmission),
                ));
            }
        }
        if self.pulses_per_train < 1 {
            return Err(Error::invariant("beamline.np", "need at least one pulse"));
        }
        if !(self.background_energy_mj >= 0.0) {
            return Err(Error::invariant("beamline.Ebg_mJ", "must be non-negative"));
        }
        if !(self.pulse_energy_mj > self.background_energy_mj) {
            return Err(Error::invariant(
                "beamline.Ep_mJ",
                "pulse energy must exceed the SASE background",
            ));
        }
        if !(self.bandwidth_ev > 0.0) {
            return Err(Error::invariant("beamline.dEp_eV", "must be positive"));
        }
        if !(self.rep_rate_hz > 0.0) {
            return Err(Error::invariant("beamline.rep_rate_Hz", "must be positive"));
        }
        Ok(())
    }

    pub fn transmissions(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.transmission).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub name: String,
    /// Gaussian energy-resolution standard deviation, eV.
    #[serde(rename = "energy_sigma_eV")]
    pub energy_sigma_ev: f64,
    /// counts / keV / 10,000 s.
    pub background_rate: f64,
    pub gate_open_s: f64,
    pub gate_close_s: f64,
    /// (low, high), keV.
    #[serde(rename = "energy_range_keV")]
    pub energy_range_kev: (f64, f64),
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        let f = |k: &str| format!("detector[{}].{k}", self.name);
        if !(self.energy_sigma_ev > 0.0) {
            return Err(Error::invariant(f("energy_sigma_eV"), "must be positive"));
        }
        if !(self.gate_open_s < self.gate_close_s) {
            return Err(Error::invariant(f("gate_open_s"), "gate must open before it closes"));
        }
        if !(self.background_rate >= 0.0) {
            return Err(Error::invariant(f("background_rate"), "must be non-negative"));
        }
        if !(self.energy_range_kev.0 < self.energy_range_kev.1) {
            return Err(Error::invariant(f("energy_range_keV"), "range is empty"));
        }
        Ok(())
    }

    pub fn gate_contains(&self, t: f64) -> bool {
        self.gate_open_s <= t && t <= self.gate_close_s
    }

    pub fn energy_contains(&self, e_kev: f64) -> bool {
        self.energy_range_kev.0 <= e_kev && e_kev <= self.energy_range_kev.1
    }
}

/// Everything loaded from one catalog file.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub isomers: Vec<IsomerSpec>,
    pub targets: Vec<TargetSpec>,
    pub beamline: BeamlineSpec,
    pub detectors: Vec<DetectorModel>,
}

impl Catalog {
    pub fn builtin() -> Self {
        Self::from_toml_str(DEFAULT_CATALOG).expect("embedded catalog is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: CatalogFile = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_col(text, s.start))
                .unwrap_or((0, 0));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        file.into_catalog()
    }

    pub fn to_toml_string(&self) -> String {
        let file = CatalogFile::from_catalog(self);
        toml::to_string(&file).expect("catalog serializes")
    }

    pub fn isomer(&self, name: &str) -> Result<&IsomerSpec> {
        self.isomers
            .iter()
            .find(|i| i.name == name)
            .ok_or_else(|| Error::Unknown {
                kind: "isomer",
                name: name.into(),
            })
    }

    pub fn target(&self, name: &str) -> Result<&TargetSpec> {
        self.targets
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Unknown {
                kind: "target",
                name: name.into(),
            })
    }

    pub fn detector(&self, name: &str) -> Result<&DetectorModel> {
        self.detectors
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| Error::Unknown {
                kind: "detector",
                name: name.into(),
            })
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

// ---- file representation ----

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    #[serde(rename = "isomer", default)]
    isomers: Vec<IsomerRecord>,
    #[serde(rename = "target", default)]
    targets: Vec<TargetRecord>,
    beamline: BeamlineSpec,
    #[serde(rename = "detector", default)]
    detectors: Vec<DetectorModel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IsomerRecord {
    name: String,
    #[serde(rename = "E0_keV")]
    e0_kev: f64,
    tau0_s: f64,
    #[serde(rename = "Gamma0_eV", default, skip_serializing_if = "Option::is_none")]
    gamma0_ev: Option<f64>,
    #[serde(rename = "Gamma0_Hz", default, skip_serializing_if = "Option::is_none")]
    gamma0_hz: Option<f64>,
    #[serde(rename = "Q0", default, skip_serializing_if = "Option::is_none")]
    q0: Option<f64>,
    #[serde(rename = "Ig", default, skip_serializing_if = "Option::is_none")]
    ig: Option<Spin>,
    #[serde(rename = "Ie", default, skip_serializing_if = "Option::is_none")]
    ie: Option<Spin>,
    #[serde(rename = "alphaK", default, skip_serializing_if = "Option::is_none")]
    alpha_k: Option<f64>,
    #[serde(rename = "omegaK", default, skip_serializing_if = "Option::is_none")]
    omega_k: Option<f64>,
    #[serde(rename = "Qratio", default, skip_serializing_if = "Option::is_none")]
    q_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu_e: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum RangeRecord {
    Scalar(f64),
    Pair([f64; 2]),
}

impl From<RangeRecord> for Interval {
    fn from(r: RangeRecord) -> Self {
        match r {
            RangeRecord::Scalar(v) => Interval::point(v),
            RangeRecord::Pair([a, b]) => Interval { low: a, high: b },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetRecord {
    name: String,
    #[serde(rename = "Le_um")]
    le_um: f64,
    #[serde(rename = "N0_per_cm3")]
    n0_per_cm3: f64,
    #[serde(rename = "L_um", default, skip_serializing_if = "Option::is_none")]
    l_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xi_star: Option<f64>,
    #[serde(rename = "eQgVzz_MHz", default, skip_serializing_if = "Option::is_none")]
    coupling: Option<RangeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<RangeRecord>,
    magnetism: Magnetism,
    #[serde(rename = "r_nn_A", default, skip_serializing_if = "Option::is_none")]
    r_nn: Option<f64>,
}

fn check_derived(field: String, given: Option<f64>, computed: f64) -> Result<()> {
    if let Some(g) = given {
        if ((g - computed) / computed).abs() > DERIVED_TOLERANCE {
            return Err(Error::invariant(
                field,
                format!("given {g:e} but the lifetime implies {computed:e}"),
            ));
        }
    }
    Ok(())
}

impl IsomerRecord {
    fn into_spec(self) -> Result<IsomerSpec> {
        let ctx = |k: &str| format!("isomer[{}].{k}", self.name);
        let mut spec = IsomerSpec::new(self.name.clone(), self.e0_kev, self.tau0_s)
            .map_err(|_| Error::invariant(ctx("E0_keV/tau0_s"), "must be positive"))?;
        check_derived(ctx("Gamma0_eV"), self.gamma0_ev, spec.gamma0_ev)?;
        check_derived(ctx("Gamma0_Hz"), self.gamma0_hz, spec.gamma0_hz)?;
        check_derived(ctx("Q0"), self.q0, spec.q0)?;
        if let Some(w) = self.omega_k {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::invariant(ctx("omegaK"), "a yield must lie in [0, 1]"));
            }
        }
        if let Some(a) = self.alpha_k {
            if a < 0.0 {
                return Err(Error::invariant(ctx("alphaK"), "must be non-negative"));
            }
        }
        spec.ground_spin = self.ig;
        spec.excited_spin = self.ie;
        spec.alpha_k = self.alpha_k;
        spec.omega_k = self.omega_k;
        spec.quadrupole_ratio = self.q_ratio;
        spec.mu_g = self.mu_g;
        spec.mu_e = self.mu_e;
        Ok(spec)
    }

    fn from_spec(s: &IsomerSpec) -> Self {
        IsomerRecord {
            name: s.name.clone(),
            e0_kev: s.e0_kev(),
            tau0_s: s.tau0_s,
            gamma0_ev: Some(s.gamma0_ev),
            gamma0_hz: Some(s.gamma0_hz),
            q0: Some(s.q0),
            ig: s.ground_spin,
            ie: s.excited_spin,
            alpha_k: s.alpha_k,
            omega_k: s.omega_k,
            q_ratio: s.quadrupole_ratio,
            mu_g: s.mu_g,
            mu_e: s.mu_e,
        }
    }
}

impl TargetRecord {
    fn into_spec(self) -> Result<TargetSpec> {
        let ctx = |k: &str| format!("target[{}].{k}", self.name);
        if !(self.le_um > 0.0) {
            return Err(Error::invariant(ctx("Le_um"), "must be positive"));
        }
        if !(self.n0_per_cm3 > 0.0) {
            return Err(Error::invariant(ctx("N0_per_cm3"), "must be positive"));
        }
        if let Some(l) = self.l_um {
            if !(l > 0.0) {
                return Err(Error::invariant(ctx("L_um"), "must be positive"));
            }
        }
        for (k, v) in [("xi", self.xi), ("xi_star", self.xi_star)] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    return Err(Error::invariant(ctx(k), "must be non-negative"));
                }
            }
        }
        let eta = self.eta.map(Interval::from);
        if let Some(e) = eta {
            for v in [e.low, e.high] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invariant(ctx("eta"), format!("{v} is outside [0, 1]")));
                }
            }
        }
        Ok(TargetSpec {
            name: self.name,
            le_um: self.le_um,
            n0_per_cm3: self.n0_per_cm3,
            thickness_um: self.l_um,
            xi: self.xi,
            xi_star: self.xi_star,
            coupling_mhz: self.coupling.map(Interval::from),
            eta,
            magnetism: self.magnetism,
            r_nn_angstrom: self.r_nn,
        })
    }

    fn from_spec(t: &TargetSpec) -> Self {
        let range = |i: Interval| RangeRecord::Pair([i.low, i.high]);
        TargetRecord {
            name: t.name.clone(),
            le_um: t.le_um,
            n0_per_cm3: t.n0_per_cm3,
            l_um: t.thickness_um,
            xi: t.xi,
            xi_star: t.xi_star,
            coupling: t.coupling_mhz.map(range),
            eta: t.eta.map(range),
            magnetism: t.magnetism,
            r_nn: t.r_nn_angstrom,
        }
    }
}

impl CatalogFile {
    fn into_catalog(self) -> Result<Catalog> {
        let isomers = self
            .isomers
            .into_iter()
            .map(IsomerRecord::into_spec)
            .collect::<Result<Vec<_>>>()?;
        let targets = self
            .targets
            .into_iter()
            .map(TargetRecord::into_spec)
            .collect::<Result<Vec<_>>>()?;
        self.beamline.validate()?;
        for d in &self.detectors {
            d.validate()?;
        }
        Ok(Catalog {
            isomers,
            targets,
            beamline: self.beamline,
            detectors: self.detectors,
        })
    }

    fn from_catalog(c: &Catalog) -> Self {
        CatalogFile {
            isomers: c.isomers.iter().map(IsomerRecord::from_spec).collect(),
            targets: c.targets.iter().map(TargetRecord::from_spec).collect(),
            beamline: c.beamline.clone(),
            detectors: c.detectors.clone(),
        }
    }
}
