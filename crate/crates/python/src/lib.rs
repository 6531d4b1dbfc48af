//! Python bindings: thin wrappers returning plain floats, lists and dicts.

use isonfs::analysis::{self, BandRate, EnsembleConfig, FitOptions};
use isonfs::catalog::{Catalog, Endpoint, Spin};
use isonfs::events::{self, EventRecord, ReferenceCalibration};
use isonfs::nfs::{self, LineSet, TimeGrid};
use isonfs::{flux, hyperfine, Error};
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: Error) -> PyErr {
    match e {
        Error::Unknown { .. } | Error::AbsentData { .. } => PyKeyError::new_err(e.to_string()),
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::NonConvergence { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn catalog(path: Option<&str>) -> PyResult<Catalog> {
    match path {
        Some(p) => Catalog::load(p).map_err(err),
        None => Ok(Catalog::builtin()),
    }
}

type Event = (u64, String, f64, f64);

fn to_records(events: Vec<Event>) -> Vec<EventRecord> {
    events
        .into_iter()
        .map(|(pulse_id, detector, t, e_kev)| EventRecord {
            pulse_id,
            detector,
            t,
            e_kev,
        })
        .collect()
}

/// Flux table of the beamline: list of (location, photons/Γ₀/s).
#[pyfunction]
#[pyo3(signature = (isomer = "45Sc", catalog_path = None))]
fn flux_table(isomer: &str, catalog_path: Option<&str>) -> PyResult<Vec<(String, f64)>> {
    let cat = catalog(catalog_path)?;
    let report = flux::flux_table(&cat.beamline, cat.isomer(isomer).map_err(err)?).map_err(err)?;
    Ok(report.rows.into_iter().map(|r| (r.location, r.flux)).collect())
}

/// Single-line NFS rate in photons/s at delay `t` (s).
#[pyfunction]
#[pyo3(signature = (t, xi, dgamma = 0.0, le_ratio = 2.0, flux = 1.0, thin = false))]
fn nfs_rate(t: f64, xi: f64, dgamma: f64, le_ratio: f64, flux: f64, thin: bool) -> PyResult<f64> {
    let cat = Catalog::builtin();
    let iso = cat.isomer("45Sc").map_err(err)?;
    let ls = LineSet::single(xi, dgamma, le_ratio).map_err(err)?;
    if thin {
        nfs::thin_target_rate(t, &ls, iso, flux).map_err(err)
    } else {
        nfs::exact_rate(t, &ls, iso, flux).map_err(err)
    }
}

/// Delayed-count spectrum (t in s, rate in photons/s). Multi-line sets go
/// through the Fourier propagation.
#[pyfunction]
#[pyo3(signature = (xi, dgamma = 0.0, le_ratio = 2.0, flux = 1.0, lines = None, t_max = 0.2, samples = 1 << 16))]
fn time_spectrum(
    xi: f64,
    dgamma: f64,
    le_ratio: f64,
    flux: f64,
    lines: Option<Vec<(f64, f64)>>,
    t_max: f64,
    samples: usize,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let cat = Catalog::builtin();
    let iso = cat.isomer("45Sc").map_err(err)?;
    let ls = match lines {
        Some(l) => {
            let l = l
                .into_iter()
                .map(|(detuning, weight)| nfs::Line { detuning, weight })
                .collect();
            LineSet::normalized(l, 1.0, xi, le_ratio).and_then(|ls| ls.with_dgamma(dgamma))
        }
        None => LineSet::single(xi, dgamma, le_ratio),
    }
    .map_err(err)?;
    let grid = TimeGrid {
        t_max,
        n_intervals: samples,
    };
    let ts = nfs::time_spectrum(&ls, grid, iso, flux).map_err(err)?;
    Ok((ts.t, ts.rate))
}

/// Window integral of the single-line rate, photons per 10,000 s.
#[pyfunction]
#[pyo3(signature = (xi, dgamma, window = (0.002, 0.1), le_ratio = 2.0, flux = 0.3))]
fn window_integral(xi: f64, dgamma: f64, window: (f64, f64), le_ratio: f64, flux: f64) -> PyResult<f64> {
    let cat = Catalog::builtin();
    let iso = cat.isomer("45Sc").map_err(err)?;
    let ls = LineSet::single(xi, 0.0, le_ratio).map_err(err)?;
    let r = nfs::window_integrals(&ls, &[dgamma], window, TimeGrid::DEFAULT, iso, flux).map_err(err)?;
    Ok(isonfs::units::per_s_to_per_reference(r[0].integral))
}

/// Quadrupole sublevels in MHz for a spin such as "7/2".
#[pyfunction]
#[pyo3(signature = (spin, coupling_mhz, eta = 0.0))]
fn quadrupole_levels(spin: &str, coupling_mhz: f64, eta: f64) -> PyResult<Vec<f64>> {
    let spin: Spin = spin.parse().map_err(err)?;
    Ok(hyperfine::quadrupole_levels(spin, coupling_mhz, eta).map_err(err)?.energies)
}

/// Transition span of a catalog target in Γ₀.
#[pyfunction]
#[pyo3(signature = (target, upper = true))]
fn transition_span(target: &str, upper: bool) -> PyResult<f64> {
    let cat = Catalog::builtin();
    let iso = cat.isomer("45Sc").map_err(err)?;
    let t = cat.target(target).map_err(err)?;
    let end = if upper { Endpoint::Upper } else { Endpoint::Lower };
    let mhz = hyperfine::transition_span_mhz(iso, t, end).map_err(err)?;
    Ok(isonfs::units::mhz_to_hz(mhz) / iso.gamma0_hz)
}

#[pyfunction]
fn yield_correction(le_um: f64, l12_um: f64, l_um: f64) -> PyResult<f64> {
    analysis::yield_correction(le_um, l12_um, l_um).map_err(err)
}

/// (α_K, σ) from band rates in counts/keV/10,000 s.
#[pyfunction]
#[pyo3(signature = (r4, sigma_r4, r12, sigma_r12, rb, omega_k = 0.19, l = 25.0, l4 = 27.0, l12 = 60.0))]
#[allow(clippy::too_many_arguments)]
fn conversion_coefficient(
    r4: f64,
    sigma_r4: f64,
    r12: f64,
    sigma_r12: f64,
    rb: f64,
    omega_k: f64,
    l: f64,
    l4: f64,
    l12: f64,
) -> PyResult<(f64, f64)> {
    let y4 = analysis::yield_correction(l4, l12, l).map_err(err)?;
    let y12 = analysis::yield_correction(l12, l12, l).map_err(err)?;
    let w = (0.0, 0.0);
    let c = analysis::conversion_coefficient(
        &BandRate::measured(r4, sigma_r4, (0.0, 1.0), w, 1.0),
        &BandRate::measured(r12, sigma_r12, (0.0, 1.0), w, 1.0),
        rb,
        omega_k,
        y4,
        y12,
    )
    .map_err(err)?;
    Ok((c.alpha_k, c.sigma))
}

#[pyfunction]
fn snr(signal: f64, background: f64) -> PyResult<f64> {
    analysis::snr(&BandRate::exact(signal, (0.0, 1.0), (0.0, 0.0)), background).map_err(err)
}

/// Calibrated two-detector run as (pulse_id, detector, t [s], E [keV]) tuples.
#[pyfunction]
#[pyo3(signature = (seed, duration_s = None, tau_s = None, pile_up = true))]
fn simulate(py: Python<'_>, seed: u64, duration_s: Option<f64>, tau_s: Option<f64>, pile_up: bool) -> PyResult<Vec<Event>> {
    let mut cal = ReferenceCalibration {
        pile_up,
        ..Default::default()
    };
    if let Some(d) = duration_s {
        cal.duration_s = d;
    }
    if let Some(t) = tau_s {
        cal.tau_s = t;
    }
    let cfg = events::calibrated_run(&Catalog::builtin(), &cal, seed).map_err(err)?;
    let ev = py.detach(|| events::simulate_run(&cfg)).map_err(err)?;
    Ok(ev.into_iter().map(|e| (e.pulse_id, e.detector, e.t, e.e_kev)).collect())
}

/// Rate in counts/keV/10,000 s for a band (keV) and window (s).
#[pyfunction]
fn band_rate(events: Vec<Event>, band: (f64, f64), window: (f64, f64), live_time: f64) -> PyResult<(f64, f64)> {
    let r = analysis::band_rate(&to_records(events), band, window, live_time).map_err(err)?;
    Ok((r.rate, r.sigma))
}

/// Poisson maximum-likelihood fit of counts ~ A e^{−γt} [+ b].
#[pyfunction]
#[pyo3(signature = (t, counts, background = false))]
fn fit_exponential<'py>(py: Python<'py>, t: Vec<f64>, counts: Vec<f64>, background: bool) -> PyResult<Bound<'py, PyDict>> {
    let f = analysis::fit_exponential(&t, &counts, FitOptions { background }).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("gamma", f.gamma)?;
    d.set_item("gamma_sigma", f.gamma_sigma)?;
    d.set_item("amplitude", f.amplitude)?;
    d.set_item("background", f.background)?;
    d.set_item("iterations", f.iterations)?;
    Ok(d)
}

/// Ensemble lifetime fit over the default window/binning grid.
#[pyfunction]
#[pyo3(signature = (events, band = Some((3.75, 4.75))))]
fn fit_lifetime<'py>(py: Python<'py>, events: Vec<Event>, band: Option<(f64, f64)>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = EnsembleConfig {
        band_kev: band,
        ..Default::default()
    };
    let records = to_records(events);
    let r = py.detach(|| analysis::lifetime_ensemble(&records, &cfg)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("gamma", r.fit.gamma)?;
    d.set_item("gamma_sigma", r.fit.gamma_sigma)?;
    d.set_item("tau", r.fit.tau)?;
    d.set_item("tau_interval", (r.fit.tau_interval.low, r.fit.tau_interval.high))?;
    d.set_item("n_fits", r.fit.n_fits)?;
    d.set_item("n_failed", r.fit.n_failed)?;
    d.set_item("counts_in_window", r.counts_in_window)?;
    Ok(d)
}

#[pymodule]
fn isonfs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(flux_table, m)?)?;
    m.add_function(wrap_pyfunction!(nfs_rate, m)?)?;
    m.add_function(wrap_pyfunction!(time_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(window_integral, m)?)?;
    m.add_function(wrap_pyfunction!(quadrupole_levels, m)?)?;
    m.add_function(wrap_pyfunction!(transition_span, m)?)?;
    m.add_function(wrap_pyfunction!(yield_correction, m)?)?;
    m.add_function(wrap_pyfunction!(conversion_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(snr, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(band_rate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponential, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lifetime, m)?)?;
    Ok(())
}
