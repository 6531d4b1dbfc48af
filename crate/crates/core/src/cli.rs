//! Command-line entry point.
//!
//! Each command prints a JSON document `{"meta": …, "result": …}` and, where
//! it produces tables, writes CSV files atomically with a `.meta.json`
//! sidecar. Exit status: 0 on success, 1 on a domain error, 2 on a usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::analysis::{
    band_rate, conversion_coefficient, lifetime_ensemble, yield_correction, BandRate, EnsembleConfig,
};
use crate::catalog::{Catalog, Endpoint};
use crate::error::{Error, Result};
use crate::events::{
    gate_events, metadata_path, calibrated_run, read_events, simulate_run, write_atomic, write_events, ReferenceCalibration,
    RunConfig, RunMetadata, GENERATOR,
};
use crate::flux::flux_table;
use crate::hyperfine::{broadening_table, quadrupole_levels, transition_span_mhz};
use crate::nfs::{detection_limit_scan, integrate_window, time_spectrum, Line, LineSet, TimeGrid};
use crate::units::{ms_to_s, per_s_to_per_reference, s_to_ms, RATE_REFERENCE_S};

/// Environment variable naming the default catalog file.
pub const CATALOG_ENV: &str = "ISONFS_CATALOG";

#[derive(Debug, Parser, Serialize)]
#[command(name = "isonfs", version, about = "Nuclear forward scattering and isomer decay toolkit")]
struct Cli {
    /// Catalog TOML replacing the built-in tables.
    #[arg(long, global = true, env = CATALOG_ENV)]
    catalog: Option<PathBuf>,
    /// Worker threads for parallel sweeps and simulations (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Seed for stochastic commands.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Write the JSON summary here instead of stdout.
    #[arg(long, global = true)]
    summary: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Spectral flux along the beamline.
    Flux(FluxArgs),
    /// Delayed NFS time spectrum and window integrals.
    Nfs(NfsArgs),
    /// Quadrupole levels and broadening estimates.
    Hyperfine(HyperfineArgs),
    /// Simulate a detector event stream.
    Simulate(SimulateArgs),
    /// Count rate in an energy band and delay window.
    BandRate(BandRateArgs),
    /// Internal-conversion coefficient from band rates.
    AlphaK(AlphaKArgs),
    /// Ensemble lifetime fit of an event file.
    FitLifetime(FitLifetimeArgs),
    /// Largest broadening still detectable above a given SNR.
    DetectLimit(DetectLimitArgs),
    /// Show catalog rows.
    Catalog(CatalogArgs),
}

#[derive(Debug, Args, Serialize)]
struct FluxArgs {
    #[arg(long, default_value = "45Sc")]
    isomer: String,
    /// CSV table of the flux after each element.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct NfsArgs {
    #[arg(long, default_value = "45Sc")]
    isomer: String,
    /// Optical thickness parameter.
    #[arg(long)]
    xi: f64,
    /// Inhomogeneous broadening, Γ₀; a comma-separated list gives one column each.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    dgamma: Vec<f64>,
    /// Thickness over absorption length L/Le.
    #[arg(long, default_value_t = 2.0)]
    le_ratio: f64,
    /// Resonance lines as detuning:weight pairs, detuning in Γ₀.
    #[arg(long, value_delimiter = ',')]
    lines: Vec<String>,
    /// Incident flux, photons/Γ₀/s; defaults to the flux at the NFS target.
    #[arg(long)]
    flux: Option<f64>,
    /// Integration window in ms, as start:end.
    #[arg(long, default_value = "2:100")]
    window: String,
    #[arg(long, default_value_t = 200.0)]
    t_max_ms: f64,
    /// Grid intervals (a power of two).
    #[arg(long, default_value_t = 1 << 18)]
    samples: usize,
    /// Keep every n-th sample in the CSV.
    #[arg(long, default_value_t = 64)]
    stride: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum EndpointArg {
    Lower,
    Upper,
}

impl From<EndpointArg> for Endpoint {
    fn from(e: EndpointArg) -> Self {
        match e {
            EndpointArg::Lower => Endpoint::Lower,
            EndpointArg::Upper => Endpoint::Upper,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct HyperfineArgs {
    #[arg(long, default_value = "45Sc")]
    isomer: String,
    /// Target for the broadening table.
    #[arg(long)]
    target: Option<String>,
    /// Magnetic field, T.
    #[arg(long, default_value_t = 50e-6)]
    field_t: f64,
    #[arg(long, value_enum, default_value = "upper")]
    endpoint: EndpointArg,
    /// Diagonalize a single multiplet: spin such as 7/2.
    #[arg(long, requires = "coupling_mhz")]
    spin: Option<String>,
    /// Quadrupole coupling eQV_zz/h, MHz.
    #[arg(long)]
    coupling_mhz: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// Run configuration TOML; without it the calibrated two-detector run is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Beamtime, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Decay time of the delayed lines, s (calibrated run only).
    #[arg(long)]
    tau: Option<f64>,
    /// Notch as center_ms:width_ms:depth (calibrated run only).
    #[arg(long)]
    notch: Option<String>,
    /// Disable carry-over of decays from earlier macropulses.
    #[arg(long)]
    no_pile_up: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct BandRateArgs {
    #[arg(long)]
    events: PathBuf,
    /// Energy band in keV, lo:hi.
    #[arg(long, default_value = "3.75:4.75")]
    band: String,
    /// Delay window in ms, start:end.
    #[arg(long, default_value = "15:100")]
    window: String,
    /// Live time, s; defaults to the metadata duration.
    #[arg(long)]
    live_time: Option<f64>,
    /// Restrict to these detectors.
    #[arg(long, value_delimiter = ',')]
    detectors: Vec<String>,
    /// SNR against this background, counts/keV/10,000 s.
    #[arg(long)]
    background: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct AlphaKArgs {
    #[arg(long)]
    r4: f64,
    #[arg(long)]
    r12: f64,
    #[arg(long)]
    rb: f64,
    /// Defaults to the Poisson σ for the live time and band widths.
    #[arg(long)]
    sigma_r4: Option<f64>,
    #[arg(long)]
    sigma_r12: Option<f64>,
    #[arg(long, default_value_t = 9e4)]
    live_time: f64,
    #[arg(long, default_value_t = 1.0)]
    band4_kev: f64,
    #[arg(long, default_value_t = 1.0)]
    band12_kev: f64,
    /// Defaults to the catalog value.
    #[arg(long)]
    omega_k: Option<f64>,
    #[arg(long, default_value = "45Sc")]
    isomer: String,
    /// Foil thickness, µm.
    #[arg(long, default_value_t = 25.0)]
    l: f64,
    /// Attenuation length at the K-fluorescence energy, µm.
    #[arg(long, default_value_t = 27.0)]
    l4: f64,
    /// Attenuation length at the resonance energy, µm.
    #[arg(long, default_value_t = 60.0)]
    l12: f64,
}

#[derive(Debug, Args, Serialize)]
struct FitLifetimeArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long, value_delimiter = ',')]
    detectors: Vec<String>,
    /// Energy band in keV, lo:hi; "all" keeps every energy.
    #[arg(long, default_value = "3.75:4.75")]
    band: String,
    /// Float a constant background in each fit.
    #[arg(long)]
    background: bool,
    #[arg(long, default_value_t = 60)]
    histogram_bins: usize,
    /// CSV of the decay-rate histogram.
    #[arg(long)]
    hist_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct DetectLimitArgs {
    #[arg(long, default_value = "45Sc")]
    isomer: String,
    #[arg(long, default_value_t = 2.25)]
    xi: f64,
    #[arg(long, default_value_t = 2.0)]
    le_ratio: f64,
    /// Photons/Γ₀/s; defaults to the flux at the NFS target.
    #[arg(long)]
    flux: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    threshold: f64,
    /// Background, counts/keV/10,000 s; defaults to the detector's.
    #[arg(long)]
    background: Option<f64>,
    /// Energy band the signal is spread over, keV.
    #[arg(long, default_value_t = 1.0)]
    band_kev: f64,
    #[arg(long, default_value = "DNFS")]
    detector: String,
    /// Broadening grid in Γ₀, start:stop:step.
    #[arg(long, default_value = "0:2000:10")]
    grid: String,
}

#[derive(Debug, Args, Serialize)]
struct CatalogArgs {
    #[arg(long)]
    isomer: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    detector: Option<String>,
    /// Print the whole catalog as TOML.
    #[arg(long)]
    dump: bool,
}

/// Parses argv, runs the command and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(()) => 0,
        Err(Error::Precondition(msg)) if msg.starts_with("usage: ") => {
            eprintln!("error: {}", &msg[7..]);
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Precondition(format!("usage: {}", msg.into()))
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [a, b] => match (a.trim().parse(), b.trim().parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => Err(usage(format!("{what} must be two numbers as a:b, got `{text}`"))),
        },
        _ => Err(usage(format!("{what} must be given as a:b, got `{text}`"))),
    }
}

fn parse_ms_window(text: &str) -> Result<(f64, f64)> {
    let (a, b) = parse_pair(text, "window")?;
    Ok((ms_to_s(a), ms_to_s(b)))
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("grid must be start:stop:step, got `{text}`")))?;
    let [start, stop, step] = parts[..] else {
        return Err(usage(format!("grid must be start:stop:step, got `{text}`")));
    };
    if !(step > 0.0) || stop < start {
        return Err(usage("grid needs step > 0 and stop ≥ start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

fn parse_lines(items: &[String]) -> Result<Vec<Line>> {
    items
        .iter()
        .map(|s| {
            let (detuning, weight) = parse_pair(s, "line")?;
            Ok(Line { detuning, weight })
        })
        .collect()
}

fn load_catalog(cli: &Cli) -> Result<Catalog> {
    match &cli.catalog {
        Some(p) => Catalog::load(p),
        None => Ok(Catalog::builtin()),
    }
}

fn config_hash(cli: &Cli, catalog: &Catalog) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&cli.command)?);
    h.update(catalog.to_toml_string().as_bytes());
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn metadata(cli: &Cli, catalog: &Catalog, seed: Option<u64>, generator: Option<&str>) -> Result<RunMetadata> {
    let config = serde_json::to_value(&cli.command)?;
    let command = config["command"].as_str().unwrap_or_default().to_string();
    Ok(RunMetadata {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        seed,
        config_sha256: config_hash(cli, catalog)?,
        generator: generator.map(Into::into),
        config,
    })
}

fn emit(cli: &Cli, meta: &RunMetadata, result: impl Serialize) -> Result<()> {
    let doc = json!({ "meta": meta, "result": result });
    match &cli.summary {
        Some(path) => write_atomic(path, |w| {
            serde_json::to_writer_pretty(&mut *w, &doc)?;
            writeln!(w)?;
            Ok(())
        }),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, &doc)?;
            writeln!(lock)?;
            Ok(())
        }
    }
}

/// CSV with LF endings, `.` decimals and a metadata sidecar.
fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>], meta: &RunMetadata) -> Result<()> {
    write_atomic(path, |w| {
        let mut c = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        c.write_record(header)?;
        for r in rows {
            c.write_record(r)?;
        }
        c.flush()?;
        Ok(())
    })?;
    write_atomic(&metadata_path(path), |w| {
        serde_json::to_writer_pretty(&mut *w, meta)?;
        writeln!(w)?;
        Ok(())
    })
}

fn nfs_target_flux(catalog: &Catalog, isomer: &str) -> Result<f64> {
    let report = flux_table(&catalog.beamline, catalog.isomer(isomer)?)?;
    report
        .rows
        .iter()
        .find(|r| r.location == "NFS target")
        .or(report.rows.last())
        .map(|r| r.flux)
        .ok_or_else(|| Error::Precondition("beamline has no elements".into()))
}

fn execute(cli: &Cli) -> Result<()> {
    let catalog = load_catalog(cli)?;
    match &cli.command {
        Command::Flux(a) => cmd_flux(cli, &catalog, a),
        Command::Nfs(a) => cmd_nfs(cli, &catalog, a),
        Command::Hyperfine(a) => cmd_hyperfine(cli, &catalog, a),
        Command::Simulate(a) => cmd_simulate(cli, &catalog, a),
        Command::BandRate(a) => cmd_band_rate(cli, &catalog, a),
        Command::AlphaK(a) => cmd_alpha_k(cli, &catalog, a),
        Command::FitLifetime(a) => cmd_fit_lifetime(cli, &catalog, a),
        Command::DetectLimit(a) => cmd_detect_limit(cli, &catalog, a),
        Command::Catalog(a) => cmd_catalog(cli, &catalog, a),
    }
}

fn cmd_flux(cli: &Cli, catalog: &Catalog, a: &FluxArgs) -> Result<()> {
    let isomer = catalog.isomer(&a.isomer)?;
    let report = flux_table(&catalog.beamline, isomer)?;
    let meta = metadata(cli, catalog, None, None)?;
    if let Some(out) = &a.out {
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.location.clone(),
                    r.element.clone().unwrap_or_default(),
                    r.transmission.to_string(),
                    r.cumulative_transmission.to_string(),
                    r.flux.to_string(),
                ]
            })
            .collect();
        write_table(
            out,
            &["location", "element", "transmission", "cumulative_transmission", "flux_ph_per_gamma0_per_s"],
            &rows,
            &meta,
        )?;
    }
    emit(cli, &meta, &report)
}

fn cmd_nfs(cli: &Cli, catalog: &Catalog, a: &NfsArgs) -> Result<()> {
    let isomer = catalog.isomer(&a.isomer)?;
    let flux = match a.flux {
        Some(f) => f,
        None => nfs_target_flux(catalog, &a.isomer)?,
    };
    let window = parse_ms_window(&a.window)?;
    let grid = TimeGrid {
        t_max: ms_to_s(a.t_max_ms),
        n_intervals: a.samples,
    };
    let template = if a.lines.is_empty() {
        LineSet::single(a.xi, 0.0, a.le_ratio)?
    } else {
        LineSet::normalized(parse_lines(&a.lines)?, 1.0, a.xi, a.le_ratio)?
    };
    if a.dgamma.is_empty() || a.stride == 0 {
        return Err(usage("need at least one --dgamma value and --stride ≥ 1"));
    }
    let spectra = {
        use rayon::prelude::*;
        a.dgamma
            .par_iter()
            .map(|&dg| time_spectrum(&template.with_dgamma(dg)?, grid, isomer, flux))
            .collect::<Result<Vec<_>>>()?
    };
    let mut integrals = Vec::new();
    for (dg, ts) in a.dgamma.iter().zip(&spectra) {
        let per_s = integrate_window(ts, window.0, window.1)?;
        integrals.push(json!({
            "dgamma_gamma0": dg,
            "method": ts.meta.method,
            "counts_per_pulse_window": per_s / catalog.beamline.rep_rate_hz,
            "rate_ph_per_s": per_s,
            "rate_ph_per_1e4_s": per_s_to_per_reference(per_s),
        }));
    }
    let meta = metadata(cli, catalog, None, None)?;
    if let Some(out) = &a.out {
        let mut header = vec!["t_ms".to_string()];
        header.extend(a.dgamma.iter().map(|dg| format!("rate_ph_per_s_dgamma_{dg}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = (0..spectra[0].t.len())
            .step_by(a.stride)
            .map(|j| {
                let mut r = vec![s_to_ms(spectra[0].t[j]).to_string()];
                r.extend(spectra.iter().map(|s| s.rate[j].to_string()));
                r
            })
            .collect();
        write_table(out, &header, &rows, &meta)?;
    }
    emit(
        cli,
        &meta,
        json!({
            "xi": template.xi(),
            "le_ratio": a.le_ratio,
            "flux_ph_per_gamma0_per_s": flux,
            "window_s": window,
            "integrals": integrals,
        }),
    )
}

fn cmd_hyperfine(cli: &Cli, catalog: &Catalog, a: &HyperfineArgs) -> Result<()> {
    let meta = metadata(cli, catalog, None, None)?;
    if let Some(spin) = &a.spin {
        let spin = spin.parse()?;
        let coupling = a.coupling_mhz.ok_or_else(|| usage("--spin needs --coupling-mhz"))?;
        let levels = quadrupole_levels(spin, coupling, a.eta)?;
        return emit(cli, &meta, json!({ "levels_MHz": levels, "span_MHz": levels.span() }));
    }
    let isomer = catalog.isomer(&a.isomer)?;
    let targets: Vec<_> = match &a.target {
        Some(t) => vec![catalog.target(t)?],
        None => catalog.targets.iter().collect(),
    };
    let mut rows = Vec::new();
    for t in targets {
        let span_mhz = transition_span_mhz(isomer, t, a.endpoint.into()).ok();
        rows.push(json!({
            "target": t.name,
            "quadrupole_span_MHz": span_mhz,
            "quadrupole_span_gamma0": span_mhz.map(|m| m * 1e6 / isomer.gamma0_hz),
            "estimates_gamma0": broadening_table(isomer, t, a.field_t)?,
        }));
    }
    emit(cli, &meta, json!({ "isomer": isomer.name, "field_T": a.field_t, "targets": rows }))
}

fn parse_notch(text: &str) -> Result<crate::events::Notch> {
    let p: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("notch must be center_ms:width_ms:depth, got `{text}`")))?;
    match p[..] {
        [c, w, d] => Ok(crate::events::Notch {
            t_center_s: ms_to_s(c),
            width_s: ms_to_s(w),
            depth: d,
        }),
        _ => Err(usage(format!("notch must be center_ms:width_ms:depth, got `{text}`"))),
    }
}

fn simulate_config(cli: &Cli, catalog: &Catalog, a: &SimulateArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            if a.tau.is_some() || a.notch.is_some() {
                return Err(usage("--tau and --notch apply to the calibrated run only"));
            }
            let text = std::fs::read_to_string(path)?;
            let mut cfg: RunConfig = toml::from_str(&text)
                .map_err(|e| Error::Precondition(format!("{}: {}", path.display(), e.message())))?;
            cfg.seed = cli.seed;
            cfg
        }
        None => {
            let mut cal = ReferenceCalibration::default();
            if let Some(t) = a.tau {
                cal.tau_s = t;
            }
            if let Some(n) = &a.notch {
                cal.notch = Some(parse_notch(n)?);
            }
            calibrated_run(catalog, &cal, cli.seed)?
        }
    };
    if let Some(d) = a.duration {
        cfg.duration_s = d;
    }
    if a.no_pile_up {
        cfg.pile_up = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_simulate(cli: &Cli, catalog: &Catalog, a: &SimulateArgs) -> Result<()> {
    let cfg = simulate_config(cli, catalog, a)?;
    let events = simulate_run(&cfg)?;
    let mut meta = metadata(cli, catalog, Some(cfg.seed), Some(GENERATOR))?;
    meta.config = json!({ "args": meta.config, "run": cfg });
    write_events(&a.out, &events, &meta)?;
    let per_detector: Vec<_> = cfg
        .detectors
        .iter()
        .map(|d| json!({ "detector": d.name, "events": events.iter().filter(|e| e.detector == d.name).count() }))
        .collect();
    emit(
        cli,
        &meta,
        json!({
            "events": events.len(),
            "pulses": cfg.n_pulses(),
            "duration_s": cfg.duration_s,
            "per_detector": per_detector,
            "output": a.out,
        }),
    )
}

/// Live time recorded in an event file's sidecar, if any.
fn sidecar_duration(events: &Path) -> Option<f64> {
    let text = std::fs::read_to_string(metadata_path(events)).ok()?;
    let meta: RunMetadata = serde_json::from_str(&text).ok()?;
    meta.config["run"]["duration_s"].as_f64()
}

fn load_events(path: &Path, detectors: &[String], catalog: &Catalog) -> Result<Vec<crate::events::EventRecord>> {
    let mut events = read_events(path)?;
    if !detectors.is_empty() {
        events.retain(|e| detectors.contains(&e.detector));
        for d in detectors {
            if let Ok(det) = catalog.detector(d) {
                events = gate_events(events, det);
            }
        }
    }
    Ok(events)
}

fn cmd_band_rate(cli: &Cli, catalog: &Catalog, a: &BandRateArgs) -> Result<()> {
    let band = parse_pair(&a.band, "band")?;
    let window = parse_ms_window(&a.window)?;
    let live = match a.live_time.or_else(|| sidecar_duration(&a.events)) {
        Some(l) => l,
        None => return Err(usage("--live-time is required when the event file has no metadata")),
    };
    let events = load_events(&a.events, &a.detectors, catalog)?;
    let r = band_rate(&events, band, window, live)?;
    let snr = a.background.map(|b| crate::analysis::snr(&r, b)).transpose()?;
    let meta = metadata(cli, catalog, None, None)?;
    emit(
        cli,
        &meta,
        json!({
            "rate_counts_per_keV_per_1e4_s": r.rate,
            "sigma_counts_per_keV_per_1e4_s": r.sigma,
            "counts": r.counts().round(),
            "band_keV": r.band,
            "window_s": r.window,
            "live_time_s": r.live_time,
            "snr": snr,
        }),
    )
}

fn cmd_alpha_k(cli: &Cli, catalog: &Catalog, a: &AlphaKArgs) -> Result<()> {
    let omega = match a.omega_k {
        Some(w) => w,
        None => catalog.isomer(&a.isomer)?.omega_k()?,
    };
    let poisson = |rate: f64, width: f64| {
        let norm = width * a.live_time / RATE_REFERENCE_S;
        (rate.max(0.0) * norm).sqrt() / norm
    };
    let r4 = BandRate::measured(
        a.r4,
        a.sigma_r4.unwrap_or_else(|| poisson(a.r4, a.band4_kev)),
        (0.0, a.band4_kev),
        (0.0, 0.0),
        a.live_time,
    );
    let r12 = BandRate::measured(
        a.r12,
        a.sigma_r12.unwrap_or_else(|| poisson(a.r12, a.band12_kev)),
        (0.0, a.band12_kev),
        (0.0, 0.0),
        a.live_time,
    );
    let y4 = yield_correction(a.l4, a.l12, a.l)?;
    let y12 = yield_correction(a.l12, a.l12, a.l)?;
    let c = conversion_coefficient(&r4, &r12, a.rb, omega, y4, y12)?;
    let meta = metadata(cli, catalog, None, None)?;
    emit(
        cli,
        &meta,
        json!({
            "alpha_k": c.alpha_k,
            "sigma": c.sigma,
            "y4": y4,
            "y12": y12,
            "omega_k": omega,
            "sigma_r4": r4.sigma,
            "sigma_r12": r12.sigma,
        }),
    )
}

fn cmd_fit_lifetime(cli: &Cli, catalog: &Catalog, a: &FitLifetimeArgs) -> Result<()> {
    let events = read_events(&a.events)?;
    let band_kev = if a.band == "all" {
        None
    } else {
        Some(parse_pair(&a.band, "band")?)
    };
    let cfg = EnsembleConfig {
        band_kev,
        detectors: a.detectors.clone(),
        background: a.background,
        histogram_bins: a.histogram_bins,
        ..EnsembleConfig::default()
    };
    let r = lifetime_ensemble(&events, &cfg)?;
    let meta = metadata(cli, catalog, None, None)?;
    if let Some(out) = &a.hist_out {
        let rows: Vec<Vec<String>> = r
            .histogram
            .centers()
            .iter()
            .zip(&r.histogram.counts)
            .map(|(c, n)| vec![c.to_string(), n.to_string()])
            .collect();
        write_table(out, &["gamma_center_per_s", "fits"], &rows, &meta)?;
    }
    emit(
        cli,
        &meta,
        json!({
            "fit": r.fit,
            "gaussian": r.gaussian,
            "counts_in_window": r.counts_in_window,
            "histogram_bin_width_per_s": r.histogram.width,
            "binning_shifts": "10 equal subdivisions of one bin width",
            "config": r.config,
        }),
    )
}

fn cmd_detect_limit(cli: &Cli, catalog: &Catalog, a: &DetectLimitArgs) -> Result<()> {
    let isomer = catalog.isomer(&a.isomer)?;
    let mut det = catalog.detector(&a.detector)?.clone();
    if let Some(b) = a.background {
        det.background_rate = b;
    }
    let flux = match a.flux {
        Some(f) => f,
        None => nfs_target_flux(catalog, &a.isomer)?,
    };
    let grid = parse_grid(&a.grid)?;
    let template = LineSet::single(a.xi, 0.0, a.le_ratio)?;
    let lim = detection_limit_scan(&template, isomer, flux, &det, a.band_kev, a.threshold, &grid)?;
    let meta = metadata(cli, catalog, None, None)?;
    emit(
        cli,
        &meta,
        json!({
            "bound_gamma0": lim.bound,
            "flux_ph_per_gamma0_per_s": flux,
            "background_counts_per_keV_per_1e4_s": det.background_rate,
            "probes": lim.probes,
        }),
    )
}

fn cmd_catalog(cli: &Cli, catalog: &Catalog, a: &CatalogArgs) -> Result<()> {
    if a.dump {
        print!("{}", catalog.to_toml_string());
        return Ok(());
    }
    let meta = metadata(cli, catalog, None, None)?;
    let mut out = serde_json::Map::new();
    if let Some(name) = &a.isomer {
        out.insert("isomer".into(), serde_json::to_value(catalog.isomer(name)?)?);
    }
    if let Some(name) = &a.target {
        out.insert("target".into(), serde_json::to_value(catalog.target(name)?)?);
    }
    if let Some(name) = &a.detector {
        out.insert("detector".into(), serde_json::to_value(catalog.detector(name)?)?);
    }
    if out.is_empty() {
        out.insert(
            "isomers".into(),
            json!(catalog.isomers.iter().map(|i| &i.name).collect::<Vec<_>>()),
        );
        out.insert(
            "targets".into(),
            json!(catalog.targets.iter().map(|t| &t.name).collect::<Vec<_>>()),
        );
        out.insert(
            "detectors".into(),
            json!(catalog.detectors.iter().map(|d| &d.name).collect::<Vec<_>>()),
        );
    }
    emit(cli, &meta, out)
}
