use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EventRecord;
use crate::error::{Error, Result};
use crate::units::{ms_to_s, s_to_ms};

/// RNG description recorded with every simulated run.
pub const GENERATOR: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64(seed), stream = macropulse index";

const HEADER: [&str; 4] = ["pulse_id", "detector", "t_ms", "E_keV"];

/// Provenance written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub generator: Option<String>,
    pub config: serde_json::Value,
}

/// Writes the event CSV: t in ms with µs precision, E in keV with 1 eV precision.
pub fn write_events_to<W: Write>(writer: W, events: &[EventRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(HEADER)?;
    for e in events {
        w.write_record([
            e.pulse_id.to_string(),
            e.detector.clone(),
            format!("{:.3}", s_to_ms(e.t)),
            format!("{:.3}", e.e_kev),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar path for an output file: `<file>.meta.json`.
pub fn metadata_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Writes `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Writes the event CSV and its metadata sidecar, both atomically.
pub fn write_events(path: &Path, events: &[EventRecord], meta: &RunMetadata) -> Result<()> {
    write_atomic(path, |w| write_events_to(w, events))?;
    write_atomic(&metadata_path(path), |w| {
        serde_json::to_writer_pretty(&mut *w, meta)?;
        writeln!(w)?;
        Ok(())
    })
}

#[derive(Deserialize)]
struct Row {
    pulse_id: u64,
    detector: String,
    t_ms: f64,
    #[serde(rename = "E_keV")]
    e_kev: f64,
}

pub fn read_events(path: &Path) -> Result<Vec<EventRecord>> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Precondition(format!(
            "{} does not have the event header {}",
            path.display(),
            HEADER.join(",")
        )));
    }
    r.deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok(EventRecord {
                pulse_id: row.pulse_id,
                detector: row.detector,
                t: ms_to_s(row.t_ms),
                e_kev: row.e_kev,
            })
        })
        .collect()
}
