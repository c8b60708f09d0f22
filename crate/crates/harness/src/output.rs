//! Event-file and report writers.
//!
//! Fired-cell counts are CSV `event,m1,m2` (empty `m2` for one arm); charges
//! follow the pipeline's `event,q1,q2` layout. Reports are pretty-printed JSON.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use pnr_core::dsp_pipeline::{read_charge_csv, write_charge_binary, write_charge_csv};
use pnr_core::dsp_pipeline::ChargeEvent;
use pnr_core::spectra::{write_histogram_csv, write_metrics_csv, write_peaks_csv};
use serde::Serialize;

use crate::analysis::{AnalysisReport, SpectrumAnalysis};
use crate::error::{HarnessError, Result};
use crate::sim::CountEvent;

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| HarnessError::io(path, e))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| HarnessError::io(path, e))
}

/// Runs a writer against a fresh file, attributing failures to `path`.
pub fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)
            .map_err(|source| HarnessError::Json { path: path.to_path_buf(), source })?;
        w.write_all(b"\n").map_err(|e| HarnessError::io(path, e))
    })
}

pub fn write_counts_csv<W: Write>(w: W, counts: &[CountEvent]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["event", "m1", "m2"]).map_err(pnr_core::Error::from)?;
    for c in counts {
        out.serialize((c.event, c.m1, c.m2)).map_err(pnr_core::Error::from)?;
    }
    out.flush().map_err(pnr_core::Error::from)?;
    Ok(())
}

/// Contents of an event file, recognised by its header.
#[derive(Debug, Clone, PartialEq)]
pub enum EventFile {
    Counts(Vec<CountEvent>),
    Charges(Vec<ChargeEvent>),
}

fn format_err(msg: impl Into<String>) -> HarnessError {
    pnr_core::Error::Format(msg.into()).into()
}

pub fn read_event_file(path: &Path) -> Result<EventFile> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).map_err(|e| HarnessError::io(path, e))?;
    let header = text.lines().next().unwrap_or_default().trim();
    if header.starts_with("event,q1") {
        return Ok(EventFile::Charges(read_charge_csv(text.as_bytes())?));
    }
    if !header.starts_with("event,m1") {
        return Err(format_err(format!("{}: unrecognised event header {header:?}", path.display())));
    }
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut counts = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(pnr_core::Error::from)?;
        let int = |s: &str| s.trim().parse::<u64>().map_err(|_| format_err(format!("bad count {s:?}")));
        let m2 = match rec.get(2).map(str::trim) {
            Some(s) if !s.is_empty() => Some(int(s)?),
            _ => None,
        };
        counts.push(CountEvent { event: int(&rec[0])?, m1: int(&rec[1])?, m2 });
    }
    Ok(EventFile::Counts(counts))
}

/// Charge stream as CSV, or packed binary when the path ends in `.bin`.
pub fn write_charges(path: &Path, charges: &[ChargeEvent]) -> Result<()> {
    if path.extension().is_some_and(|e| e == "bin") {
        let channels = if charges.first().is_some_and(|c| c.q2.is_some()) { 2 } else { 1 };
        write_file(path, |w| Ok(write_charge_binary(w, charges, channels)?))
    } else {
        write_file(path, |w| Ok(write_charge_csv(w, charges)?))
    }
}

/// Writes `report.json` and, per fitted arm, `histogram_armK.csv`,
/// `peaks_armK.csv` and `metrics_armK.csv`. Returns the files written.
pub fn write_analysis(dir: &Path, report: &AnalysisReport, spectra: &[SpectrumAnalysis]) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut files = Vec::new();
    for (k, s) in spectra.iter().enumerate() {
        let arm = k + 1;
        let p = dir.join(format!("histogram_arm{arm}.csv"));
        write_file(&p, |w| Ok(write_histogram_csv(w, &s.hist)?))?;
        files.push(p);
        let p = dir.join(format!("peaks_arm{arm}.csv"));
        write_file(&p, |w| Ok(write_peaks_csv(w, s.peaks())?))?;
        files.push(p);
        let p = dir.join(format!("metrics_arm{arm}.csv"));
        let m = &s.metrics;
        write_file(&p, |w| Ok(write_metrics_csv(w, &m.visibility, &m.fom, &m.delta_pp)?))?;
        files.push(p);
    }
    let p = dir.join("report.json");
    write_json(&p, report)?;
    files.push(p);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let counts = vec![CountEvent { event: 0, m1: 3, m2: Some(1) }, CountEvent { event: 1, m1: 0, m2: Some(7) }];
        write_file(&p, |w| write_counts_csv(w, &counts)).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "event,m1,m2\n0,3,1\n1,0,7\n");
        assert_eq!(read_event_file(&p).unwrap(), EventFile::Counts(counts));
    }

    #[test]
    fn unknown_header_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert_eq!(read_event_file(&p).unwrap_err().exit_code(), 3);
        assert_eq!(read_event_file(&dir.path().join("missing.csv")).unwrap_err().exit_code(), 3);
    }
}
