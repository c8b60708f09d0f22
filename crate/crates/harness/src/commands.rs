//! The operations behind each CLI subcommand.

use std::path::{Path, PathBuf};

use pnr_core::dsp_pipeline::{process_event, process_pair, ChargeEvent, PipelineConfig};
use pnr_core::sipm_model::{read_pnrw, write_pnrw, Waveform};

use crate::analysis::{analyze_charges, analyze_counts, AnalysisReport};
use crate::config::{AnalysisSpec, Mode, RunConfig};
use crate::error::{HarnessError, Result};
use crate::output::{create_dir, read_event_file, write_analysis, write_charges, write_counts_csv, write_file, EventFile};
use crate::sim::simulate;

/// Simulates into `dir`: `counts.csv` always, plus `channelK.pnrw` per arm in
/// full-waveform mode. Returns the files written.
pub fn run_simulate(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let out = simulate(cfg, cfg.mode == Mode::FullWaveform)?;
    create_dir(dir)?;
    let counts = dir.join("counts.csv");
    write_file(&counts, |w| write_counts_csv(w, &out.counts))?;
    let mut files = vec![counts];
    for (k, records) in out.waveforms.iter().enumerate() {
        let p = dir.join(format!("channel{}.pnrw", k + 1));
        write_pnrw(&p, records).map_err(|e| match e {
            pnr_core::Error::Io(source) => HarnessError::io(&p, source),
            other => other.into(),
        })?;
        files.push(p);
    }
    Ok(files)
}

fn load_records(path: &Path) -> Result<Vec<Waveform>> {
    read_pnrw(path).map(|(_, r)| r).map_err(|e| match e {
        pnr_core::Error::Io(source) => HarnessError::io(path, source),
        other => other.into(),
    })
}

/// Charges of one or two PNRW channel files; with two channels the first
/// one's trigger gates both. Records without a trigger are skipped.
pub fn process_files(inputs: &[PathBuf], pipeline: &PipelineConfig) -> Result<Vec<ChargeEvent>> {
    pipeline.validate()?;
    let channels = inputs.iter().map(|p| load_records(p)).collect::<Result<Vec<_>>>()?;
    match channels.as_slice() {
        [one] => Ok(one
            .iter()
            .enumerate()
            .map(|(i, wf)| Ok(process_event(wf, pipeline)?.map(|q1| ChargeEvent { event_index: i as u32, q1, q2: None })))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect()),
        [a, b] => {
            if a.len() != b.len() {
                return Err(HarnessError::config(format!("channel files hold {} and {} records", a.len(), b.len())));
            }
            Ok(a.iter()
                .zip(b)
                .enumerate()
                .map(|(i, (w1, w2))| process_pair(i as u32, w1, w2, pipeline))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .flatten()
                .collect())
        }
        _ => Err(HarnessError::config(format!("need one or two waveform files, got {}", inputs.len()))),
    }
}

pub fn run_process(inputs: &[PathBuf], pipeline: &PipelineConfig, out: &Path) -> Result<usize> {
    let charges = process_files(inputs, pipeline)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_charges(out, &charges)?;
    Ok(charges.len())
}

/// Analyses a counts or charges file into `dir`.
pub fn run_analyze(input: &Path, spec: &AnalysisSpec, blocks: usize, dir: &Path) -> Result<AnalysisReport> {
    let label = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let (report, spectra) = match read_event_file(input)? {
        EventFile::Counts(c) => (analyze_counts(&label, &c, spec, blocks)?, Vec::new()),
        EventFile::Charges(c) => analyze_charges(&label, &c, spec, blocks)?,
    };
    write_analysis(dir, &report, &spectra)?;
    Ok(report)
}
