//! PNRW waveform container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "PNRW" | version u16 | sample_period_ns f64 | record_len u32 | n_records u32 | trigger_index u32
//! n_records × record_len × i16
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Waveform;
use crate::error::{Error, Result};

pub const PNRW_MAGIC: [u8; 4] = *b"PNRW";
pub const PNRW_VERSION: u16 = 1;
const HEADER_LEN: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnrwHeader {
    pub version: u16,
    pub sample_period_ns: f64,
    pub record_len: u32,
    pub n_records: u32,
    pub trigger_index: u32,
}

impl PnrwHeader {
    pub fn new(record_len: u32, n_records: u32, trigger_index: u32) -> Self {
        Self { version: PNRW_VERSION, sample_period_ns: 1.0, record_len, n_records, trigger_index }
    }

    fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&PNRW_MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6..14].copy_from_slice(&self.sample_period_ns.to_le_bytes());
        b[14..18].copy_from_slice(&self.record_len.to_le_bytes());
        b[18..22].copy_from_slice(&self.n_records.to_le_bytes());
        b[22..26].copy_from_slice(&self.trigger_index.to_le_bytes());
        b
    }

    fn from_bytes(b: &[u8; HEADER_LEN]) -> Result<Self> {
        if b[0..4] != PNRW_MAGIC {
            return Err(Error::Format("missing PNRW magic".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        let header = Self {
            version: u16::from_le_bytes([b[4], b[5]]),
            sample_period_ns: f64::from_le_bytes(b[6..14].try_into().unwrap()),
            record_len: u32_at(14),
            n_records: u32_at(18),
            trigger_index: u32_at(22),
        };
        if header.version != PNRW_VERSION {
            return Err(Error::Format(format!("unsupported PNRW version {}", header.version)));
        }
        if header.trigger_index >= header.record_len && header.record_len > 0 {
            return Err(Error::Format("trigger index outside record".into()));
        }
        Ok(header)
    }
}

/// Streaming writer; the record count is fixed by the header.
pub struct PnrwWriter<W: Write> {
    inner: W,
    header: PnrwHeader,
    written: u32,
}

impl<W: Write> PnrwWriter<W> {
    pub fn new(mut inner: W, header: PnrwHeader) -> Result<Self> {
        inner.write_all(&header.to_bytes())?;
        Ok(Self { inner, header, written: 0 })
    }

    pub fn write_record(&mut self, wf: &Waveform) -> Result<()> {
        if wf.samples.len() != self.header.record_len as usize {
            return Err(Error::Format(format!(
                "record has {} samples, header says {}",
                wf.samples.len(),
                self.header.record_len
            )));
        }
        if self.written == self.header.n_records {
            return Err(Error::Format("more records than declared in header".into()));
        }
        let mut buf = Vec::with_capacity(wf.samples.len() * 2);
        for s in &wf.samples {
            buf.extend_from_slice(&s.to_le_bytes());
        }
        self.inner.write_all(&buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.n_records {
            return Err(Error::Format(format!(
                "declared {} records, wrote {}",
                self.header.n_records, self.written
            )));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streaming reader yielding one [`Waveform`] per record.
pub struct PnrwReader<R: Read> {
    inner: R,
    header: PnrwHeader,
    read: u32,
}

impl<R: Read> PnrwReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut b = [0u8; HEADER_LEN];
        inner.read_exact(&mut b)?;
        let header = PnrwHeader::from_bytes(&b)?;
        Ok(Self { inner, header, read: 0 })
    }

    pub fn header(&self) -> &PnrwHeader {
        &self.header
    }
}

impl<R: Read> Iterator for PnrwReader<R> {
    type Item = Result<Waveform>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.read == self.header.n_records {
            return None;
        }
        let mut buf = vec![0u8; self.header.record_len as usize * 2];
        if let Err(e) = self.inner.read_exact(&mut buf) {
            self.read = self.header.n_records;
            return Some(Err(Error::Format(format!("truncated record: {e}"))));
        }
        self.read += 1;
        let samples = buf.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
        Some(Ok(Waveform { samples, trigger_index: self.header.trigger_index }))
    }
}

pub fn write_pnrw(path: &Path, records: &[Waveform]) -> Result<()> {
    let (record_len, trigger) = records
        .first()
        .map(|w| (w.samples.len() as u32, w.trigger_index))
        .unwrap_or((0, 0));
    if records.iter().any(|w| w.trigger_index != trigger) {
        return Err(Error::Format("records disagree on trigger index".into()));
    }
    let header = PnrwHeader::new(record_len, records.len() as u32, trigger);
    let mut writer = PnrwWriter::new(BufWriter::new(File::create(path)?), header)?;
    for wf in records {
        writer.write_record(wf)?;
    }
    writer.finish()?;
    Ok(())
}

pub fn read_pnrw(path: &Path) -> Result<(PnrwHeader, Vec<Waveform>)> {
    let reader = PnrwReader::new(BufReader::new(File::open(path)?))?;
    let header = *reader.header();
    let records = reader.collect::<Result<Vec<_>>>()?;
    Ok((header, records))
}
