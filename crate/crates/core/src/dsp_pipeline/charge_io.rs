//! Charge streams: CSV `event,q1,q2` and packed little-endian binary
//! (`u32` event index followed by one `f64` per channel).

use std::io::{Read, Write};

use super::ChargeEvent;
use crate::error::{Error, Result};

pub fn write_charge_csv<W: Write>(out: W, events: &[ChargeEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["event", "q1", "q2"])?;
    for ev in events {
        let q2 = ev.q2.map(|q| q.to_string()).unwrap_or_default();
        w.write_record([ev.event_index.to_string(), ev.q1.to_string(), q2])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_charge_csv<R: Read>(input: R) -> Result<Vec<ChargeEvent>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "event" {
        return Err(Error::Format(format!("unexpected charge CSV header {headers:?}")));
    }
    let parse = |s: &str| -> Result<f64> {
        s.trim().parse().map_err(|_| Error::Format(format!("bad number {s:?}")))
    };
    let mut events = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let event_index = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad event index {:?}", &rec[0])))?;
        let q1 = parse(&rec[1])?;
        let q2 = match rec.get(2).map(str::trim) {
            Some(s) if !s.is_empty() => Some(parse(s)?),
            _ => None,
        };
        events.push(ChargeEvent { event_index, q1, q2 });
    }
    Ok(events)
}

pub fn write_charge_binary<W: Write>(mut out: W, events: &[ChargeEvent], channels: usize) -> Result<()> {
    if !(1..=2).contains(&channels) {
        return Err(Error::Format(format!("unsupported channel count {channels}")));
    }
    for ev in events {
        out.write_all(&ev.event_index.to_le_bytes())?;
        out.write_all(&ev.q1.to_le_bytes())?;
        if channels == 2 {
            let q2 = ev.q2.ok_or_else(|| Error::Format("second channel missing".into()))?;
            out.write_all(&q2.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_charge_binary<R: Read>(mut input: R, channels: usize) -> Result<Vec<ChargeEvent>> {
    let stride = 4 + 8 * channels;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if !(1..=2).contains(&channels) || bytes.len() % stride != 0 {
        return Err(Error::Format(format!(
            "{} bytes is not a whole number of {channels}-channel records",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(stride)
        .map(|c| {
            let f = |i: usize| f64::from_le_bytes(c[i..i + 8].try_into().unwrap());
            ChargeEvent {
                event_index: u32::from_le_bytes(c[0..4].try_into().unwrap()),
                q1: f(4),
                q2: (channels == 2).then(|| f(12)),
            }
        })
        .collect())
}
