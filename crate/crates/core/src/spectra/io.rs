use std::collections::BTreeMap;
use std::io::Write;

use super::{DeltaPoint, FomPoint, GaussianPeak, Histogram, VisibilityPoint, FWHM_PER_SIGMA};
use crate::error::Result;
use crate::special::normal_cdf;

pub fn write_histogram_csv<W: Write>(w: W, hist: &Histogram) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bin_low", "bin_high", "count"])?;
    for (i, c) in hist.counts().iter().enumerate() {
        out.serialize((hist.edges()[i], hist.edges()[i + 1], c))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_peaks_csv<W: Write>(w: W, peaks: &[GaussianPeak]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "mu", "mu_err", "sigma", "sigma_err", "amplitude"])?;
    for p in peaks {
        out.serialize((p.index, p.mu, p.mu_err, p.sigma, p.sigma_err, p.amplitude))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Default)]
struct Row {
    v: Option<(f64, f64)>,
    fom: Option<(f64, f64)>,
    delta: Option<(f64, f64)>,
}

/// One row per peak index. Pair quantities sit on the lower peak of the pair.
pub fn write_metrics_csv<W: Write>(
    w: W,
    visibility: &[VisibilityPoint],
    fom: &[FomPoint],
    delta: &[DeltaPoint],
) -> Result<()> {
    let mut rows: BTreeMap<usize, Row> = BTreeMap::new();
    for p in visibility {
        rows.entry(p.n).or_default().v = Some((p.v, p.v_err));
    }
    for p in fom {
        rows.entry(p.n).or_default().fom = Some((p.fom, p.fom_err));
    }
    for p in delta {
        rows.entry(p.n).or_default().delta = Some((p.delta, p.delta_err));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "n",
        "visibility",
        "visibility_err",
        "fom",
        "fom_err",
        "overlap_per_peak",
        "delta_pp",
        "delta_pp_err",
    ])?;
    for (n, r) in rows {
        let overlap = r.fom.map(|(f, _)| normal_cdf(-FWHM_PER_SIGMA * f.max(0.0)));
        out.serialize((
            n,
            r.v.map(|x| x.0),
            r.v.map(|x| x.1),
            r.fom.map(|x| x.0),
            r.fom.map(|x| x.1),
            overlap,
            r.delta.map(|x| x.0),
            r.delta.map(|x| x.1),
        ))?;
    }
    out.flush()?;
    Ok(())
}
