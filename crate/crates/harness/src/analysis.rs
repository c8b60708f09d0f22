//! Spectrum reconstruction and photon statistics for simulated or processed
//! event files.

use pnr_core::dsp_pipeline::ChargeEvent;
use pnr_core::quantum_stats::{
    block_statistics, calibrate_ensemble, fidelity_to_poisson, mean, BlockEstimate, Calibration, EventEnsemble,
    StatsReport,
};
use pnr_core::spectra::{
    auto_bin_width, find_peaks_in, fit_multi_gaussian, guesses_from_bins, FitOptions, FitResult, GaussianPeak,
    Histogram, PeakGuess, SpectrumMetrics, VisibilityOptions,
};
use pnr_core::Error;
use serde::{Deserialize, Serialize};

use crate::config::{AnalysisSpec, Product};
use crate::error::Result;
use crate::sim::CountEvent;

/// Bins of the coarse histogram used to locate peaks.
const COARSE_BINS: usize = 4000;
/// Empty coarse bins added beyond the extreme charges.
const EDGE_BINS: f64 = 8.0;
/// Upper bound on bins of the final histogram.
const MAX_BINS: usize = 1 << 21;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub bin_width: Option<f64>,
    pub min_peak_counts: u64,
    pub visibility: VisibilityOptions,
    pub fit: FitOptions,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        (&AnalysisSpec::default()).into()
    }
}

impl From<&AnalysisSpec> for SpectrumOptions {
    fn from(spec: &AnalysisSpec) -> Self {
        Self {
            bin_width: spec.bin_width,
            min_peak_counts: spec.min_peak_counts,
            visibility: VisibilityOptions { half_width: spec.visibility_half_width, ..Default::default() },
            fit: FitOptions::default(),
        }
    }
}

/// A fitted multi-peak charge spectrum.
#[derive(Debug, Clone)]
pub struct SpectrumAnalysis {
    pub hist: Histogram,
    pub fit: FitResult,
    pub metrics: SpectrumMetrics,
    /// Charge per photoelectron from the peak comb.
    pub spacing: f64,
    /// Charge of the zero-photoelectron position of the comb.
    pub offset: f64,
    pub bin_width: f64,
}

impl SpectrumAnalysis {
    pub fn peaks(&self) -> &[GaussianPeak] {
        &self.fit.peaks
    }

    pub fn peak(&self, n: usize) -> Option<&GaussianPeak> {
        self.fit.peaks.iter().find(|p| p.index == n)
    }
}

fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

fn histogram(values: &[f64], lo: f64, hi: f64, width: f64) -> Result<Histogram> {
    let mut h = Histogram::with_width(lo, hi, width)?;
    for &x in values {
        h.fill(x);
    }
    Ok(h)
}

/// Locates the photoelectron comb, fits every populated peak jointly, then
/// rebins at a width resolving the narrowest peak and refits.
///
/// The comb is anchored so that zero charge is the zero-photoelectron peak.
pub fn analyze_spectrum(charges: &[f64], opts: &SpectrumOptions) -> Result<SpectrumAnalysis> {
    let mut q: Vec<f64> = charges.iter().copied().filter(|x| x.is_finite()).collect();
    if q.len() < 2 {
        return Err(Error::Empty("too few finite charges for a spectrum").into());
    }
    q.sort_by(f64::total_cmp);
    let (lo, hi) = (q[0], q[q.len() - 1]);
    if hi <= lo {
        return Err(Error::Undefined("all charges are equal".into()).into());
    }

    let w0 = (hi - lo) / COARSE_BINS as f64;
    // Margins keep a peak at either extreme inside the fit range.
    let (lo, hi) = (lo - EDGE_BINS * w0, hi + EDGE_BINS * w0);
    let coarse = histogram(&q, lo, hi, w0)?;
    let smooth = coarse.smoothed(2);
    let top = smooth.iter().copied().fold(0.0, f64::max);
    let prominence = (3.0 * (top / 5.0).sqrt()).max(5.0);
    let mut bins = find_peaks_in(&smooth, prominence, 3);
    if bins.len() < 2 {
        return Err(Error::Undefined("fewer than two resolved peaks".into()).into());
    }
    let centre = |b: &[usize]| b.iter().map(|&i| coarse.center(i)).collect::<Vec<_>>();
    let s0 = median(centre(&bins).windows(2).map(|w| w[1] - w[0]).collect());
    bins = find_peaks_in(&smooth, prominence, ((0.6 * s0 / w0) as usize).max(3));
    if bins.len() < 2 {
        return Err(Error::Undefined("fewer than two resolved peaks".into()).into());
    }
    let pos = centre(&bins);
    let s0 = median(pos.windows(2).map(|w| w[1] - w[0]).collect());
    let first = (pos[0] / s0).round().max(0.0);
    let idx: Vec<f64> = pos.iter().map(|p| first + ((p - pos[0]) / s0).round()).collect();
    let (offset, spacing) = line_fit(&idx, &pos);
    if !(spacing > 0.0) {
        return Err(Error::Undefined("peak comb has no positive spacing".into()).into());
    }

    let guesses0 = guesses_from_bins(&coarse, &smooth, &bins);
    let var: Vec<f64> = guesses0.iter().map(|g| g.sigma * g.sigma).collect();
    let (mut a, mut b) = if idx.iter().any(|&n| n != idx[0]) { line_fit(&idx, &var) } else { (var[0], 0.0) };
    b = b.max(0.0);
    a = a.max(w0 * w0);

    let window = |c: f64| {
        let l = q.partition_point(|&x| x < c - 0.5 * spacing);
        let r = q.partition_point(|&x| x < c + 0.5 * spacing);
        (r - l) as u64
    };
    let n_max = ((hi - offset) / spacing).floor().max(0.0) as usize + 1;
    let populated: Vec<usize> =
        (0..=n_max).filter(|&n| window(offset + spacing * n as f64) >= opts.min_peak_counts).collect();
    let (Some(&n_lo), Some(&n_hi)) = (populated.first(), populated.last()) else {
        return Err(Error::Undefined("no peak reaches the minimum population".into()).into());
    };
    let guesses: Vec<PeakGuess> = (n_lo..=n_hi)
        .map(|n| {
            let mu = offset + spacing * n as f64;
            PeakGuess {
                mu,
                sigma: (a + b * n as f64).sqrt().min(spacing),
                amplitude: window(mu).max(1) as f64,
            }
        })
        .collect();

    let (first_fit, n_lo) = fit_pruned(&coarse, guesses, n_lo, spacing, opts)?;
    let sigma_min = first_fit.peaks.iter().map(|p| p.sigma).fold(f64::INFINITY, f64::min);
    if sigma_min < w0 && opts.bin_width.is_none() {
        // Peaks inside a single coarse bin: noiseless charges, nothing to refine.
        let mut fit = first_fit;
        for p in &mut fit.peaks {
            p.index += n_lo;
        }
        let metrics = SpectrumMetrics::compute(&coarse, &fit.peaks, &opts.visibility);
        return Ok(SpectrumAnalysis { hist: coarse, fit, metrics, spacing, offset, bin_width: w0 });
    }
    let mut width = opts.bin_width.unwrap_or_else(|| auto_bin_width(sigma_min));
    width = width.max((hi - lo) / MAX_BINS as f64);
    let hist = histogram(&q, lo, hi, width)?;
    let refined: Vec<PeakGuess> =
        first_fit.peaks.iter().map(|p| PeakGuess { mu: p.mu, sigma: p.sigma, amplitude: p.amplitude }).collect();
    let (mut fit, n_lo) = fit_pruned(&hist, refined, n_lo, spacing, opts)?;
    for p in &mut fit.peaks {
        p.index += n_lo;
    }
    let metrics = SpectrumMetrics::compute(&hist, &fit.peaks, &opts.visibility);
    Ok(SpectrumAnalysis { hist, fit, metrics, spacing, offset, bin_width: width })
}

/// Joint fit of the comb. A fit that does not converge is retried without
/// its weaker edge peak. Edge peaks that come out below the population
/// floor, wider than the spacing, or more than twice as wide as their
/// neighbour are then trimmed from the result; they stay in the model so
/// that the tail they absorb does not bias the peaks kept.
fn fit_pruned(
    hist: &Histogram,
    mut guesses: Vec<PeakGuess>,
    mut n_lo: usize,
    spacing: f64,
    opts: &SpectrumOptions,
) -> Result<(FitResult, usize)> {
    let mut fit = loop {
        match fit_multi_gaussian(hist, &guesses, &opts.fit) {
            Ok(f) => break f,
            Err(Error::NotConverged { .. }) if guesses.len() > 2 => {
                if guesses[0].amplitude < guesses[guesses.len() - 1].amplitude {
                    guesses.remove(0);
                    n_lo += 1;
                } else {
                    guesses.pop();
                }
            }
            Err(e) => return Err(e.into()),
        }
    };
    let bad = |p: &GaussianPeak, q: Option<&GaussianPeak>| {
        !(p.amplitude >= opts.min_peak_counts as f64 && p.sigma <= spacing && p.sigma.is_finite())
            || q.is_some_and(|q| p.sigma > 2.0 * q.sigma)
    };
    while fit.peaks.len() > 2 && bad(&fit.peaks[fit.peaks.len() - 1], fit.peaks.get(fit.peaks.len() - 2)) {
        fit.peaks.pop();
    }
    while fit.peaks.len() > 2 && bad(&fit.peaks[0], fit.peaks.get(1)) {
        fit.peaks.remove(0);
        n_lo += 1;
    }
    for (k, p) in fit.peaks.iter_mut().enumerate() {
        p.index = k;
    }
    Ok((fit, n_lo))
}

/// Per-arm summary of a spectrum fit, for the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub arm: usize,
    pub peaks: usize,
    pub first_peak: usize,
    pub bin_width: f64,
    pub spacing: f64,
    pub offset: f64,
    pub chi2: f64,
    pub ndf: usize,
    pub windowed: bool,
}

impl SpectrumSummary {
    fn new(arm: usize, s: &SpectrumAnalysis) -> Self {
        Self {
            arm,
            peaks: s.fit.peaks.len(),
            first_peak: s.fit.peaks.first().map_or(0, |p| p.index),
            bin_width: s.bin_width,
            spacing: s.spacing,
            offset: s.offset,
            chi2: s.fit.chi2,
            ndf: s.fit.ndf,
            windowed: s.fit.windowed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub label: String,
    pub events: usize,
    pub spectra: Vec<SpectrumSummary>,
    pub stats: Option<StatsReport>,
    /// Block estimate of the arm-1 fidelity to Poisson of the same mean.
    pub fidelity: Option<BlockEstimate>,
}

/// Fidelity of each block's counts to Poisson of the block mean.
pub fn poisson_fidelity(ensemble: &EventEnsemble, blocks: usize) -> Result<BlockEstimate> {
    Ok(block_statistics(ensemble, blocks, |a, _| {
        let counts: Vec<u64> = a.iter().map(|x| x.round().max(0.0) as u64).collect();
        fidelity_to_poisson(&counts, mean(a))
    })?)
}

fn finish(label: &str, events: usize, ensemble: &EventEnsemble, spec: &AnalysisSpec, blocks: usize) -> Result<AnalysisReport> {
    let stats = if spec.wants(Product::Stats) { Some(StatsReport::from_ensemble(ensemble, blocks)?) } else { None };
    let fidelity = if spec.wants(Product::Fidelity) { Some(poisson_fidelity(ensemble, blocks)?) } else { None };
    Ok(AnalysisReport { label: label.to_string(), events, spectra: Vec::new(), stats, fidelity })
}

/// Statistics straight from fired-cell counts.
pub fn analyze_counts(label: &str, counts: &[CountEvent], spec: &AnalysisSpec, blocks: usize) -> Result<AnalysisReport> {
    let m1: Vec<u64> = counts.iter().map(|c| c.m1).collect();
    let m2: Option<Vec<u64>> = counts.iter().map(|c| c.m2).collect();
    let ensemble = EventEnsemble::from_counts(label, &m1, m2.as_deref());
    finish(label, counts.len(), &ensemble, spec, blocks)
}

/// Spectra of every arm and, when statistics are requested, the calibrated
/// photoelectron ensemble.
pub fn analyze_charges(
    label: &str,
    charges: &[ChargeEvent],
    spec: &AnalysisSpec,
    blocks: usize,
) -> Result<(AnalysisReport, Vec<SpectrumAnalysis>)> {
    let q1: Vec<f64> = charges.iter().map(|c| c.q1).collect();
    let q2: Option<Vec<f64>> = charges.iter().map(|c| c.q2).collect();
    let needs_fit = spec.wants(Product::Spectrum) || spec.wants(Product::Stats) || spec.wants(Product::Fidelity);
    if !needs_fit {
        return Ok((AnalysisReport { label: label.into(), events: charges.len(), spectra: vec![], stats: None, fidelity: None }, vec![]));
    }
    let opts = SpectrumOptions::from(spec);
    let mut spectra = vec![analyze_spectrum(&q1, &opts)?];
    if let Some(q2) = &q2 {
        spectra.push(analyze_spectrum(q2, &opts)?);
    }
    let cals = spectra
        .iter()
        .map(|s| Calibration::new(s.peaks(), spec.calibration))
        .collect::<Result<Vec<_>, _>>()?;
    let (ensemble, excluded) = calibrate_ensemble(label, &q1, q2.as_deref(), &cals[0], cals.get(1))?;
    let mut report = finish(label, charges.len(), &ensemble, spec, blocks)?;
    if let Some(s) = &mut report.stats {
        s.calibration = Some(spec.calibration);
        s.excluded_fraction = Some(excluded);
    }
    if spec.wants(Product::Spectrum) {
        report.spectra = spectra.iter().enumerate().map(|(k, s)| SpectrumSummary::new(k + 1, s)).collect();
    } else {
        spectra.clear();
    }
    Ok((report, spectra))
}
