use serde::{Deserialize, Serialize};

use super::{GaussianPeak, Histogram};
use crate::error::{domain, Result};
use crate::special::normal_cdf;

/// Full width at half maximum of a Gaussian in units of sigma.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FomPoint {
    /// Lower peak of the pair (n, n + 1).
    pub n: usize,
    pub fom: f64,
    pub fom_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPoint {
    pub n: usize,
    pub delta: f64,
    pub delta_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    /// Fraction of the two-peak area in the crossed tails.
    pub total: f64,
    /// Misassignment probability of a single peak.
    pub per_peak: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityPoint {
    pub n: usize,
    pub v: f64,
    pub v_err: f64,
    pub max: f64,
    pub min: f64,
    /// The outer search window was clipped by the histogram range.
    pub truncated: bool,
    /// No bin fell below the half-peak threshold; `min` is the interval minimum.
    pub unresolved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityOptions {
    /// The peak value averages `2 * half_width + 1` bins around the fitted centre.
    pub half_width: usize,
    /// Valley bins are those below this fraction of the peak value.
    pub threshold: f64,
}

impl Default for VisibilityOptions {
    fn default() -> Self {
        Self { half_width: 3, threshold: 0.5 }
    }
}

/// All resolution metrics of one fitted spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMetrics {
    pub visibility: Vec<VisibilityPoint>,
    pub fom: Vec<FomPoint>,
    pub delta_pp: Vec<DeltaPoint>,
}

impl SpectrumMetrics {
    pub fn compute(hist: &Histogram, peaks: &[GaussianPeak], opts: &VisibilityOptions) -> Self {
        Self { visibility: visibility(hist, peaks, opts), fom: fom(peaks), delta_pp: delta_pp(peaks) }
    }
}

fn sorted(peaks: &[GaussianPeak]) -> Vec<GaussianPeak> {
    let mut p = peaks.to_vec();
    p.sort_by_key(|p| p.index);
    p
}

/// Peak separation over the summed FWHM of each adjacent pair.
pub fn fom(peaks: &[GaussianPeak]) -> Vec<FomPoint> {
    sorted(peaks)
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let d = b.mu - a.mu;
            let s = FWHM_PER_SIGMA * (a.sigma + b.sigma);
            let f = d / s;
            let var_mu = a.mu_err.powi(2) + b.mu_err.powi(2);
            let var_sigma = a.sigma_err.powi(2) + b.sigma_err.powi(2);
            let err = (var_mu / (s * s) + (f / (a.sigma + b.sigma)).powi(2) * var_sigma).sqrt();
            FomPoint { n: a.index, fom: f, fom_err: err }
        })
        .collect()
}

/// Peak-to-peak distance of each adjacent pair.
pub fn delta_pp(peaks: &[GaussianPeak]) -> Vec<DeltaPoint> {
    sorted(peaks)
        .windows(2)
        .map(|w| DeltaPoint {
            n: w[0].index,
            delta: w[1].mu - w[0].mu,
            delta_err: w[0].mu_err.hypot(w[1].mu_err),
        })
        .collect()
}

/// Tail overlap of two equal-width unit-area Gaussians at a given FoM.
pub fn overlap_from_fom(fom: f64) -> Result<Overlap> {
    if !(fom >= 0.0) || !fom.is_finite() {
        return Err(domain(format!("FoM must be finite and >= 0, got {fom}")));
    }
    let per_peak = normal_cdf(-FWHM_PER_SIGMA * fom);
    Ok(Overlap { total: 2.0 * per_peak, per_peak })
}

fn mean_counts(counts: &[u64], lo: usize, hi: usize) -> (f64, f64) {
    let sum: u64 = counts[lo..hi].iter().sum();
    let k = (hi - lo) as f64;
    (sum as f64 / k, (sum.max(1) as f64).sqrt() / k)
}

/// Peak-to-valley visibility of each fitted peak on the histogram grid.
///
/// The peak value is the mean of the bins around the fitted centre. The
/// valley value is the mean of the bins below the threshold on both sides,
/// searching between the neighbouring peaks; beyond the outermost peaks the
/// window spans one inter-peak distance.
pub fn visibility(hist: &Histogram, peaks: &[GaussianPeak], opts: &VisibilityOptions) -> Vec<VisibilityPoint> {
    let mut peaks = peaks.to_vec();
    peaks.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    let counts = hist.counts();
    let nb = counts.len() as isize;
    let centres: Vec<Option<usize>> = peaks.iter().map(|p| hist.bin_of(p.mu)).collect();
    let mut out = Vec::new();
    for (k, p) in peaks.iter().enumerate() {
        let Some(b) = centres[k] else { continue };
        let lo = b.saturating_sub(opts.half_width);
        let hi = (b + opts.half_width + 1).min(counts.len());
        let (max, max_err) = mean_counts(counts, lo, hi);

        let prev = k.checked_sub(1).and_then(|j| centres[j]);
        let next = centres.get(k + 1).copied().flatten();
        let fallback_span = (3.0 * p.sigma / hist.width(b)).ceil().max(2.0) as isize;
        let span_left = prev.map(|q| b as isize - q as isize).or(next.map(|q| q as isize - b as isize));
        let span_right = next.map(|q| q as isize - b as isize).or(prev.map(|q| b as isize - q as isize));
        let left_start = b as isize - span_left.unwrap_or(fallback_span) + 1;
        let right_end = b as isize + span_right.unwrap_or(fallback_span);
        let truncated = left_start < 0 || right_end > nb;
        let left = left_start.max(0) as usize..b;
        let right = b + 1..(right_end.clamp(0, nb) as usize);

        let valley: Vec<usize> =
            left.clone().chain(right.clone()).filter(|&i| (counts[i] as f64) < opts.threshold * max).collect();
        let (min, min_err, unresolved) = if valley.is_empty() {
            match left.chain(right).min_by_key(|&i| counts[i]) {
                Some(i) => (counts[i] as f64, (counts[i].max(1) as f64).sqrt(), true),
                None => continue,
            }
        } else {
            let sum: u64 = valley.iter().map(|&i| counts[i]).sum();
            let k = valley.len() as f64;
            (sum as f64 / k, (sum.max(1) as f64).sqrt() / k, false)
        };
        // A peak no higher than its surroundings has no contrast.
        let min = min.min(max);
        let s = max + min;
        if s <= 0.0 {
            continue;
        }
        let v = (max - min) / s;
        let v_err = (2.0 / (s * s)) * ((min * max_err).powi(2) + (max * min_err).powi(2)).sqrt();
        out.push(VisibilityPoint { n: p.index, v, v_err, max, min, truncated, unresolved });
    }
    out
}
