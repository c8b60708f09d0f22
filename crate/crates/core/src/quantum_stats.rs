//! Ensemble estimators: Fano factor, correlation coefficient, noise
//! reduction factor, fidelity, block errors and charge calibration.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, undefined, Error, Result};
use crate::photon_sources::pmf_poisson;
use crate::spectra::GaussianPeak;

/// Probability below which a Poisson tail is treated as empty.
pub const SUPPORT_CUTOFF: f64 = 1e-12;

/// Allowed deviation of a distribution's sum from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased (n - 1) sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn need_two(n: usize) -> Result<()> {
    if n < 2 {
        return Err(undefined(format!("need at least 2 samples, got {n}")));
    }
    Ok(())
}

fn check_pairs(m1: &[f64], m2: &[f64]) -> Result<()> {
    if m1.len() != m2.len() {
        return Err(config(format!("arm lengths differ: {} vs {}", m1.len(), m2.len())));
    }
    need_two(m1.len())
}

/// Variance over mean.
pub fn fano(samples: &[f64]) -> Result<f64> {
    need_two(samples.len())?;
    let m = mean(samples);
    if m == 0.0 {
        return Err(undefined("Fano factor of a zero-mean sample"));
    }
    Ok(variance(samples) / m)
}

/// Pearson correlation coefficient of the two arms.
pub fn correlation(m1: &[f64], m2: &[f64]) -> Result<f64> {
    check_pairs(m1, m2)?;
    let (v1, v2) = (variance(m1), variance(m2));
    if v1 == 0.0 || v2 == 0.0 {
        return Err(undefined("correlation with a zero-variance arm"));
    }
    Ok((covariance(m1, m2) / (v1 * v2).sqrt()).clamp(-1.0, 1.0))
}

/// Variance of the arm difference over the summed means.
pub fn noise_reduction(m1: &[f64], m2: &[f64]) -> Result<f64> {
    check_pairs(m1, m2)?;
    let s = mean(m1) + mean(m2);
    if s == 0.0 {
        return Err(undefined("noise reduction factor with zero total mean"));
    }
    let diff: Vec<f64> = m1.iter().zip(m2).map(|(a, b)| a - b).collect();
    Ok(variance(&diff) / s)
}

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(domain(format!("{name} has negative or non-finite entries")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(domain(format!("{name} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Bhattacharyya overlap of two distributions over a common support; the
/// shorter one is padded with zeros.
pub fn fidelity(p_exp: &[f64], p_th: &[f64]) -> Result<f64> {
    check_distribution(p_exp, "experimental distribution")?;
    check_distribution(p_th, "theoretical distribution")?;
    let f: f64 = p_exp.iter().zip(p_th).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(f.min(1.0))
}

/// First count above the mean at which the Poisson pmf falls below the cutoff.
pub fn poisson_support(mean: f64) -> Result<usize> {
    let mut k = mean.ceil() as u64;
    while pmf_poisson(mean, k)? >= SUPPORT_CUTOFF {
        k += 1;
    }
    Ok(k as usize)
}

/// Relative frequencies of non-negative integer counts.
pub fn empirical_pmf(counts: &[u64]) -> Result<Vec<f64>> {
    let max = *counts.iter().max().ok_or(Error::Empty("no counts"))?;
    let mut p = vec![0.0; max as usize + 1];
    for &c in counts {
        p[c as usize] += 1.0;
    }
    let n = counts.len() as f64;
    p.iter_mut().for_each(|x| *x /= n);
    Ok(p)
}

/// Fidelity of an empirical count distribution to Poisson(`mean`).
pub fn fidelity_to_poisson(counts: &[u64], mean: f64) -> Result<f64> {
    let p_exp = empirical_pmf(counts)?;
    let support = poisson_support(mean)?.max(p_exp.len() - 1);
    let p_th = (0..=support as u64).map(|k| pmf_poisson(mean, k)).collect::<Result<Vec<_>>>()?;
    fidelity(&p_exp, &p_th)
}

/// Per-event values of one or two arms, in photon or photoelectron units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEnsemble {
    pub label: String,
    pub arm1: Vec<f64>,
    pub arm2: Option<Vec<f64>>,
}

impl EventEnsemble {
    pub fn single(label: impl Into<String>, arm1: Vec<f64>) -> Self {
        Self { label: label.into(), arm1, arm2: None }
    }

    pub fn paired(label: impl Into<String>, arm1: Vec<f64>, arm2: Vec<f64>) -> Result<Self> {
        if arm1.len() != arm2.len() {
            return Err(config("paired arms must have equal length"));
        }
        Ok(Self { label: label.into(), arm1, arm2: Some(arm2) })
    }

    pub fn from_counts(label: impl Into<String>, arm1: &[u64], arm2: Option<&[u64]>) -> Self {
        let f = |v: &[u64]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
        Self { label: label.into(), arm1: f(arm1), arm2: arm2.map(f) }
    }

    pub fn len(&self) -> usize {
        self.arm1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arm1.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimate {
    /// Mean of the per-block estimates.
    pub value: f64,
    /// Standard error of that mean.
    pub error: f64,
    pub blocks: usize,
    /// Trailing events that did not fill a block.
    pub dropped: usize,
}

/// Applies `estimator` to `n_blocks` equal consecutive blocks.
pub fn block_statistics<F>(ensemble: &EventEnsemble, n_blocks: usize, estimator: F) -> Result<BlockEstimate>
where
    F: Fn(&[f64], Option<&[f64]>) -> Result<f64>,
{
    if n_blocks < 2 {
        return Err(config(format!("need at least 2 blocks, got {n_blocks}")));
    }
    let size = ensemble.len() / n_blocks;
    if size < 2 {
        return Err(undefined(format!("{} events cannot fill {n_blocks} blocks", ensemble.len())));
    }
    let estimates = (0..n_blocks)
        .map(|b| {
            let r = b * size..(b + 1) * size;
            estimator(&ensemble.arm1[r.clone()], ensemble.arm2.as_ref().map(|a| &a[r]))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BlockEstimate {
        value: mean(&estimates),
        error: (variance(&estimates) / n_blocks as f64).sqrt(),
        blocks: n_blocks,
        dropped: ensemble.len() - size * n_blocks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseClass {
    Sub,
    Poissonian,
    Super,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub label: String,
    pub mean: f64,
    pub variance: f64,
    pub fano: BlockEstimate,
    pub class: NoiseClass,
}

/// Mean and variance of arm 1 of each ensemble, classified by whether the
/// Fano factor differs from 1 by more than three block errors.
pub fn variance_vs_mean(ensembles: &[EventEnsemble], n_blocks: usize) -> Result<Vec<VariancePoint>> {
    ensembles
        .iter()
        .map(|e| {
            need_two(e.len())?;
            let f = block_statistics(e, n_blocks, |a, _| fano(a))?;
            let class = if (f.value - 1.0).abs() <= 3.0 * f.error {
                NoiseClass::Poissonian
            } else if f.value < 1.0 {
                NoiseClass::Sub
            } else {
                NoiseClass::Super
            };
            Ok(VariancePoint { label: e.label.clone(), mean: mean(&e.arm1), variance: variance(&e.arm1), fano: f, class })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    /// Each charge becomes the index of the nearest fitted peak.
    NearestPeak,
    /// Charges are offset by the zero peak and divided by the fitted gain.
    GainNormalized,
}

/// Charge-to-photoelectron map built from fitted peaks.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    method: CalibrationMethod,
    indices: Vec<usize>,
    centres: Vec<f64>,
    lower: f64,
    upper: f64,
    offset: f64,
    gain: f64,
}

impl Calibration {
    /// Requires at least two peaks. Charges more than half a spacing beyond
    /// the outermost peaks are unclassified.
    pub fn new(peaks: &[GaussianPeak], method: CalibrationMethod) -> Result<Self> {
        if peaks.len() < 2 {
            return Err(undefined("calibration needs at least two fitted peaks"));
        }
        let mut p = peaks.to_vec();
        p.sort_by(|a, b| a.mu.total_cmp(&b.mu));
        let k = p.len();
        let lower = p[0].mu - 0.5 * (p[1].mu - p[0].mu);
        let upper = p[k - 1].mu + 0.5 * (p[k - 1].mu - p[k - 2].mu);

        // Straight line mu = offset + gain * n, weighted by the fit errors.
        let w: Vec<f64> = p.iter().map(|q| 1.0 / q.mu_err.max(1e-12).powi(2)).collect();
        let sw: f64 = w.iter().sum();
        let xn = |q: &GaussianPeak| q.index as f64;
        let mx = p.iter().zip(&w).map(|(q, w)| w * xn(q)).sum::<f64>() / sw;
        let my = p.iter().zip(&w).map(|(q, w)| w * q.mu).sum::<f64>() / sw;
        let sxy: f64 = p.iter().zip(&w).map(|(q, w)| w * (xn(q) - mx) * (q.mu - my)).sum();
        let sxx: f64 = p.iter().zip(&w).map(|(q, w)| w * (xn(q) - mx).powi(2)).sum();
        let gain = sxy / sxx;
        if !(gain > 0.0) {
            return Err(undefined("fitted peaks do not increase with index"));
        }
        Ok(Self {
            method,
            indices: p.iter().map(|q| q.index).collect(),
            centres: p.iter().map(|q| q.mu).collect(),
            lower,
            upper,
            offset: my - gain * mx,
            gain,
        })
    }

    pub fn method(&self) -> CalibrationMethod {
        self.method
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Photoelectron value of a charge, or None when it is unclassified.
    pub fn apply(&self, q: f64) -> Option<f64> {
        if !(q >= self.lower && q <= self.upper) {
            return None;
        }
        Some(match self.method {
            CalibrationMethod::NearestPeak => {
                let i = self.centres.partition_point(|&c| c < q);
                let nearest = if i == 0 {
                    0
                } else if i == self.centres.len() || q - self.centres[i - 1] <= self.centres[i] - q {
                    i - 1
                } else {
                    i
                };
                self.indices[nearest] as f64
            }
            CalibrationMethod::GainNormalized => (q - self.offset) / self.gain,
        })
    }
}

/// Calibrates charges into an ensemble, dropping events with any arm
/// unclassified. Returns the ensemble and the dropped fraction.
pub fn calibrate_ensemble(
    label: impl Into<String>,
    q1: &[f64],
    q2: Option<&[f64]>,
    cal1: &Calibration,
    cal2: Option<&Calibration>,
) -> Result<(EventEnsemble, f64)> {
    if q1.is_empty() {
        return Err(Error::Empty("no charges to calibrate"));
    }
    let mut arm1 = Vec::with_capacity(q1.len());
    let mut arm2 = q2.map(|_| Vec::with_capacity(q1.len()));
    for (i, &a) in q1.iter().enumerate() {
        let c1 = cal1.apply(a);
        let c2 = match (q2, cal2) {
            (Some(q), Some(c)) => Some(c.apply(q[i])),
            (Some(_), None) => return Err(config("second arm given without a calibration")),
            _ => None,
        };
        match (c1, c2) {
            (Some(x), None) => arm1.push(x),
            (Some(x), Some(Some(y))) => {
                arm1.push(x);
                arm2.as_mut().unwrap().push(y);
            }
            _ => {}
        }
    }
    let excluded = 1.0 - arm1.len() as f64 / q1.len() as f64;
    Ok((EventEnsemble { label: label.into(), arm1, arm2 }, excluded))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub label: String,
    pub events: usize,
    pub block_count: usize,
    pub dropped_events: usize,
    pub mean1: BlockEstimate,
    pub fano1: BlockEstimate,
    pub mean2: Option<BlockEstimate>,
    pub fano2: Option<BlockEstimate>,
    pub gamma: Option<BlockEstimate>,
    pub r: Option<BlockEstimate>,
    pub calibration: Option<CalibrationMethod>,
    pub excluded_fraction: Option<f64>,
}

impl StatsReport {
    pub fn from_ensemble(e: &EventEnsemble, n_blocks: usize) -> Result<Self> {
        let mean1 = block_statistics(e, n_blocks, |a, _| Ok(mean(a)))?;
        let fano1 = block_statistics(e, n_blocks, |a, _| fano(a))?;
        let (mean2, fano2, gamma, r) = if e.arm2.is_some() {
            let two = |f: fn(&[f64], &[f64]) -> Result<f64>| {
                block_statistics(e, n_blocks, move |a, b| f(a, b.unwrap()))
            };
            (
                Some(block_statistics(e, n_blocks, |_, b| Ok(mean(b.unwrap())))?),
                Some(block_statistics(e, n_blocks, |_, b| fano(b.unwrap()))?),
                Some(two(correlation)?),
                Some(two(noise_reduction)?),
            )
        } else {
            (None, None, None, None)
        };
        Ok(Self {
            label: e.label.clone(),
            events: e.len(),
            block_count: n_blocks,
            dropped_events: mean1.dropped,
            mean1,
            fano1,
            mean2,
            fano2,
            gamma,
            r,
            calibration: None,
            excluded_fraction: None,
        })
    }
}
