use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Histogram;
use crate::error::{config, Error, Result};
use crate::special::{normal_cdf, normal_pdf};

/// One fitted Gaussian component. `amplitude` is the area in counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPeak {
    pub index: usize,
    pub mu: f64,
    pub sigma: f64,
    pub amplitude: f64,
    pub mu_err: f64,
    pub sigma_err: f64,
    pub amplitude_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakGuess {
    pub mu: f64,
    pub sigma: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Passes re-weighted with the model variance after the count-weighted pass.
    pub reweight_passes: usize,
    /// Fit range extends this many initial sigmas beyond the outermost guesses.
    pub range_sigmas: f64,
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: 200, reweight_passes: 2, range_sigmas: 5.0, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub peaks: Vec<GaussianPeak>,
    pub chi2: f64,
    pub ndf: usize,
    pub iterations: usize,
    /// True when the joint fit failed and peaks were refined one window at a time.
    pub windowed: bool,
}

const MODEL_VARIANCE_FLOOR: f64 = 1e-2;
const TAIL_CUTOFF: f64 = 12.0;

#[derive(Debug, Clone, Copy)]
struct Bin {
    lo: f64,
    hi: f64,
    count: f64,
}

/// Expected counts in `bin` from every component, and the non-zero partial
/// derivatives as (parameter index, value).
fn evaluate(bin: &Bin, p: &[f64], grad: &mut Vec<(usize, f64)>) -> f64 {
    grad.clear();
    let mut m = 0.0;
    for k in 0..p.len() / 3 {
        let (a, mu, s) = (p[3 * k], p[3 * k + 1], p[3 * k + 2]);
        let zl = (bin.lo - mu) / s;
        let zh = (bin.hi - mu) / s;
        if zl > TAIL_CUTOFF || zh < -TAIL_CUTOFF {
            continue;
        }
        let prob = if zl > 0.0 {
            normal_cdf(-zl) - normal_cdf(-zh)
        } else {
            normal_cdf(zh) - normal_cdf(zl)
        };
        let (pl, ph) = (normal_pdf(zl), normal_pdf(zh));
        m += a * prob;
        grad.push((3 * k, prob));
        grad.push((3 * k + 1, a * (pl - ph) / s));
        grad.push((3 * k + 2, a * (zl * pl - zh * ph) / s));
    }
    m
}

fn chi2(bins: &[Bin], p: &[f64], var: &[f64]) -> f64 {
    let mut g = Vec::new();
    bins.iter()
        .zip(var)
        .map(|(b, v)| {
            let r = b.count - evaluate(b, p, &mut g);
            r * r / v
        })
        .sum()
}

fn normal_equations(bins: &[Bin], p: &[f64], var: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let n = p.len();
    let mut jtj = DMatrix::zeros(n, n);
    let mut jtr = DVector::zeros(n);
    let mut g = Vec::with_capacity(n);
    for (b, v) in bins.iter().zip(var) {
        let r = b.count - evaluate(b, p, &mut g);
        let w = 1.0 / v;
        for &(i, di) in &g {
            jtr[i] += w * di * r;
            for &(j, dj) in &g {
                jtj[(i, j)] += w * di * dj;
            }
        }
    }
    (jtj, jtr)
}

fn valid(p: &[f64]) -> bool {
    p.chunks(3).all(|c| c[0] > 0.0 && c[2] > 0.0 && c.iter().all(|x| x.is_finite()))
}

/// Narrowest resolvable width: the rms of a uniform spread over the
/// narrowest bin. A peak confined to one bin otherwise shrinks without end.
fn sigma_floor(bins: &[Bin]) -> f64 {
    bins.iter().map(|b| b.hi - b.lo).fold(f64::INFINITY, f64::min) / 12f64.sqrt()
}

/// Levenberg-Marquardt at fixed weights. Returns (iterations, converged).
fn levenberg_marquardt(bins: &[Bin], p: &mut [f64], var: &[f64], opts: &FitOptions) -> (usize, bool) {
    let floor = sigma_floor(bins);
    for s in p.iter_mut().skip(2).step_by(3) {
        *s = s.max(floor);
    }
    let mut lambda = 1e-3;
    let mut current = chi2(bins, p, var);
    for iter in 1..=opts.max_iterations {
        let (jtj, jtr) = normal_equations(bins, p, var);
        let mut improved = None;
        while lambda < 1e14 {
            let mut a = jtj.clone();
            for i in 0..p.len() {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&jtr);
            let mut trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(x, d)| x + d).collect();
            for s in trial.iter_mut().skip(2).step_by(3) {
                *s = s.max(floor);
            }
            if !valid(&trial) {
                lambda *= 10.0;
                continue;
            }
            let c = chi2(bins, &trial, var);
            if c <= current {
                let step = p
                    .iter()
                    .zip(&trial)
                    .map(|(x, t)| (t - x).abs() / (x.abs() + 1e-6))
                    .fold(0.0, f64::max);
                improved = Some((trial, c, step));
                lambda = (lambda * 0.1).max(1e-12);
                break;
            }
            lambda *= 10.0;
        }
        match improved {
            Some((trial, c, step)) => {
                p.copy_from_slice(&trial);
                let drop = current - c;
                current = c;
                // A negligible drop at small damping is a Gauss-Newton step
                // at the minimum, even if a flat direction still creeps.
                if drop <= opts.tolerance * current.max(1.0) && (step < 1e-6 || lambda <= 1e-6) {
                    return (iter, true);
                }
            }
            // No downhill step at any damping: already at the minimum.
            None => return (iter, true),
        }
    }
    (opts.max_iterations, false)
}

fn model_variance(bins: &[Bin], p: &[f64]) -> Vec<f64> {
    let mut g = Vec::new();
    bins.iter().map(|b| evaluate(b, p, &mut g).max(MODEL_VARIANCE_FLOOR)).collect()
}

fn bins_in(hist: &Histogram, lo: f64, hi: f64) -> Vec<Bin> {
    (0..hist.n_bins())
        .filter(|&i| {
            let c = hist.center(i);
            c >= lo && c <= hi
        })
        .map(|i| Bin { lo: hist.edges()[i], hi: hist.edges()[i + 1], count: hist.counts()[i] as f64 })
        .collect()
}

struct Solved {
    params: Vec<f64>,
    errors: Vec<f64>,
    chi2: f64,
    iterations: usize,
}

/// Count-weighted pass followed by model-weighted passes, which converge to
/// the Poisson maximum-likelihood estimate.
fn solve(bins: &[Bin], mut p: Vec<f64>, opts: &FitOptions) -> Option<Solved> {
    if bins.len() <= p.len() {
        return None;
    }
    let mut var: Vec<f64> = bins.iter().map(|b| b.count.max(1.0)).collect();
    let mut iterations = 0;
    for pass in 0..=opts.reweight_passes {
        if pass > 0 {
            var = model_variance(bins, &p);
        }
        let (it, ok) = levenberg_marquardt(bins, &mut p, &var, opts);
        iterations += it;
        if !ok {
            return None;
        }
    }
    let var = model_variance(bins, &p);
    let (jtj, _) = normal_equations(bins, &p, &var);
    let cov = jtj.try_inverse()?;
    let errors = (0..p.len()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    Some(Solved { chi2: chi2(bins, &p, &var), params: p, errors, iterations })
}

fn to_peaks(params: &[f64], errors: &[f64], first_index: usize) -> Vec<GaussianPeak> {
    params
        .chunks(3)
        .zip(errors.chunks(3))
        .enumerate()
        .map(|(k, (p, e))| GaussianPeak {
            index: first_index + k,
            amplitude: p[0],
            mu: p[1],
            sigma: p[2],
            amplitude_err: e[0],
            mu_err: e[1],
            sigma_err: e[2],
        })
        .collect()
}

/// Joint fit of one Gaussian per guess to the binned data, each component
/// integrated over the bin width. Peaks are indexed in order of the guesses.
/// If the joint fit does not converge each peak is refined alone within the
/// window bounded by its neighbours; `Error::NotConverged` carries whatever
/// peaks were fitted when that also fails.
pub fn fit_multi_gaussian(hist: &Histogram, guesses: &[PeakGuess], opts: &FitOptions) -> Result<FitResult> {
    if guesses.is_empty() {
        return Err(Error::Empty("no initial peaks"));
    }
    if guesses.iter().any(|g| !(g.sigma > 0.0 && g.amplitude > 0.0 && g.mu.is_finite())) {
        return Err(config("initial peaks need finite mu and positive sigma and amplitude"));
    }
    let mut guesses = guesses.to_vec();
    guesses.sort_by(|a, b| a.mu.total_cmp(&b.mu));

    let lo = guesses.iter().map(|g| g.mu - opts.range_sigmas * g.sigma).fold(f64::INFINITY, f64::min);
    let hi = guesses.iter().map(|g| g.mu + opts.range_sigmas * g.sigma).fold(f64::NEG_INFINITY, f64::max);
    let bins = bins_in(hist, lo, hi);
    let p0: Vec<f64> = guesses.iter().flat_map(|g| [g.amplitude, g.mu, g.sigma]).collect();

    if let Some(s) = solve(&bins, p0, opts) {
        let ndf = bins.len() - s.params.len();
        return Ok(FitResult {
            peaks: to_peaks(&s.params, &s.errors, 0),
            chi2: s.chi2,
            ndf,
            iterations: s.iterations,
            windowed: false,
        });
    }

    let mut peaks = Vec::with_capacity(guesses.len());
    let (mut chi2_total, mut ndf, mut iterations) = (0.0, 0, 0);
    for (k, g) in guesses.iter().enumerate() {
        let left = if k > 0 { 0.5 * (g.mu + guesses[k - 1].mu) } else { g.mu - opts.range_sigmas * g.sigma };
        let right =
            if k + 1 < guesses.len() { 0.5 * (g.mu + guesses[k + 1].mu) } else { g.mu + opts.range_sigmas * g.sigma };
        let window = bins_in(hist, left, right);
        match solve(&window, vec![g.amplitude, g.mu, g.sigma], opts) {
            Some(s) => {
                peaks.extend(to_peaks(&s.params, &s.errors, k));
                chi2_total += s.chi2;
                ndf += window.len() - 3;
                iterations += s.iterations;
            }
            None => {
                return Err(Error::NotConverged { iterations: iterations + opts.max_iterations, partial: peaks });
            }
        }
    }
    Ok(FitResult { peaks, chi2: chi2_total, ndf, iterations, windowed: true })
}

/// Starting values from peak bins: centre of the bin, width from the half
/// maximum crossing (capped at half the distance to a neighbour), and the
/// area implied by the height.
pub fn guesses_from_bins(hist: &Histogram, values: &[f64], peak_bins: &[usize]) -> Vec<PeakGuess> {
    let n = values.len();
    peak_bins
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let h = values[b].max(1.0);
            let mut l = b;
            while l > 0 && values[l] > 0.5 * h {
                l -= 1;
            }
            let mut r = b;
            while r + 1 < n && values[r] > 0.5 * h {
                r += 1;
            }
            let mu = hist.center(b);
            let mut hwhm = 0.5 * (hist.center(r) - hist.center(l));
            let neighbour = [k.checked_sub(1).map(|j| peak_bins[j]), peak_bins.get(k + 1).copied()]
                .into_iter()
                .flatten()
                .map(|j| (hist.center(j) - mu).abs())
                .fold(f64::INFINITY, f64::min);
            if neighbour.is_finite() {
                hwhm = hwhm.min(0.5 * neighbour);
            }
            let sigma = (hwhm / (2.0 * std::f64::consts::LN_2).sqrt()).max(hist.width(b));
            let amplitude = h * sigma * (2.0 * std::f64::consts::PI).sqrt() / hist.width(b);
            PeakGuess { mu, sigma, amplitude }
        })
        .collect()
}
