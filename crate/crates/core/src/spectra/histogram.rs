use crate::error::{config, Error, Result};

/// Counting histogram. The last bin is closed on the right; values outside
/// the edges are tallied separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
    underflow: u64,
    overflow: u64,
    uniform: bool,
}

impl Histogram {
    pub fn with_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(config("a histogram needs at least two edges"));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(config("histogram edges must be finite and strictly increasing"));
        }
        let n = edges.len() - 1;
        Ok(Self { edges, counts: vec![0; n], underflow: 0, overflow: 0, uniform: false })
    }

    pub fn uniform(lo: f64, hi: f64, n_bins: usize) -> Result<Self> {
        if n_bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(config(format!("invalid uniform binning [{lo}, {hi}) with {n_bins} bins")));
        }
        let w = (hi - lo) / n_bins as f64;
        let mut edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * w).collect();
        edges[n_bins] = hi;
        let mut h = Self::with_edges(edges)?;
        h.uniform = true;
        Ok(h)
    }

    /// Uniform bins of `width` covering `[lo, hi]`, starting exactly at `lo`.
    pub fn with_width(lo: f64, hi: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(config("bin width must be > 0"));
        }
        let n = (((hi - lo) / width).ceil() as usize).max(1);
        Self::uniform(lo, lo + n as f64 * width, n)
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let (lo, hi) = (self.edges[0], *self.edges.last().unwrap());
        if !(x >= lo && x <= hi) {
            return None;
        }
        let n = self.counts.len();
        if x == hi {
            return Some(n - 1);
        }
        let mut i = if self.uniform {
            (((x - lo) / (hi - lo)) * n as f64) as usize
        } else {
            self.edges.partition_point(|&e| e <= x) - 1
        };
        // Guard against rounding in the arithmetic index.
        i = i.min(n - 1);
        while i > 0 && x < self.edges[i] {
            i -= 1;
        }
        while i + 1 < n && x >= self.edges[i + 1] {
            i += 1;
        }
        Some(i)
    }

    /// Adds one value; returns false for non-finite input, which is ignored.
    pub fn fill(&mut self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        match self.bin_of(x) {
            Some(i) => self.counts[i] += 1,
            None if x < self.edges[0] => self.underflow += 1,
            None => self.overflow += 1,
        }
        true
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    /// Counts inside the binned range.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    /// Centered moving average over `2 * half + 1` bins, truncated at the edges.
    pub fn smoothed(&self, half: usize) -> Vec<f64> {
        let n = self.counts.len();
        let mut prefix = vec![0u64; n + 1];
        for i in 0..n {
            prefix[i + 1] = prefix[i] + self.counts[i];
        }
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(n);
                (prefix[hi] - prefix[lo]) as f64 / (hi - lo) as f64
            })
            .collect()
    }
}

/// Histogram of `charges` with `n_bins` uniform bins over `range`, or over
/// `[min, max]` of the finite data when no range is given.
pub fn build_histogram(charges: &[f64], n_bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if n_bins < 2 {
        return Err(config("need at least 2 bins"));
    }
    let finite = || charges.iter().copied().filter(|x| x.is_finite());
    if finite().next().is_none() {
        return Err(Error::Empty("no finite charges to histogram"));
    }
    let (lo, hi) = match range {
        Some(r) => r,
        None => {
            let lo = finite().fold(f64::INFINITY, f64::min);
            let hi = finite().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) }
        }
    };
    let mut h = Histogram::uniform(lo, hi, n_bins)?;
    for &x in charges {
        h.fill(x);
    }
    Ok(h)
}

/// Bin width: one charge unit, halved until at least eight bins span `sigma_min`.
pub fn auto_bin_width(sigma_min: f64) -> f64 {
    let mut w = 1.0;
    while sigma_min / w < 8.0 && w > 1e-6 {
        w *= 0.5;
    }
    w
}
