//! Per-sample firmware blocks. Each block consumes one sample and produces
//! one sample per call.

use std::collections::VecDeque;

use crate::error::{config, Result};

/// Fixed-length digital delay line. Until it fills it repeats the first
/// sample it saw, so a record does not start with an artificial step.
#[derive(Debug, Clone)]
pub struct DelayLine<T> {
    buf: VecDeque<T>,
    delay: usize,
}

impl<T: Copy> DelayLine<T> {
    pub fn new(delay: usize) -> Self {
        Self { buf: VecDeque::with_capacity(delay + 1), delay }
    }

    pub fn push(&mut self, x: T) -> T {
        if self.delay == 0 {
            return x;
        }
        if self.buf.is_empty() {
            self.buf.extend(std::iter::repeat_n(x, self.delay));
        }
        self.buf.push_back(x);
        self.buf.pop_front().expect("delay line holds `delay` samples")
    }
}

/// Moving-average baseline restorer with freeze.
///
/// The output subtracts the mean of the last `W` accepted samples, not
/// counting the current one; the current sample is accepted afterwards
/// unless the restorer is frozen.
#[derive(Debug, Clone)]
pub struct BaselineRestorer {
    window: VecDeque<f64>,
    len: usize,
    sum: f64,
}

impl BaselineRestorer {
    pub fn new(window: usize) -> Self {
        assert!(window >= 1, "baseline window must be >= 1");
        Self { window: VecDeque::with_capacity(window), len: window, sum: 0.0 }
    }

    /// Current baseline estimate, if any sample has been accepted.
    pub fn estimate(&self) -> Option<f64> {
        (!self.window.is_empty()).then(|| self.sum / self.window.len() as f64)
    }

    pub fn step(&mut self, x: f64, frozen: bool) -> f64 {
        let out = x - self.estimate().unwrap_or(x);
        if !frozen {
            if self.window.len() == self.len {
                self.sum -= self.window.pop_front().unwrap();
            }
            self.window.push_back(x);
            self.sum += x;
        }
        out
    }
}

/// Pole-zero compensation `y[n] = G (x[n] − a x[n−1])`.
#[derive(Debug, Clone)]
pub struct PoleZero {
    a: f64,
    g: f64,
    prev: f64,
}

impl PoleZero {
    pub fn new(a: f64, g: f64) -> Self {
        Self { a, g, prev: 0.0 }
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.g * (x - self.a * self.prev);
        self.prev = x;
        y
    }
}

/// Integer restorer: running sum of ADC codes, rounded integer mean.
#[derive(Debug, Clone)]
pub struct FixedBaselineRestorer {
    window: VecDeque<i64>,
    len: usize,
    sum: i64,
}

impl FixedBaselineRestorer {
    pub fn new(window: usize) -> Self {
        Self { window: VecDeque::with_capacity(window), len: window.max(1), sum: 0 }
    }

    pub fn estimate(&self) -> Option<i64> {
        let n = self.window.len() as i64;
        (n > 0).then(|| (2 * self.sum + n).div_euclid(2 * n))
    }

    pub fn step(&mut self, x: i64, frozen: bool) -> i64 {
        let out = x - self.estimate().unwrap_or(x);
        if !frozen {
            if self.window.len() == self.len {
                self.sum -= self.window.pop_front().unwrap();
            }
            self.window.push_back(x);
            self.sum += x;
        }
        out
    }
}

pub const FIXED_FRAC_BITS: u32 = 16;

/// Integer pole-zero with `a` and `G` scaled by 2¹⁶; output carries 16
/// fractional bits.
#[derive(Debug, Clone)]
pub struct FixedPoleZero {
    a_fx: i64,
    g_fx: i64,
    prev: i64,
}

impl FixedPoleZero {
    pub fn new(a: f64, g: f64) -> Self {
        let scale = (1i64 << FIXED_FRAC_BITS) as f64;
        Self { a_fx: (a * scale).round() as i64, g_fx: (g * scale).round() as i64, prev: 0 }
    }

    pub fn step(&mut self, x: i64) -> i64 {
        let diff = (x << FIXED_FRAC_BITS) - self.a_fx * self.prev;
        self.prev = x;
        (self.g_fx * diff) >> FIXED_FRAC_BITS
    }
}

/// Index of the first sample at or above `threshold`.
pub fn leading_edge_trigger(x0: &[f64], threshold: f64) -> Option<usize> {
    x0.iter().position(|&v| v >= threshold)
}

/// Gated charge: the sum of `y[n0 ..= n0 + gate_len_ns]` at 1 ns sampling.
pub fn qdc_integrate(y: &[f64], n0: usize, gate_len_ns: u32) -> Result<f64> {
    let end = n0 + gate_len_ns as usize;
    if end >= y.len() {
        return Err(config(format!(
            "gate {n0}..={end} exceeds record of {} samples",
            y.len()
        )));
    }
    Ok(y[n0..=end].iter().sum())
}
