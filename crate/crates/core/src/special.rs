//! Log-factorials and the standard normal CDF.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

const TABLE_MAX: usize = 1024;

fn table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_MAX + 1);
        let mut acc = 0.0f64;
        let mut comp = 0.0f64;
        t.push(0.0);
        for k in 1..=TABLE_MAX {
            // Kahan summation keeps the last entries within an ulp or two.
            let y = (k as f64).ln() - comp;
            let s = acc + y;
            comp = (s - acc) - y;
            acc = s;
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`: tabulated up to 1024, Stirling series with four correction terms above.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) <= TABLE_MAX {
        return table()[n as usize];
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Standard normal cumulative distribution function Φ.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density φ.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}
