//! Light sources: exact photon-number distributions, seeded samplers and
//! closed-form statistics for coherent, multi-mode thermal and twin-beam states.
//!
//! Modes are equally populated. A twin beam is represented only through its
//! joint photon-number statistics: both arms carry the same total `n`, and
//! each arm is marginally multi-mode thermal.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::special::ln_factorial;

/// Above this mode count the multi-mode thermal sampler switches from an
/// explicit sum of geometric variates to the equivalent gamma–Poisson mixture.
pub const DIRECT_MODE_LIMIT: u64 = 64;

/// Poisson sampling switches from inversion to transformed rejection here.
pub const POISSON_INVERSION_LIMIT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightKind {
    Coherent,
    MultiThermal,
    TwinBeam,
}

/// Parametric description of a pulsed light source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightStateSpec {
    pub kind: LightKind,
    /// Mean photons per pulse; for a twin beam, per arm.
    pub mean: f64,
    /// Number of equally populated modes. Ignored for coherent light.
    #[serde(default = "one")]
    pub modes: u64,
}

fn one() -> u64 {
    1
}

impl LightStateSpec {
    pub fn coherent(mean: f64) -> Self {
        Self { kind: LightKind::Coherent, mean, modes: 1 }
    }

    pub fn multi_thermal(mean: f64, modes: u64) -> Self {
        Self { kind: LightKind::MultiThermal, mean, modes }
    }

    pub fn twin_beam(mean_per_arm: f64, modes: u64) -> Self {
        Self { kind: LightKind::TwinBeam, mean: mean_per_arm, modes }
    }

    pub fn validate(&self) -> Result<()> {
        check_mean(self.mean)?;
        if self.modes == 0 {
            return Err(domain("mode count must be at least 1"));
        }
        Ok(())
    }

    /// Squared twin-beam amplitude λ² = ⟨n⟩/(μ + ⟨n⟩), always in [0, 1).
    pub fn lambda_squared(&self) -> f64 {
        self.mean / (self.modes as f64 + self.mean)
    }

    pub fn is_two_arm(&self) -> bool {
        self.kind == LightKind::TwinBeam
    }

    /// Exact probability of `n` photons in one arm.
    pub fn pmf(&self, n: u64) -> Result<f64> {
        match self.kind {
            LightKind::Coherent => pmf_poisson(self.mean, n),
            LightKind::MultiThermal | LightKind::TwinBeam => {
                pmf_multithermal(self.mean, self.modes, n)
            }
        }
    }

    /// Fano factor of the photon-number distribution in one arm.
    pub fn fano(&self) -> f64 {
        match self.kind {
            LightKind::Coherent => 1.0,
            _ => fano_theory(self.mean, self.modes),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhotonEvent {
        match self.kind {
            LightKind::Coherent => PhotonEvent::single(sample_coherent(rng, self.mean)),
            LightKind::MultiThermal => {
                PhotonEvent::single(sample_multithermal(rng, self.mean, self.modes))
            }
            LightKind::TwinBeam => sample_twb(rng, self.mean, self.modes),
        }
    }
}

/// Photon numbers of one pulse; `n2` is present only for two-arm sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhotonEvent {
    pub n1: u64,
    pub n2: Option<u64>,
}

impl PhotonEvent {
    pub fn single(n1: u64) -> Self {
        Self { n1, n2: None }
    }
}

fn check_mean(mean: f64) -> Result<()> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(domain(format!("mean photon number must be finite and >= 0, got {mean}")));
    }
    Ok(())
}

/// Poisson probability ⟨n⟩ⁿ e^{−⟨n⟩}/n!, evaluated in log space.
pub fn pmf_poisson(mean: f64, n: u64) -> Result<f64> {
    check_mean(mean)?;
    if mean == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    Ok((n as f64 * mean.ln() - mean - ln_factorial(n)).exp())
}

/// Multi-mode thermal probability with `modes` equally populated modes.
pub fn pmf_multithermal(mean: f64, modes: u64, n: u64) -> Result<f64> {
    check_mean(mean)?;
    if modes == 0 {
        return Err(domain("mode count must be at least 1"));
    }
    if mean == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let mu = modes as f64;
    // ln[(n+μ−1)!/(μ−1)!], summed directly while that is cheap and exact-ish.
    let rising = if n <= 1024 {
        (0..n).map(|k| (mu + k as f64).ln()).sum::<f64>()
    } else {
        ln_factorial(n + modes - 1) - ln_factorial(modes - 1)
    };
    let ln_p = rising - ln_factorial(n)
        - mu * (mean / mu).ln_1p()
        - n as f64 * (mu / mean).ln_1p();
    Ok(ln_p.exp())
}

/// Poisson variate: inversion below [`POISSON_INVERSION_LIMIT`], PTRS
/// transformed rejection (Hörmann 1993) above.
pub fn sample_coherent<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        0
    } else if mean < POISSON_INVERSION_LIMIT {
        poisson_inversion(rng, mean)
    } else {
        poisson_ptrs(rng, mean)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p == 0.0 && cdf < u {
            // Rounding left a sliver of mass above the accumulated cdf.
            break;
        }
    }
    k
}

fn poisson_ptrs<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.024_83 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * loglam - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// Geometric (single-mode thermal) variate with the given mean, by inverse CDF.
pub fn sample_geometric<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let ln_q = (mean / (1.0 + mean)).ln();
    // u in (0, 1]
    let u = 1.0 - rng.random::<f64>();
    (u.ln() / ln_q).floor() as u64
}

/// Multi-mode thermal variate: sum of `modes` geometric variates of mean
/// ⟨n⟩/μ. For many modes the sum is drawn through its gamma–Poisson mixture
/// representation, which has the same distribution.
pub fn sample_multithermal<R: Rng + ?Sized>(rng: &mut R, mean: f64, modes: u64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let per_mode = mean / modes as f64;
    if modes <= DIRECT_MODE_LIMIT {
        (0..modes).map(|_| sample_geometric(rng, per_mode)).sum()
    } else {
        let gamma = Gamma::new(modes as f64, per_mode).expect("shape and scale are positive");
        let intensity = gamma.sample(rng);
        sample_coherent(rng, intensity)
    }
}

/// Twin-beam pulse: both arms receive the same multi-mode thermal photon number.
pub fn sample_twb<R: Rng + ?Sized>(rng: &mut R, mean_per_arm: f64, modes: u64) -> PhotonEvent {
    let n = sample_multithermal(rng, mean_per_arm, modes);
    PhotonEvent { n1: n, n2: Some(n) }
}

/// Fano factor ⟨n⟩/μ + 1 of a multi-mode thermal distribution.
pub fn fano_theory(mean: f64, modes: u64) -> f64 {
    mean / modes as f64 + 1.0
}

fn check_efficiency(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(domain(format!("efficiency must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

/// Twin-beam correlation coefficient in detected photons, given the detected
/// mean per arm, the mode count seen by each arm and the arm efficiencies.
pub fn gamma_theory(m1: f64, m2: f64, mu1: f64, mu2: f64, eta1: f64, eta2: f64) -> Result<f64> {
    check_mean(m1)?;
    check_mean(m2)?;
    check_efficiency(eta1)?;
    check_efficiency(eta2)?;
    if mu1 < 1.0 || mu2 < 1.0 {
        return Err(domain("mode counts must be at least 1"));
    }
    let num = (m1 * m2 / (mu1 * mu2)).sqrt() + (eta1 * eta2).sqrt();
    let den = ((1.0 + m1 / mu1) * (1.0 + m2 / mu2)).sqrt();
    Ok(num / den)
}

/// Twin-beam noise reduction factor in detected photons.
pub fn r_theory(m1: f64, m2: f64, mu: f64, eta1: f64, eta2: f64) -> Result<f64> {
    check_mean(m1)?;
    check_mean(m2)?;
    check_efficiency(eta1)?;
    check_efficiency(eta2)?;
    if mu < 1.0 {
        return Err(domain("mode count must be at least 1"));
    }
    let sum = m1 + m2;
    if sum == 0.0 {
        return Err(domain("noise reduction factor needs m1 + m2 > 0"));
    }
    Ok(1.0 - 2.0 * (eta1 * eta2).sqrt() * (m1 * m2).sqrt() / sum + (m1 - m2).powi(2) / (mu * sum))
}
