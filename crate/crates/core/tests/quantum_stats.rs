use pnr_core::photon_sources::*;
use pnr_core::quantum_stats::*;
use pnr_core::rng::{event_rng, EventRng, Purpose};
use pnr_core::sipm_model::{detect, thin_bernoulli, SiPMConfig};
use proptest::prelude::*;

fn rng(tag: u64) -> EventRng {
    event_rng(31337, Purpose::Custom(tag), 0)
}

fn poisson_draws(tag: u64, mean: f64, n: usize) -> Vec<f64> {
    let mut r = rng(tag);
    (0..n).map(|_| sample_coherent(&mut r, mean) as f64).collect()
}

#[test]
fn poisson_fano_is_one() {
    let x = poisson_draws(1, 5.0, 1_000_000);
    assert!((fano(&x).unwrap() - 1.0).abs() < 0.005);
}

#[test]
fn independent_arms_sit_at_shot_noise() {
    let a = poisson_draws(2, 4.0, 1_000_000);
    let b = poisson_draws(3, 4.0, 1_000_000);
    assert!((noise_reduction(&a, &b).unwrap() - 1.0).abs() < 0.01);
    assert!(correlation(&a, &b).unwrap().abs() < 0.005);
}

fn thinned_twb(tag: u64, n: usize, mean: f64, modes: u64, eta: f64) -> EventEnsemble {
    let mut r = rng(tag);
    let (a, b): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|_| {
            let k = sample_twb(&mut r, mean, modes).n1;
            (thin_bernoulli(&mut r, k, eta) as f64, thin_bernoulli(&mut r, k, eta) as f64)
        })
        .unzip();
    EventEnsemble::paired("twb", a, b).unwrap()
}

#[test]
fn balanced_twin_beam_noise_reduction() {
    let e = thinned_twb(4, 1_000_000, 5.0 / 0.3, 100, 0.3);
    let r = noise_reduction(&e.arm1, e.arm2.as_ref().unwrap()).unwrap();
    assert!((r - 0.7).abs() < 0.01, "{r}");
}

#[test]
fn estimators_match_theory_over_grid() {
    let mut tag = 100;
    for m in [0.07, 0.5, 1.0, 5.0, 10.0] {
        for eta in [0.25, 0.4] {
            for modes in [50u64, 100] {
                tag += 1;
                let e = thinned_twb(tag, 400_000, m / eta, modes, eta);
                let blocks = 20;
                let g = block_statistics(&e, blocks, |a, b| correlation(a, b.unwrap())).unwrap();
                let r = block_statistics(&e, blocks, |a, b| noise_reduction(a, b.unwrap())).unwrap();
                let g_th = gamma_theory(m, m, modes as f64, modes as f64, eta, eta).unwrap();
                let r_th = r_theory(m, m, modes as f64, eta, eta).unwrap();
                assert!((g.value - g_th).abs() < 3.0 * g.error, "m {m} eta {eta} modes {modes}: {g:?} vs {g_th}");
                assert!((r.value - r_th).abs() < 3.0 * r.error, "m {m} eta {eta} modes {modes}: {r:?} vs {r_th}");
            }
        }
    }
}

#[test]
fn fidelity_of_nearby_poissons() {
    let support = poisson_support(1.1).unwrap();
    let p: Vec<f64> = (0..=support as u64).map(|k| pmf_poisson(1.0, k).unwrap()).collect();
    let q: Vec<f64> = (0..=support as u64).map(|k| pmf_poisson(1.1, k).unwrap()).collect();
    let f = fidelity(&p, &q).unwrap();
    // High-precision direct summation; equals exp(-(1 - sqrt(1.1))^2 / 2).
    let oracle = 0.998_809_557_309_900_1;
    assert!((f - oracle).abs() < 1e-12, "{f}");
    assert!(((1.0 - f) - 0.001_190_442_690_099_893_6).abs() < 1e-12);
    assert_eq!(fidelity(&p, &q).unwrap(), fidelity(&q, &p).unwrap());
}

#[test]
fn fidelity_to_poisson_of_sampled_counts() {
    let mut r = rng(5);
    let counts: Vec<u64> = (0..1_000_000).map(|_| sample_coherent(&mut r, 3.0)).collect();
    let f = fidelity_to_poisson(&counts, 3.0).unwrap();
    assert!(1.0 - f < 1e-4, "{}", 1.0 - f);
    let thermal: Vec<u64> = (0..100_000).map(|_| sample_geometric(&mut r, 3.0)).collect();
    assert!(1.0 - fidelity_to_poisson(&thermal, 3.0).unwrap() > 0.05);
}

#[test]
fn variance_classes() {
    let poisson = EventEnsemble::single("poisson", poisson_draws(6, 4.0, 400_000));
    let mut r = rng(7);
    let thermal =
        EventEnsemble::single("thermal", (0..400_000).map(|_| sample_multithermal(&mut r, 6.0, 2) as f64).collect());
    let cfg = SiPMConfig { n_cells: 667, ..SiPMConfig::ideal(1.0) };
    let saturated = EventEnsemble::single(
        "saturated",
        (0..100_000)
            .map(|_| {
                let n = sample_coherent(&mut r, 1500.0);
                detect(&mut r, n, &cfg, 10.0).fired_total as f64
            })
            .collect(),
    );
    let points = variance_vs_mean(&[poisson, thermal, saturated], 4).unwrap();
    let classes: Vec<NoiseClass> = points.iter().map(|p| p.class).collect();
    assert_eq!(classes, vec![NoiseClass::Poissonian, NoiseClass::Super, NoiseClass::Sub]);
}

#[test]
fn block_error_matches_asymptotic_fano_variance() {
    let (blocks, size) = (4, 250_000);
    let mut values = Vec::new();
    let mut se2 = Vec::new();
    for seed in 0..100 {
        let mut r = event_rng(seed, Purpose::Source, 0);
        let x: Vec<f64> = (0..blocks * size).map(|_| sample_coherent(&mut r, 5.0) as f64).collect();
        let b = block_statistics(&EventEnsemble::single("p", x), blocks, |a, _| fano(a)).unwrap();
        values.push(b.value);
        se2.push(b.error * b.error);
    }
    let asymptotic = (2.0 / (size as f64 - 1.0)).sqrt() / (blocks as f64).sqrt();
    let spread = variance(&values).sqrt();
    let rms_se = mean(&se2).sqrt();
    assert!((spread / asymptotic - 1.0).abs() < 0.15, "spread {spread} vs {asymptotic}");
    assert!((rms_se / asymptotic - 1.0).abs() < 0.15, "rms error {rms_se} vs {asymptotic}");
}

proptest! {
    #[test]
    fn correlation_bounded_and_r_nonnegative(pairs in proptest::collection::vec((0u32..50, 0u32..50), 2..200)) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        if let Ok(g) = correlation(&a, &b) {
            prop_assert!(g.abs() <= 1.0);
        }
        if let Ok(r) = noise_reduction(&a, &b) {
            prop_assert!(r >= 0.0);
        }
    }

    #[test]
    fn fidelity_bounded_and_symmetric(raw_p in proptest::collection::vec(0.0f64..1.0, 1..30), raw_q in proptest::collection::vec(0.0f64..1.0, 1..30)) {
        let norm = |v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            if s == 0.0 { let mut z = vec![0.0; v.len()]; z[0] = 1.0; z } else { v.iter().map(|x| x / s).collect() }
        };
        let (p, q) = (norm(raw_p), norm(raw_q));
        let f = fidelity(&p, &q).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(f, fidelity(&q, &p).unwrap());
    }
}
