//! Figure presets: seeded sweeps that emit plot-ready CSV series.
//!
//! Every bundle lands in `<out>/<name>/` together with `legend.txt`, which
//! documents the columns. Sweep point `k` runs on seed `derive_seed(seed, k)`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pnr_core::photon_sources::{fano_theory, gamma_theory, r_theory, LightStateSpec};
use pnr_core::quantum_stats::{variance_vs_mean, EventEnsemble, NoiseClass};
use pnr_core::rng::derive_seed;
use pnr_core::sipm_model::SiPMConfig;
use pnr_core::spectra::{overlap_from_fom, write_histogram_csv, write_metrics_csv, write_peaks_csv};
use serde::Serialize;

use crate::analysis::{analyze_counts, analyze_spectrum, SpectrumAnalysis, SpectrumOptions};
use crate::config::{AnalysisSpec, Mode, Product, RunConfig};
use crate::error::{HarnessError, Result};
use crate::output::{create_dir, write_file, write_json};
use crate::sim::simulate;

pub const PRESETS: [&str; 4] = ["fig2_spectra", "fig3_vis_fom", "fig5_RFGamma", "fig6_fidelity"];

/// Electronic noise of the calibrated bench, ADU per sample.
pub const BENCH_NOISE_SIGMA: f64 = 1.0;
/// Relative spread of single-cell amplitudes.
pub const BENCH_GAIN_SPREAD: f64 = 0.005;
/// Relative event-to-event common gain fluctuation.
pub const BENCH_GAIN_DRIFT: f64 = 0.004;
/// Trigger-to-clock jitter of the asynchronous acquisition, ns.
pub const ASYNC_JITTER_NS: f64 = 1.0;
/// Modes per twin-beam arm.
pub const TWB_MODES: u64 = 200;
/// Efficiency shared by both sensors in the pile-up comparison.
pub const PILEUP_PDE: f64 = 0.4;

const SPECTRUM_EVENTS: u64 = 100_000;
const COUNTS_EVENTS: u64 = 250_000;
const FIDELITY_EVENTS: u64 = 1_000_000;
const BLOCKS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PresetOptions {
    pub seed: u64,
    /// Events per sweep point; each preset has its own default.
    pub events: Option<u64>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetBundle {
    pub name: String,
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Datasheet sensor with the calibrated bench gain fluctuations.
pub fn bench_detector(name: &str) -> Result<SiPMConfig> {
    let mut d = SiPMConfig::preset(name).ok_or_else(|| HarnessError::config(format!("unknown detector {name:?}")))?;
    d.gain_spread = BENCH_GAIN_SPREAD;
    d.gain_drift = BENCH_GAIN_DRIFT;
    Ok(d)
}

/// Full-waveform run of coherent light giving `target_m` primary detections.
pub fn spectrum_config(det: SiPMConfig, target_m: f64, jitter_ns: f64, events: u64, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(LightStateSpec::coherent(target_m / det.pde), vec![det]);
    cfg.mode = Mode::FullWaveform;
    cfg.waveform.noise_sigma = BENCH_NOISE_SIGMA;
    cfg.jitter_ns = Some(jitter_ns);
    cfg.events = events;
    cfg.seed = seed;
    cfg
}

/// Simulates and fits one spectrum.
pub fn spectrum_run(cfg: &RunConfig) -> Result<SpectrumAnalysis> {
    let out = simulate(cfg, false)?;
    let q: Vec<f64> = out.charges.iter().map(|c| c.q1).collect();
    analyze_spectrum(&q, &SpectrumOptions::from(&cfg.analysis))
}

/// One point of the F, Γ, R sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RfGammaRow {
    pub series: String,
    pub detector: String,
    pub m_target: f64,
    pub mean1: f64,
    pub mean1_err: f64,
    pub mean2: f64,
    pub fano1: f64,
    pub fano1_err: f64,
    pub fano_theory: f64,
    pub gamma: f64,
    pub gamma_err: f64,
    pub gamma_theory: f64,
    pub r: f64,
    pub r_err: f64,
    pub r_theory: f64,
}

/// Balanced twin beam on two identical detectors, counts only.
pub fn twb_point(series: &str, label: &str, det: SiPMConfig, target_m: f64, events: u64, seed: u64, workers: Option<usize>) -> Result<RfGammaRow> {
    let mut cfg = RunConfig::new(LightStateSpec::twin_beam(target_m / det.pde, TWB_MODES), vec![det; 2]);
    cfg.events = events;
    cfg.seed = seed;
    cfg.workers = workers;
    let out = simulate(&cfg, false)?;
    let spec = AnalysisSpec { products: vec![Product::Stats], ..Default::default() };
    let stats = analyze_counts(label, &out.counts, &spec, BLOCKS)?.stats.expect("stats requested");
    let (m1, m2) = (stats.mean1.value, stats.mean2.expect("two arms").value);
    let mu = TWB_MODES as f64;
    let gamma = stats.gamma.expect("two arms");
    let r = stats.r.expect("two arms");
    Ok(RfGammaRow {
        series: series.into(),
        detector: label.into(),
        m_target: target_m,
        mean1: m1,
        mean1_err: stats.mean1.error,
        mean2: m2,
        fano1: stats.fano1.value,
        fano1_err: stats.fano1.error,
        fano_theory: fano_theory(m1, TWB_MODES),
        gamma: gamma.value,
        gamma_err: gamma.error,
        gamma_theory: gamma_theory(m1, m2, mu, mu, det.pde, det.pde)?,
        r: r.value,
        r_err: r.error,
        r_theory: r_theory(m1, m2, mu, det.pde, det.pde)?,
    })
}

/// Coherent light split onto two pile-up-free unit-efficiency detectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityRow {
    pub m_target: f64,
    pub mean1: f64,
    pub mean1_err: f64,
    pub infidelity: f64,
    pub infidelity_err: f64,
    pub fano1: f64,
    pub fano1_err: f64,
    pub gamma: f64,
    pub gamma_err: f64,
    pub r: f64,
    pub r_err: f64,
}

pub fn fidelity_point(target_m: f64, events: u64, seed: u64, workers: Option<usize>) -> Result<FidelityRow> {
    let mut cfg = RunConfig::new(LightStateSpec::coherent(2.0 * target_m), vec![SiPMConfig::ideal(1.0); 2]);
    cfg.events = events;
    cfg.seed = seed;
    cfg.workers = workers;
    let out = simulate(&cfg, false)?;
    let spec = AnalysisSpec { products: vec![Product::Stats, Product::Fidelity], ..Default::default() };
    let report = analyze_counts("coherent", &out.counts, &spec, BLOCKS)?;
    let stats = report.stats.expect("stats requested");
    let fid = report.fidelity.expect("fidelity requested");
    let gamma = stats.gamma.expect("two arms");
    let r = stats.r.expect("two arms");
    Ok(FidelityRow {
        m_target: target_m,
        mean1: stats.mean1.value,
        mean1_err: stats.mean1.error,
        infidelity: 1.0 - fid.value,
        infidelity_err: fid.error,
        fano1: stats.fano1.value,
        fano1_err: stats.fano1.error,
        gamma: gamma.value,
        gamma_err: gamma.error,
        r: r.value,
        r_err: r.error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct VarianceRow {
    detector: String,
    m_target: f64,
    mean: f64,
    variance: f64,
    fano: f64,
    fano_err: f64,
    class: NoiseClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct VisibilityRow<'a> {
    run: &'a str,
    n: usize,
    visibility: f64,
    visibility_err: f64,
    truncated: bool,
    unresolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct FomRow<'a> {
    run: &'a str,
    n: usize,
    fom: f64,
    fom_err: f64,
    overlap_per_peak: f64,
    delta_pp: f64,
    delta_pp_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SigmaRow<'a> {
    run: &'a str,
    n: usize,
    mu: f64,
    mu_err: f64,
    sigma: f64,
    sigma_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SpectrumInfo {
    run: String,
    events: u64,
    peaks: usize,
    first_peak: usize,
    bin_width: f64,
    spacing: f64,
    chi2: f64,
    ndf: usize,
}

impl SpectrumInfo {
    fn new(run: &str, events: u64, s: &SpectrumAnalysis) -> Self {
        Self {
            run: run.into(),
            events,
            peaks: s.peaks().len(),
            first_peak: s.peaks().first().map_or(0, |p| p.index),
            bin_width: s.bin_width,
            spacing: s.spacing,
            chi2: s.fit.chi2,
            ndf: s.fit.ndf,
        }
    }
}

struct Bundle {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Bundle {
    fn new(dir: PathBuf) -> Result<Self> {
        create_dir(&dir)?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn with<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>,
    {
        let p = self.dir.join(name);
        write_file(&p, f)?;
        self.files.push(p);
        Ok(())
    }

    fn rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        self.with(name, |w| {
            let mut out = csv::Writer::from_writer(w);
            for r in rows {
                out.serialize(r).map_err(pnr_core::Error::from)?;
            }
            out.flush().map_err(pnr_core::Error::from)?;
            Ok(())
        })
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.dir.join(name);
        write_json(&p, value)?;
        self.files.push(p);
        Ok(())
    }

    fn legend(&mut self, text: &str) -> Result<()> {
        self.with("legend.txt", |w| {
            use std::io::Write;
            w.write_all(text.as_bytes()).map_err(|e| HarnessError::io(Path::new("legend.txt"), e))
        })
    }

    fn spectrum(&mut self, tag: &str, s: &SpectrumAnalysis) -> Result<()> {
        self.with(&format!("spectrum_{tag}.csv"), |w| Ok(write_histogram_csv(w, &s.hist)?))?;
        self.with(&format!("peaks_{tag}.csv"), |w| Ok(write_peaks_csv(w, s.peaks())?))?;
        let m = &s.metrics;
        self.with(&format!("metrics_{tag}.csv"), |w| Ok(write_metrics_csv(w, &m.visibility, &m.fom, &m.delta_pp)?))
    }
}

fn tag(m: f64) -> String {
    let mut s = String::new();
    let _ = write!(s, "m{m}");
    s.replace('.', "p")
}

const FIG2_TARGETS: [f64; 4] = [4.0, 8.0, 16.0, 32.0];

fn fig2(o: &PresetOptions, b: &mut Bundle) -> Result<()> {
    let events = o.events.unwrap_or(SPECTRUM_EVENTS);
    let det = bench_detector("25CS")?;
    let mut vis = Vec::new();
    let mut info = Vec::new();
    let mut analyses = Vec::new();
    for (k, &m) in FIG2_TARGETS.iter().enumerate() {
        let mut cfg = spectrum_config(det, m, 0.0, events, derive_seed(o.seed, k as u64));
        cfg.workers = o.workers;
        analyses.push((tag(m), spectrum_run(&cfg)?));
    }
    for (t, s) in &analyses {
        b.spectrum(t, s)?;
        info.push(SpectrumInfo::new(t, events, s));
        vis.extend(s.metrics.visibility.iter().map(|v| VisibilityRow {
            run: t,
            n: v.n,
            visibility: v.v,
            visibility_err: v.v_err,
            truncated: v.truncated,
            unresolved: v.unresolved,
        }));
    }
    b.rows("visibility.csv", &vis)?;
    b.json("summary.json", &info)?;
    b.legend(
        "25CS sensor, synchronous acquisition, coherent light at m_target = eta <n> detections.\n\
         spectrum_<tag>.csv: bin_low, bin_high, count of the charge histogram.\n\
         peaks_<tag>.csv: n, mu, mu_err, sigma, sigma_err, amplitude (area in counts) of the fitted peaks.\n\
         metrics_<tag>.csv: n, visibility, visibility_err, fom, fom_err, overlap_per_peak, delta_pp, delta_pp_err;\n\
         pair quantities sit on the lower peak n of (n, n+1).\n\
         visibility.csv: run, n, visibility, visibility_err, truncated (outer window clipped), unresolved (no valley).\n\
         summary.json: per run, fitted peak count, first peak, bin width, comb spacing and fit chi2/ndf.\n",
    )
}

fn fig3(o: &PresetOptions, b: &mut Bundle) -> Result<()> {
    let events = o.events.unwrap_or(SPECTRUM_EVENTS);
    let runs = [
        ("25CS_sync", "25CS", 0.0),
        ("25CS_async", "25CS", ASYNC_JITTER_NS),
        ("50CS_sync", "50CS", 0.0),
        ("25PS_sync", "25PS", 0.0),
    ];
    let (mut vis, mut fom, mut sigma, mut info) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut analyses = Vec::new();
    for (k, (run, det, jitter)) in runs.iter().enumerate() {
        // Sync and async 25CS share a seed: they differ only in the jitter.
        let seed = derive_seed(o.seed, if k == 1 { 0 } else { k as u64 });
        let mut cfg = spectrum_config(bench_detector(det)?, 10.0, *jitter, events, seed);
        cfg.workers = o.workers;
        analyses.push((*run, spectrum_run(&cfg)?));
    }
    for (run, s) in &analyses {
        info.push(SpectrumInfo::new(run, events, s));
        let m = &s.metrics;
        vis.extend(m.visibility.iter().map(|v| VisibilityRow {
            run,
            n: v.n,
            visibility: v.v,
            visibility_err: v.v_err,
            truncated: v.truncated,
            unresolved: v.unresolved,
        }));
        for (f, d) in m.fom.iter().zip(&m.delta_pp) {
            fom.push(FomRow {
                run,
                n: f.n,
                fom: f.fom,
                fom_err: f.fom_err,
                overlap_per_peak: overlap_from_fom(f.fom.max(0.0))?.per_peak,
                delta_pp: d.delta,
                delta_pp_err: d.delta_err,
            });
        }
        sigma.extend(s.peaks().iter().map(|p| SigmaRow {
            run,
            n: p.index,
            mu: p.mu,
            mu_err: p.mu_err,
            sigma: p.sigma,
            sigma_err: p.sigma_err,
        }));
    }
    b.rows("visibility.csv", &vis)?;
    b.rows("fom.csv", &fom)?;
    b.rows("sigma.csv", &sigma)?;
    b.json("summary.json", &info)?;
    b.legend(&format!(
        "Coherent light at m_target = 10 detections; synchronous runs have no trigger jitter,\n\
         the asynchronous 25CS run has {ASYNC_JITTER_NS} ns Gaussian jitter and the same seed as its synchronous twin.\n\
         visibility.csv: run, n, visibility, visibility_err, truncated, unresolved.\n\
         fom.csv: run, n, fom, fom_err, overlap_per_peak (misassignment probability), delta_pp, delta_pp_err for pair (n, n+1).\n\
         sigma.csv: run, n, mu, mu_err, sigma, sigma_err of the fitted peaks.\n\
         summary.json: per run, fitted peak count, first peak, bin width, comb spacing and fit chi2/ndf.\n"
    ))
}

const FIG5_TARGETS: [f64; 10] = [0.07, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
const FIG5_PILEUP_TARGETS: [f64; 4] = [100.0, 200.0, 500.0, 1000.0];

/// The 2668-cell and 667-cell sensors at a common efficiency.
pub fn pileup_pair() -> Result<[(String, SiPMConfig); 2]> {
    let mk = |name: &str| -> Result<(String, SiPMConfig)> {
        let mut d = SiPMConfig::preset(name).ok_or_else(|| HarnessError::config(format!("unknown detector {name:?}")))?;
        d.pde = PILEUP_PDE;
        Ok((format!("{name}_eta{PILEUP_PDE}"), d))
    };
    Ok([mk("25CS")?, mk("50CS")?])
}

fn fig5(o: &PresetOptions, b: &mut Bundle) -> Result<()> {
    let events = o.events.unwrap_or(COUNTS_EVENTS);
    let mut rows = Vec::new();
    let mut k = 0u64;
    for det in ["25CS", "50CS", "25PS"] {
        let d = SiPMConfig::preset(det).expect("datasheet preset");
        for &m in &FIG5_TARGETS {
            rows.push(twb_point("sensor", det, d, m, events, derive_seed(o.seed, k), o.workers)?);
            k += 1;
        }
    }
    for (label, d) in pileup_pair()? {
        for &m in &FIG5_PILEUP_TARGETS {
            rows.push(twb_point("pileup", &label, d, m, events, derive_seed(o.seed, k), o.workers)?);
            k += 1;
        }
    }
    b.rows("rfgamma.csv", &rows)?;
    b.legend(&format!(
        "Balanced twin beam, {TWB_MODES} modes per arm, counts only, {BLOCKS} blocks; both arms use the same sensor.\n\
         series 'sensor': datasheet sensors; series 'pileup': 25CS (2668 cells) and 50CS (667 cells) at eta = {PILEUP_PDE}.\n\
         rfgamma.csv columns: series, detector, m_target (eta <n>), mean1, mean1_err, mean2,\n\
         fano1, fano1_err, fano_theory (1 + mean1/modes), gamma, gamma_err, gamma_theory,\n\
         r, r_err, r_theory; theory columns ignore pile-up, cross-talk and dark counts and use the measured means.\n\
         *_err are standard errors of the block mean.\n"
    ))
}

const FIG6_TARGETS: [f64; 8] = [0.07, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
const FIG6_VARIANCE_TARGETS: [f64; 6] = [1.0, 5.0, 20.0, 60.0, 150.0, 300.0];

fn fig6(o: &PresetOptions, b: &mut Bundle) -> Result<()> {
    let events = o.events.unwrap_or(FIDELITY_EVENTS);
    let mut fid = Vec::new();
    for (k, &m) in FIG6_TARGETS.iter().enumerate() {
        fid.push(fidelity_point(m, events, derive_seed(o.seed, k as u64), o.workers)?);
    }
    b.rows("infidelity.csv", &fid)?;

    let var_events = o.events.unwrap_or(COUNTS_EVENTS);
    let mut rows = Vec::new();
    let mut k = FIG6_TARGETS.len() as u64;
    for det in ["25CS", "50CS"] {
        let d = SiPMConfig::preset(det).expect("datasheet preset");
        let mut ensembles = Vec::new();
        for &m in &FIG6_VARIANCE_TARGETS {
            let mut cfg = RunConfig::new(LightStateSpec::coherent(m / d.pde), vec![d]);
            cfg.events = var_events;
            cfg.seed = derive_seed(o.seed, k);
            cfg.workers = o.workers;
            k += 1;
            let m1: Vec<u64> = simulate(&cfg, false)?.counts.iter().map(|c| c.m1).collect();
            ensembles.push(EventEnsemble::from_counts(det, &m1, None));
        }
        for (p, &m) in variance_vs_mean(&ensembles, BLOCKS)?.into_iter().zip(&FIG6_VARIANCE_TARGETS) {
            rows.push(VarianceRow {
                detector: det.into(),
                m_target: m,
                mean: p.mean,
                variance: p.variance,
                fano: p.fano.value,
                fano_err: p.fano.error,
                class: p.class,
            });
        }
    }
    b.rows("variance.csv", &rows)?;
    b.legend(&format!(
        "infidelity.csv: coherent light split 50/50 onto two pile-up-free unit-efficiency detectors, {BLOCKS} blocks.\n\
         columns: m_target (mean per arm), mean1, mean1_err, infidelity (1 - fidelity of arm 1 to Poisson of its block mean),\n\
         infidelity_err, fano1, fano1_err, gamma, gamma_err, r, r_err; *_err are standard errors of the block mean.\n\
         variance.csv: coherent light on one datasheet sensor (pile-up, cross-talk, dark counts on).\n\
         columns: detector, m_target, mean, variance, fano, fano_err, class (sub / poissonian / super:\n\
         Fano factor below, within, or above 1 by three block errors).\n"
    ))
}

/// Runs a named preset into `<out>/<name>/`.
pub fn run_preset(name: &str, opts: &PresetOptions, out: &Path) -> Result<PresetBundle> {
    let runner: fn(&PresetOptions, &mut Bundle) -> Result<()> = match name {
        "fig2_spectra" => fig2,
        "fig3_vis_fom" => fig3,
        "fig5_RFGamma" => fig5,
        "fig6_fidelity" => fig6,
        _ => {
            return Err(HarnessError::config(format!("unknown preset {name:?}; known: {}", PRESETS.join(", "))));
        }
    };
    if opts.events == Some(0) {
        return Err(HarnessError::config("events must be >= 1"));
    }
    let mut bundle = Bundle::new(out.join(name))?;
    runner(opts, &mut bundle)?;
    Ok(PresetBundle { name: name.into(), dir: bundle.dir, files: bundle.files })
}
