use pnr_core::dsp_pipeline::*;
use pnr_core::rng::{event_rng, EventRng, Purpose};
use pnr_core::sipm_model::{analog_trace, synthesize_waveform, DetectionOutcome, SiPMConfig, Waveform, WaveformParams};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn rng(tag: u64) -> EventRng {
    event_rng(4242, Purpose::Custom(tag), 0)
}

fn outcome(k: u64) -> DetectionOutcome {
    DetectionOutcome { n_in: k, m_detected: k, fired_primary: k, fired_total: k }
}

fn quiet() -> WaveformParams {
    WaveformParams { noise_sigma: 0.0, jitter_ns: 0.0, ..Default::default() }
}

#[test]
fn pole_zero_inverts_exponential_shaping() {
    let mut r = rng(1);
    let lead = 64;
    for a in [0.5, 0.9, (-1.0f64 / 20.0).exp()] {
        for _ in 0..1000 {
            let g: f64 = r.random_range(0.5..2.0);
            let len = r.random_range(20..300);
            let s: Vec<f64> = (0..len)
                .map(|_| if r.random_bool(0.2) { r.random_range(-500.0..5000.0) } else { 0.0 })
                .collect();
            let mut x = vec![0.0; lead];
            let mut acc = 0.0;
            for &v in &s {
                acc = a * acc + v;
                x.push(acc);
            }
            let cfg = PipelineConfig { a, g, ..Default::default() };
            let y = filter_trace(&x, &cfg, Some(lead));
            assert_eq!(y.len(), x.len());
            let scale = s.iter().map(|v| (g * v).abs()).fold(1e-300, f64::max);
            for (yi, si) in y[lead..].iter().zip(&s) {
                assert!((yi - g * si).abs() <= 1e-9 * scale, "a {a}: {yi} vs {}", g * si);
            }
        }
    }
}

#[test]
fn impulse_and_zero_inputs() {
    let a = 0.8;
    let mut pz = PoleZero::new(a, 1.0);
    let out: Vec<f64> = [1.0, a, a * a, a * a * a].iter().map(|&x| pz.step(x)).collect();
    assert_eq!(out[0], 1.0);
    assert!(out[1..].iter().all(|v| v.abs() < 1e-15));
    let mut pz = PoleZero::new(a, 3.0);
    assert!((0..50).all(|_| pz.step(0.0) == 0.0));
}

#[test]
fn pole_zero_noise_gain() {
    let a = (-1.0f64 / 20.0).exp();
    let mut r = rng(2);
    let mut pz = PoleZero::new(a, 1.0);
    let n = 1_000_000;
    let (mut s_in, mut s_out) = (0.0, 0.0);
    for _ in 0..n {
        let x: f64 = r.sample(StandardNormal);
        let y = pz.step(x);
        s_in += x * x;
        s_out += y * y;
    }
    let ratio = s_out / s_in;
    assert!((ratio / (1.0 + a * a) - 1.0).abs() < 0.01, "{ratio}");
}

#[test]
fn restorer_ramp_lag_matches_direct_average() {
    let w = 16;
    let r = 0.3;
    let mut br = BaselineRestorer::new(w);
    for n in 0..200 {
        let out = br.step(r * n as f64, false);
        if n > w {
            let direct: f64 = (n - w..n).map(|k| r * k as f64).sum::<f64>() / w as f64;
            assert!((out - (r * n as f64 - direct)).abs() < 1e-9);
            assert!((out - r * (w as f64 + 1.0) / 2.0).abs() < 1e-9);
        }
    }
}

#[test]
fn restorer_freeze_keeps_pre_pulse_estimate() {
    let mut br = BaselineRestorer::new(8);
    for _ in 0..20 {
        assert_eq!(br.step(5.0, false), 0.0);
    }
    for k in 0..30 {
        assert_eq!(br.step(5.0 + k as f64, true), k as f64);
    }
}

#[test]
fn gate_examples() {
    assert_eq!(qdc_integrate(&[1.0; 40], 5, 10).unwrap(), 11.0);
    assert_eq!(qdc_integrate(&[0.0; 40], 5, 20).unwrap(), 0.0);
    assert!(qdc_integrate(&[1.0; 15], 5, 10).is_err());
}

#[test]
fn trigger_examples() {
    assert_eq!(leading_edge_trigger(&[0.0; 30], 1.0), None);
    let mut step = vec![0.0; 30];
    step[12..].iter_mut().for_each(|v| *v = 50.0);
    assert_eq!(leading_edge_trigger(&step, 50.0), Some(12));
}

#[test]
fn deconvolved_charge_is_independent_of_gate_length() {
    let params = WaveformParams { baseline: 0.0, ..quiet() };
    let a = (-1.0f64 / 20.0).exp();
    let trace = analog_trace(&params, 3.0 * 70.0, 20.0, params.onset as f64);
    let cfg = PipelineConfig { a, g: 1.5, ..Default::default() };
    let y = filter_trace(&trace, &cfg, Some(params.onset));
    for gate in 10..=20 {
        let q = qdc_integrate(&y, params.onset - 2, gate).unwrap();
        assert!((q - 1.5 * 210.0).abs() < 1e-9, "gate {gate}: {q}");
    }
}

#[test]
fn charge_is_linear_in_amplitude() {
    let params = WaveformParams { baseline: 0.0, ..quiet() };
    let cfg = PipelineConfig::default();
    let q = |amp: f64| {
        let y = filter_trace(&analog_trace(&params, amp, 20.0, 96.3), &cfg, Some(96));
        qdc_integrate(&y, 95, 15).unwrap()
    };
    let base = q(70.0);
    for alpha in [0.1, 2.0, 7.5, 40.0] {
        assert!((q(alpha * 70.0) / base - alpha).abs() < 1e-12);
    }
}

#[test]
fn quantized_cells_within_rounding_bound() {
    let cfg25 = SiPMConfig::preset("25CS").unwrap();
    for gate in [10u32, 15, 20] {
        let cfg = PipelineConfig { a: cfg25.pole_zero_coefficient(), gate_len_ns: gate, ..Default::default() };
        let bound = 0.5 * (gate as f64 + 1.0) * (1.0 + cfg.a);
        for k in 0..60 {
            let mut r = rng(3);
            let wf = synthesize_waveform(&mut r, &outcome(k), &cfg25, &quiet()).unwrap();
            let q = process_event(&wf, &cfg).unwrap().unwrap();
            let expected = k as f64 * cfg25.cell_amplitude;
            assert!((q - expected).abs() <= bound, "k {k} gate {gate}: {q} vs {expected}");
        }
    }
}

#[test]
fn records_are_processed_independently() {
    let cfg25 = SiPMConfig::preset("25CS").unwrap();
    let params = WaveformParams::default();
    let cfg = PipelineConfig::default();
    let waves: Vec<Waveform> = (0..5)
        .map(|i| synthesize_waveform(&mut event_rng(5, Purpose::Waveform1, i), &outcome(i * 3), &cfg25, &params).unwrap())
        .collect();
    let forward: Vec<_> = waves.iter().map(|w| process_event(w, &cfg).unwrap()).collect();
    let backward: Vec<_> = waves.iter().rev().map(|w| process_event(w, &cfg).unwrap()).collect();
    assert!(forward.iter().eq(backward.iter().rev()));
}

#[test]
fn early_dc_step_is_removed() {
    let cfg = PipelineConfig::default();
    let cfg25 = SiPMConfig::preset("25CS").unwrap();
    let mut r = rng(6);
    let wf = synthesize_waveform(&mut r, &outcome(4), &cfg25, &WaveformParams::default()).unwrap();
    let q0 = process_event(&wf, &cfg).unwrap().unwrap();
    for offset in [-300i16, 17, 1000] {
        let mut shifted = wf.clone();
        shifted.samples[20..].iter_mut().for_each(|s| *s += offset);
        let q = process_event(&shifted, &cfg).unwrap().unwrap();
        assert!((q - q0).abs() < 1.0, "offset {offset}: {q} vs {q0}");
    }
}

#[test]
fn paired_channels() {
    let cfg25 = SiPMConfig::preset("25CS").unwrap();
    let cfg = PipelineConfig::default();
    let mut r = rng(7);
    let wf = synthesize_waveform(&mut r, &outcome(6), &cfg25, &WaveformParams::default()).unwrap();
    let same = process_pair(0, &wf, &wf, &cfg).unwrap().unwrap();
    assert_eq!(Some(same.q1), same.q2);

    let quiet_wf = |tag| synthesize_waveform(&mut rng(tag), &outcome(9), &cfg25, &quiet()).unwrap();
    let ev = process_pair(1, &quiet_wf(8), &quiet_wf(9), &cfg).unwrap().unwrap();
    assert_eq!(Some(ev.q1), ev.q2);
}

/// Discriminator input as the pipeline sees it: raw sample minus the mean of
/// the last W delayed samples, evaluated by brute force.
fn scan_trigger(raw: &[i16], cfg: &PipelineConfig) -> Option<usize> {
    let delayed = |k: usize| raw[k.saturating_sub(cfg.signal_delay).min(raw.len() - 1)] as f64;
    (1..raw.len()).find(|&n| {
        let lo = n.saturating_sub(cfg.baseline_window);
        let est = (lo..n).map(|k| if k < cfg.signal_delay { raw[0] as f64 } else { delayed(k) }).sum::<f64>()
            / (n - lo) as f64;
        raw[n] as f64 - est >= cfg.threshold
    })
}

#[test]
fn internal_trigger_matches_scan_oracle() {
    let cfg25 = SiPMConfig::preset("25CS").unwrap();
    let cfg = PipelineConfig { trigger_mode: TriggerMode::Internal, threshold: 35.0, ..Default::default() };
    let params = WaveformParams { jitter_ns: 1.0, ..Default::default() };
    for i in 0..300 {
        let mut r = event_rng(11, Purpose::Waveform1, i);
        let k = 1 + i % 5;
        let wf = synthesize_waveform(&mut r, &outcome(k), &cfg25, &params).unwrap();
        let out = process_channel(&wf, &cfg, Anchor::Configured).unwrap().unwrap();
        assert_eq!(Some(out.trigger), scan_trigger(&wf.samples, &cfg), "event {i}");
        assert!((90..=102).contains(&out.trigger), "event {i}: trigger {}", out.trigger);
    }
}

#[test]
fn internal_and_external_agree_without_jitter() {
    let cfg25 = SiPMConfig::preset("25CS").unwrap();
    let ext = PipelineConfig::default();
    // The discriminator fires on the undelayed onset, so the gate offset
    // absorbs the signal delay.
    let int = PipelineConfig { trigger_mode: TriggerMode::Internal, ..ext };
    for k in 1..20 {
        let wf = synthesize_waveform(&mut rng(12), &outcome(k), &cfg25, &quiet()).unwrap();
        assert_eq!(process_event(&wf, &ext).unwrap(), process_event(&wf, &int).unwrap(), "k {k}");
    }
}

#[test]
fn fixed_point_tracks_float() {
    let cfg25 = SiPMConfig::preset("25CS").unwrap();
    let float = PipelineConfig { a: cfg25.pole_zero_coefficient(), ..Default::default() };
    let fixed = PipelineConfig { arithmetic: Arithmetic::Fixed, ..float };
    for i in 0..200 {
        let mut r = event_rng(13, Purpose::Waveform1, i);
        let wf = synthesize_waveform(&mut r, &outcome(i % 30), &cfg25, &WaveformParams::default()).unwrap();
        let qf = process_event(&wf, &float).unwrap().unwrap();
        let qx = process_event(&wf, &fixed).unwrap().unwrap();
        assert!((qf - qx).abs() < 15.0, "event {i}: {qf} vs {qx}");
    }
}

proptest! {
    #[test]
    fn negative_gate_offsets_see_pre_trigger_samples(offset in -8i64..=2, seed in any::<u64>()) {
        let cfg25 = SiPMConfig::preset("25CS").unwrap();
        let params = WaveformParams { jitter_ns: 0.5, ..Default::default() };
        let wf = synthesize_waveform(&mut event_rng(seed, Purpose::Waveform1, 0), &outcome(3), &cfg25, &params).unwrap();
        let ext = PipelineConfig { gate_offset: offset, ..Default::default() };
        let int = PipelineConfig { trigger_mode: TriggerMode::Internal, ..ext };
        let out = process_channel(&wf, &int, Anchor::Configured).unwrap().unwrap();
        // External anchoring at the same trigger must give the same charge.
        let moved = Waveform { trigger_index: out.trigger as u32, ..wf.clone() };
        let q_ext = process_event(&moved, &ext).unwrap().unwrap();
        prop_assert_eq!(out.q, q_ext);
    }
}
