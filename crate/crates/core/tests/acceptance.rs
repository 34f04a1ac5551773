//! End-to-end acceptance checks. Everything runs inside one test so the
//! timed criteria do not compete with each other for cores; each criterion
//! prints a single `criterion N: PASS|FAIL` line.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use emgtorque::activation::{activate, fit_activation_params, ActivationParams};
use emgtorque::data::manifest::{ForearmLever, ModelKind, RunManifest};
use emgtorque::eval::filters::savgol_filter;
use emgtorque::eval::metrics::{pearson, r2, rmse, score};
use emgtorque::eval::report::{table3_csv, table3_header};
use emgtorque::eval::{CellReport, FeatureCondition, Grid, SeedResult};
use emgtorque::features::morlet::MorletBank;
use emgtorque::features::multitaper::Multitaper;
use emgtorque::features::time_domain::{rms, slope_sign_changes, waveform_length};
use emgtorque::nn::{Mode, Tcn, TcnConfig};
use emgtorque::pipeline::{run_protocol, threads_from_env, Dataset};
use emgtorque::preprocess::filter::Sos;
use emgtorque::preprocess::variance::running_variance;
use emgtorque::synth::{condition_grid, SynthSpec};
use emgtorque::torque::{pose_torque, AnthropometricTable, GRAVITY};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, format!("took {t:.2?}, limit {limit:?}"))?;
    Ok(t)
}

/// Amplitude of the `f` component of `x[range]` by least squares on sin/cos.
fn tone_amplitude(x: &[f64], f: f64, fs: f64, range: std::ops::Range<usize>) -> f64 {
    let (mut ss, mut cc, mut sc, mut xs, mut xc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for t in range {
        let w = 2.0 * std::f64::consts::PI * f * t as f64 / fs;
        let (s, c) = w.sin_cos();
        ss += s * s;
        cc += c * c;
        sc += s * c;
        xs += x[t] * s;
        xc += x[t] * c;
    }
    let det = ss * cc - sc * sc;
    let a = (xs * cc - xc * sc) / det;
    let b = (xc * ss - xs * sc) / det;
    a.hypot(b)
}

fn filter_response() -> Outcome {
    let start = Instant::now();
    let (order, lo, hi, fs) = (4, 15.0, 225.0, 500.0);
    let sos = Sos::bandpass(order, lo, hi, fs).map_err(|e| e.to_string())?;
    let warp = |f: f64| 2.0 * fs * (std::f64::consts::PI * f / fs).tan();
    let (w1, w2) = (warp(lo), warp(hi));
    // Butterworth prototype magnitude at the band-pass-mapped frequency.
    let analytic = |f: f64| {
        let w = warp(f);
        let lam = (w * w - w1 * w2) / (w * (w2 - w1));
        1.0 / (1.0 + lam.powi(2 * order as i32)).sqrt()
    };
    let n = 20_000;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let f = 5.0 + 12.5 * i as f64;
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * f * t as f64 / fs).sin())
            .collect();
        let y = sos.filtfilt(&x).map_err(|e| e.to_string())?;
        let measured = tone_amplitude(&y, f, fs, n / 4..3 * n / 4);
        let expected = analytic(f).powi(2);
        let rel = (measured - expected).abs() / expected;
        let single = (sos.magnitude(f, fs) - analytic(f)).abs() / analytic(f);
        worst = worst.max(rel).max(single);
        ensure(
            rel < 0.01,
            format!("{f} Hz: forward-backward gain {measured:e}, analytic {expected:e}"),
        )?;
        ensure(
            single < 0.01,
            format!("{f} Hz: single-pass gain off by {single:e}"),
        )?;
    }
    let dc = sos.filtfilt(&vec![1.0; n]).map_err(|e| e.to_string())?;
    let dc_gain = dc[n / 4..3 * n / 4]
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    ensure(dc_gain < 0.01, format!("DC gain {dc_gain:e}"))?;
    let t = within(start, Duration::from_secs(1))?;
    Ok(format!(
        "20 frequencies, worst relative error {worst:.2e}, DC gain {dc_gain:.1e}, {t:.2?}"
    ))
}

fn variance_oracle() -> Outcome {
    let start = Instant::now();
    let (n, w) = (10_000usize, 50usize);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for s in 0..1000 {
        let offset = rng.random_range(-5.0..5.0);
        let scale = rng.random_range(0.01..3.0);
        let x: Vec<f64> = (0..n)
            .map(|_| offset + scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let fast = running_variance(&x, w).map_err(|e| e.to_string())?;
        for t in 0..n {
            let win = &x[(t + 1).saturating_sub(w)..=t];
            let k = win.len() as f64;
            let brute = if win.len() < 2 {
                0.0
            } else {
                let mean = win.iter().sum::<f64>() / k;
                win.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
            };
            let rel = (fast[t] - brute).abs() / brute.abs().max(f64::MIN_POSITIVE);
            if brute != 0.0 {
                worst = worst.max(rel);
            }
            ensure(
                rel < 1e-9 || (brute == 0.0 && fast[t] == 0.0),
                format!("signal {s}, sample {t}: {} vs {brute}", fast[t]),
            )?;
        }
    }
    let t = within(start, Duration::from_secs(10))?;
    Ok(format!(
        "1000 signals × 10k samples, worst relative error {worst:.1e}, {t:.2?}"
    ))
}

fn activation_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dir = Dirichlet::new([1.0; 3]).map_err(|e| e.to_string())?;
    let mut violations = 0usize;
    for _ in 0..10_000 {
        let c: [f64; 3] = dir.sample(&mut rng);
        let alpha = 1.0 - c[1] - c[2];
        let p = ActivationParams::new(alpha.max(0.0), c[1], c[2], rng.random_range(0..20))
            .map_err(|e| e.to_string())?;
        let e: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..=1.0)).collect();
        let out = activate(&e, &p).map_err(|e| e.to_string())?;
        violations += out.iter().filter(|v| !(0.0..=1.0).contains(*v)).count();
    }
    ensure(violations == 0, format!("{violations} samples left [0, 1]"))?;

    let e: Vec<f64> = (0..2000)
        .map(|t| {
            let x = t as f64 / 37.0;
            (0.5 + 0.3 * x.sin() + 0.15 * (2.3 * x).cos()).clamp(0.0, 1.0)
        })
        .collect();
    let truth = ActivationParams::new(0.2, 0.5, 0.3, 3).map_err(|e| e.to_string())?;
    let target = activate(&e, &truth).map_err(|e| e.to_string())?;
    let fit = fit_activation_params(&e, &target, 20).map_err(|e| e.to_string())?;
    ensure(
        fit.params.delay == 3,
        format!("recovered delay {}", fit.params.delay),
    )?;
    ensure(
        fit.objective <= 1e-8,
        format!("objective {:e}", fit.objective),
    )?;
    Ok(format!(
        "10⁴ draws, 0 violations; fit d = {}, objective {:.1e}, coefficients ({:.4}, {:.4}, {:.4})",
        fit.params.delay, fit.objective, fit.params.alpha, fit.params.beta1, fit.params.beta2
    ))
}

fn feature_oracles() -> Outcome {
    let m = RunManifest::default();
    let n = m.window_len();
    let fs = m.sample_rate_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..1000 {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut sq = 0.0;
        for v in &x {
            sq += v * v;
        }
        let naive_rms = (sq / n as f64).sqrt();
        let mut naive_wl = 0.0;
        let mut naive_ssc = 0usize;
        for t in 1..n {
            naive_wl += (x[t] - x[t - 1]).abs();
            if t + 1 < n && (x[t] - x[t - 1]) * (x[t] - x[t + 1]) > m.ssc_threshold {
                naive_ssc += 1;
            }
        }
        let got_rms = rms(&x).map_err(|e| e.to_string())?;
        let got_wl = waveform_length(&x).map_err(|e| e.to_string())?;
        let got_ssc = slope_sign_changes(&x, m.ssc_threshold).map_err(|e| e.to_string())?;
        ensure(
            (got_rms - naive_rms).abs() <= 1e-12,
            format!("window {i}: rms {got_rms} vs {naive_rms}"),
        )?;
        ensure(
            (got_wl - naive_wl).abs() <= 1e-12,
            format!("window {i}: wl {got_wl} vs {naive_wl}"),
        )?;
        ensure(
            got_ssc == naive_ssc,
            format!("window {i}: ssc {got_ssc} vs {naive_ssc}"),
        )?;
    }

    let mt = Multitaper::new(n, m.mt_time_bandwidth, m.mt_tapers, fs).map_err(|e| e.to_string())?;
    let (mut power, mut variance) = (0.0, 0.0);
    for _ in 0..100 {
        let x: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        power += mt.total_power(&x).map_err(|e| e.to_string())?;
        let mean = x.iter().sum::<f64>() / n as f64;
        variance += x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    }
    let ratio = power / variance;
    ensure(
        (ratio - 1.0).abs() < 0.2,
        format!("multitaper power / variance = {ratio:.3}"),
    )?;

    let bank =
        MorletBank::auto(&m.mwt_freqs, fs, n, m.mwt_max_cycles).map_err(|e| e.to_string())?;
    for (k, &f) in m.mwt_freqs.iter().enumerate() {
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let x: Vec<f64> = (0..n)
            .map(|t| (std::f64::consts::TAU * f * t as f64 / fs + phase).sin())
            .collect();
        let p = bank.power(&x).map_err(|e| e.to_string())?;
        let best = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(usize::MAX);
        ensure(
            best == k,
            format!(
                "{f} Hz tone peaks at {} Hz",
                m.mwt_freqs[best.min(p.len() - 1)]
            ),
        )?;
    }
    Ok(format!(
        "1000 windows exact; multitaper power / variance {ratio:.3} over 100 draws; Morlet argmax correct at {} tones",
        m.mwt_freqs.len()
    ))
}

fn torque_equations() -> Outcome {
    let m = RunManifest::default();
    let body = m.body;
    let table = AnthropometricTable::MALE;
    let g = 9.81;
    ensure(GRAVITY == g, format!("gravity {GRAVITY}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let ts = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
        let te = rng.random_range(ts..std::f64::consts::PI);
        let m_obj = rng.random_range(0.0..3.0);
        for variant in [ForearmLever::AsPrinted, ForearmLever::MomentArmX] {
            let got = pose_torque(ts, te, &body, &table, m_obj, variant);
            let bm = body.body_mass_kg;
            let (m_ua, m_fa, m_h) = (bm * 0.0271, bm * 0.0162, bm * 0.0061);
            let x = body.forearm_length_m * (te - ts).sin();
            let y = body.upper_arm_length_m * ts.sin();
            let lever = match variant {
                ForearmLever::AsPrinted => body.forearm_length_m,
                ForearmLever::MomentArmX => x,
            };
            let hand = lever + 0.79 * body.hand_length_m * (te - ts).sin();
            let elbow = m_fa * g * 0.4574 * x + (m_obj + m_h) * g * hand;
            let shoulder =
                elbow + m_ua * g * 0.5772 * y + (m_obj + m_h + m_fa) * g * body.upper_arm_length_m;
            let err = [
                got.elbow - elbow,
                got.shoulder - shoulder,
                got.front - shoulder * ts.cos(),
                got.side - shoulder * ts.sin(),
            ]
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
            worst = worst.max(err);
            ensure(
                err <= 1e-9,
                format!("pose ({ts}, {te}): off by {err:e} N·m"),
            )?;
            let proj = got.front.powi(2) + got.side.powi(2) - got.shoulder.powi(2);
            ensure(
                proj.abs() <= 1e-9,
                format!("projection identity off by {proj:e}"),
            )?;

            let dm = 0.5;
            let next = pose_torque(ts, te, &body, &table, m_obj + dm, variant);
            let slope = (next.elbow - got.elbow) / dm;
            let expected = g * hand;
            ensure(
                (slope - expected).abs() <= 1e-9,
                format!("elbow slope {slope} vs {expected}"),
            )?;
            let s_slope = (next.shoulder - got.shoulder) / dm;
            let s_expected = g * (hand + body.upper_arm_length_m);
            ensure(
                (s_slope - s_expected).abs() <= 1e-9,
                format!("shoulder slope {s_slope} vs {s_expected}"),
            )?;
        }
    }
    Ok(format!(
        "100 poses × 2 variants, worst error {worst:.1e} N·m; projection and m_obj slope exact"
    ))
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let results = common::gradcheck::run_all(20);
    let (name, worst) = results
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or("no gradient checks ran")?;
    for (n, err) in &results {
        ensure(*err < 1e-4, format!("{n}: relative error {err:e}"))?;
    }
    let t = within(start, Duration::from_secs(60))?;
    Ok(format!(
        "{} checks over 20 configurations, worst {worst:.1e} ({name}), {t:.2?}",
        results.len()
    ))
}

fn tcn_causality() -> Outcome {
    let m = RunManifest::default();
    let steps = 64;
    let cfg = TcnConfig {
        steps,
        n_in: 3,
        filters: m.tcn_filters,
        kernel: m.tcn_kernel,
        dilations: m.tcn_dilations.clone(),
        dense: m.tcn_dense,
        n_out: 3,
        dropout: m.dropout,
        layer_norm: true,
    };
    let rf = cfg.receptive_field();
    ensure(rf == 13, format!("configured receptive field {rf}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut tcn = Tcn::new(cfg.clone(), &mut rng).map_err(|e| e.to_string())?;
    let base = Array2::from_shape_simple_fn((1, steps * cfg.n_in), || rng.random_range(-1.0..1.0));
    let reference = tcn.trace(base.clone());
    let mut measured = 0usize;
    for t0 in [0, 10, 25, 40, 51] {
        for ch in 0..cfg.n_in {
            let mut x = base.clone();
            x[[0, t0 * cfg.n_in + ch]] += 1.0;
            let probe = tcn.trace(x);
            let last = probe.len() - 1;
            for (layer, (a, b)) in reference.iter().zip(&probe).enumerate() {
                for t in 0..steps {
                    let changed = a.row(t).iter().zip(b.row(t)).any(|(u, v)| u != v);
                    if !changed {
                        continue;
                    }
                    ensure(
                        t >= t0,
                        format!("layer {layer} step {t} reacts to an impulse at {t0}"),
                    )?;
                    ensure(
                        t < t0 + rf,
                        format!("layer {layer} step {t} reacts to an impulse at {t0}"),
                    )?;
                    if layer == last {
                        measured = measured.max(t - t0 + 1);
                    }
                }
            }
        }
    }
    ensure(
        measured == rf,
        format!("impulse reach {measured} samples, expected {rf}"),
    )?;
    // the training forward must not change the trace
    let _ = tcn.forward(base.clone(), Mode::Infer);
    ensure(tcn.trace(base) == reference, "trace is not repeatable")?;
    Ok(format!(
        "receptive field {measured} samples, no backward leakage over 15 probes"
    ))
}

fn small_manifest() -> RunManifest {
    RunManifest {
        synth_trials: 2,
        max_epochs: 3,
        patience: 2,
        seeds: vec![1, 7],
        ..RunManifest::default()
    }
}

fn determinism() -> Outcome {
    let m = small_manifest();
    let spec = SynthSpec::from_manifest(&m);
    let conds = condition_grid(&m.weights_kg).map_err(|e| e.to_string())?;
    let cells = Grid::Core.cells(&m.weights_kg);
    let run = || -> Result<_, String> {
        let ds = Dataset::synthesize(&spec, &conds).map_err(|e| e.to_string())?;
        let r = run_protocol(&ds, &m, &cells, threads_from_env()).map_err(|e| e.to_string())?;
        Ok((table3_csv(&r.reports), r.bundles))
    };
    let (table_a, bundles_a) = run()?;
    let (table_b, bundles_b) = run()?;
    ensure(table_a == table_b, "table3 differs between runs")?;
    ensure(
        bundles_a.len() == cells.len() * m.seeds.len(),
        format!("{} bundles", bundles_a.len()),
    )?;
    for ((na, a), (nb, b)) in bundles_a.iter().zip(&bundles_b) {
        ensure(na == nb && a == b, format!("bundle {na} differs"))?;
    }
    let bytes: usize = bundles_a.iter().map(|(_, b)| b.len()).sum();
    Ok(format!(
        "{} bundles ({bytes} bytes) and table3 bit-identical across two runs",
        bundles_a.len()
    ))
}

fn learnability() -> Outcome {
    let start = Instant::now();
    let m = RunManifest {
        max_epochs: 20,
        ..RunManifest::default()
    };
    let spec = SynthSpec::from_manifest(&m);
    let ds = Dataset::synthesize(
        &spec,
        &condition_grid(&m.weights_kg).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let cells = Grid::Core.cells(&m.weights_kg);
    let run = run_protocol(&ds, &m, &cells, threads_from_env()).map_err(|e| e.to_string())?;
    let find = |model: ModelKind, cond: FeatureCondition| {
        run.reports
            .iter()
            .find(|r| r.cell.model == model && r.cell.condition == cond)
            .ok_or(format!("no {} {cond} cell", model.as_str()))
    };
    let a = find(ModelKind::Mlp, FeatureCondition::A)?;
    let b = find(ModelKind::Mlp, FeatureCondition::B)?;
    let c = find(ModelKind::Tcn, FeatureCondition::C)?;
    let r2s = |r: &CellReport| {
        r.joints
            .iter()
            .map(|j| format!("{:.4}", j.r2.mean))
            .collect::<Vec<_>>()
            .join("/")
    };
    let summary = format!(
        "MLP-B R² {}, TCN-C R² {}, mean R² B {:.4} vs A {:.4}",
        r2s(b),
        r2s(c),
        b.mean_r2(),
        a.mean_r2()
    );
    for (j, s) in b.joints.iter().enumerate() {
        ensure(
            s.r2.mean >= 0.85,
            format!("MLP-B joint {j} R² {:.4}; {summary}", s.r2.mean),
        )?;
    }
    for (j, s) in c.joints.iter().enumerate() {
        ensure(
            s.r2.mean >= 0.80,
            format!("TCN-C joint {j} R² {:.4}; {summary}", s.r2.mean),
        )?;
    }
    ensure(
        b.mean_r2() > a.mean_r2(),
        format!("condition-specific does not beat global; {summary}"),
    )?;
    let t = within(start, Duration::from_secs(15 * 60))?;
    Ok(format!("{summary}, {} seeds, {t:.1?}", m.seeds.len()))
}

fn metric_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let (a, b, c) = (
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-1.0..1.0),
        );
        let x: Vec<f64> = (0..120)
            .map(|i| a + b * i as f64 / 10.0 + c * (i as f64 / 10.0).powi(2))
            .collect();
        let y = savgol_filter(&x, 21, 2);
        let err = x
            .iter()
            .zip(&y)
            .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        ensure(
            err <= 1e-9,
            format!("SG(21,2) moved a quadratic by {err:e}"),
        )?;
    }

    for _ in 0..100 {
        let n = rng.random_range(2..400);
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let p: Vec<f64> = t
            .iter()
            .map(|v| 0.8 * v + rng.random_range(-2.0..2.0))
            .collect();
        let nf = n as f64;
        let mt = t.iter().sum::<f64>() / nf;
        let mp = p.iter().sum::<f64>() / nf;
        let ref_rmse = (t.iter().zip(&p).map(|(a, b)| (b - a).powi(2)).sum::<f64>() / nf).sqrt();
        let ss_res: f64 = t.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum();
        let ss_tot: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
        let ref_r2 = 1.0 - ss_res / ss_tot;
        let cov: f64 = t.iter().zip(&p).map(|(a, b)| (a - mt) * (b - mp)).sum();
        let sp: f64 = p.iter().map(|b| (b - mp).powi(2)).sum();
        let ref_rho = cov / (ss_tot * sp).sqrt();
        let got = [rmse(&p, &t), r2(&p, &t), pearson(&p, &t)];
        for (name, g, r) in [
            ("rmse", &got[0], ref_rmse),
            ("r2", &got[1], ref_r2),
            ("rho", &got[2], ref_rho),
        ] {
            let g = *g.as_ref().map_err(|e| e.to_string())?;
            ensure(
                (g - r).abs() <= 1e-12,
                format!("{name} {g} vs two-pass {r} (n = {n})"),
            )?;
        }
    }

    let m = RunManifest::default();
    let targets: [Vec<f64>; 3] =
        [0, 1, 2].map(|j| (0..30).map(|i| (i * (j + 1)) as f64 / 7.0).collect());
    let predictions: [Vec<f64>; 3] = targets
        .clone()
        .map(|t| t.iter().map(|v| v + 0.1 * v.sin()).collect());
    let scores = [0, 1, 2].map(|j| score(&predictions[j], &targets[j]).expect("valid series"));
    let cells = Grid::Table3.cells(&m.weights_kg);
    let reports = cells
        .iter()
        .map(|c| {
            let seeds = m
                .seeds
                .iter()
                .map(|&seed| SeedResult {
                    seed,
                    scores,
                    predictions: predictions.clone(),
                    targets: targets.clone(),
                    epochs: 1,
                })
                .collect();
            CellReport::new(c.clone(), seeds).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let csv = table3_csv(&reports);
    let lines: Vec<&str> = csv.lines().collect();
    let header = table3_header();
    ensure(
        header.len() == 4 + 3 * 3 * 2,
        format!("{} header columns", header.len()),
    )?;
    ensure(
        lines.first() == Some(&header.join(",").as_str()),
        "header line",
    )?;
    ensure(lines.len() == 1 + 7, format!("{} lines", lines.len()))?;
    let expected_cells = [
        ("mlp", "1.1+1.85", "A"),
        ("mlp", "1.1+1.85", "B"),
        ("mlp", "0+1.1+1.85", "A"),
        ("mlp", "0+1.1+1.85", "B"),
        ("tcn", "1.1+1.85", "C"),
        ("tcn", "0+1.1+1.85", "C"),
        ("tcn", "0+1.1+1.85", "B"),
    ];
    for (line, (model, weights, cond)) in lines[1..].iter().zip(expected_cells) {
        let fields: Vec<&str> = line.split(',').collect();
        ensure(
            fields.len() == header.len(),
            format!("row has {} fields", fields.len()),
        )?;
        ensure(
            fields[..4] == [model, weights, cond, "5"],
            format!("row keys {:?}", &fields[..4]),
        )?;
        ensure(
            fields[4..].iter().all(|f| f.parse::<f64>().is_ok()),
            format!("non-numeric metric in {line}"),
        )?;
    }
    Ok(format!(
        "SG exact on 100 quadratics; metrics match two-pass on 100 series; table3 7 × {}",
        header.len()
    ))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, filter_response),
        (2, variance_oracle),
        (3, activation_bounds),
        (4, feature_oracles),
        (5, torque_equations),
        (6, gradient_checks),
        (7, tcn_causality),
        (8, determinism),
        (9, learnability),
        (10, metric_properties),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (n, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(msg) => println!("criterion {n}: PASS {msg}"),
            Err(msg) => {
                println!("criterion {n}: FAIL {msg}");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
