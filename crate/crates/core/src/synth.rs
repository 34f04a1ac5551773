//! Synthetic subject: rigid two-segment arm kinematics and EMG whose
//! amplitude follows the arm's own static torque demand.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex64, FftPlanner};

use crate::data::csvio::{
    format_envelope, write_emg_csv, write_markers_csv, write_text, EnvelopeFile, RecordingMeta,
};
use crate::data::layout;
use crate::data::manifest::ForearmLever;
use crate::data::{
    BodyParameters, Condition, EmgRecording, MarkerTrajectory, Movement, RunManifest, EMG_CHANNELS,
};
use crate::error::{Error, Result};
use crate::torque::{compute_angles, compute_torques, pose_torque, AnthropometricTable};

pub const LEFT_SHOULDER: [f64; 3] = [0.0, 0.2, 1.2];
pub const RIGHT_SHOULDER: [f64; 3] = [0.0, -0.2, 1.2];

/// Envelope floor, also the constant envelope of rest recordings.
pub const BASELINE: f64 = 0.05;

/// Contribution of |elbow|, |front|, |side| torque to each channel.
const MIX: [[f64; 3]; EMG_CHANNELS] = [
    [0.8, 0.2, 0.0],
    [0.9, 0.0, 0.1],
    [0.3, 0.1, 0.1],
    [0.1, 0.8, 0.1],
    [0.0, 0.2, 0.8],
    [0.0, 0.3, 0.4],
    [0.1, 0.5, 0.3],
    [0.0, 0.3, 0.6],
];

const CARRIER_BAND_HZ: (f64, f64) = (20.0, 220.0);
const REST_SECONDS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub sample_rate_hz: f64,
    pub trial_duration_s: f64,
    pub trials_per_condition: usize,
    pub noise_level: f64,
    /// Ratio between the largest and smallest per-session channel gain.
    pub gain_spread: f64,
    pub seed: u64,
    pub body: BodyParameters,
    pub forearm_lever: ForearmLever,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::from_manifest(&RunManifest::default())
    }
}

impl SynthSpec {
    pub fn from_manifest(m: &RunManifest) -> Self {
        Self {
            sample_rate_hz: m.sample_rate_hz,
            trial_duration_s: m.synth_trial_s,
            trials_per_condition: m.synth_trials,
            noise_level: m.synth_noise,
            gain_spread: m.synth_gain_spread,
            seed: m.synth_seed,
            body: m.body,
            forearm_lever: m.forearm_lever,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.trial_duration_s > 0.0) {
            return Err(Error::config("synth_trial_s", "duration must be positive"));
        }
        if !(self.noise_level >= 0.0) {
            return Err(Error::config(
                "synth_noise",
                "noise level must be non-negative",
            ));
        }
        if !(self.gain_spread >= 1.0) {
            return Err(Error::config("synth_gain_spread", "must be at least 1"));
        }
        self.body.validate()
    }

    pub fn n_samples(&self) -> usize {
        (self.trial_duration_s * self.sample_rate_hz).round() as usize
    }
}

fn mix_seed(parts: &[u64]) -> u64 {
    // splitmix64 folded over the parts
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        h ^= p
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

fn cond_code(c: &Condition) -> u64 {
    let (mg, mv) = c.key();
    (mg as u64) << 1 | (mv == Movement::Complex) as u64
}

fn rng_for(spec: &SynthSpec, purpose: u64, c: &Condition, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, purpose, cond_code(c), trial]))
}

/// Shoulder flexion φ, abduction ψ and elbow flexion η, in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Pose {
    flex: f64,
    abd: f64,
    elbow: f64,
}

const REST: Pose = Pose {
    flex: 0.0,
    abd: 0.0,
    elbow: 0.0,
};

fn deg(d: f64) -> f64 {
    d * PI / 180.0
}

fn keyframes(movement: Movement, duration: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, Pose)> {
    let mut keys = vec![(0.0, REST)];
    let mut t = rng.random_range(0.3..0.8);
    keys.push((t, REST));
    match movement {
        Movement::Grasping => {
            while t < duration {
                let mid = Pose {
                    flex: deg(rng.random_range(20.0..35.0)),
                    abd: deg(rng.random_range(0.0..8.0)),
                    elbow: deg(rng.random_range(60.0..95.0)),
                };
                let reach = Pose {
                    flex: deg(rng.random_range(50.0..70.0)),
                    abd: deg(rng.random_range(0.0..10.0)),
                    elbow: deg(rng.random_range(5.0..20.0)),
                };
                for pose in [mid, reach, reach, mid, REST, REST] {
                    t += rng.random_range(0.35..0.8);
                    keys.push((t, pose));
                }
            }
        }
        Movement::Complex => {
            while t < duration {
                t += rng.random_range(0.6..1.4);
                let pose = if rng.random_bool(0.15) {
                    REST
                } else {
                    Pose {
                        flex: deg(rng.random_range(0.0..65.0)),
                        abd: deg(rng.random_range(0.0..75.0)),
                        elbow: deg(rng.random_range(0.0..110.0)),
                    }
                };
                keys.push((t, pose));
            }
        }
    }
    keys
}

/// Cosine smoothstep between keyframes; continuous first derivative.
fn pose_at(keys: &[(f64, Pose)], t: f64) -> Pose {
    let i = keys.partition_point(|(k, _)| *k <= t);
    if i == 0 {
        return keys[0].1;
    }
    if i >= keys.len() {
        return keys[keys.len() - 1].1;
    }
    let (t0, a) = keys[i - 1];
    let (t1, b) = keys[i];
    let s = (1.0 - (PI * (t - t0) / (t1 - t0)).cos()) / 2.0;
    Pose {
        flex: a.flex + s * (b.flex - a.flex),
        abd: a.abd + s * (b.abd - a.abd),
        elbow: a.elbow + s * (b.elbow - a.elbow),
    }
}

fn arm_markers(pose: Pose, body: &BodyParameters) -> [[f64; 3]; 6] {
    let (sf, cf) = pose.flex.sin_cos();
    let (sa, ca) = pose.abd.sin_cos();
    let u = [sf * ca, -sa, -cf * ca];
    // forward axis made orthogonal to the upper arm
    let mut n = [1.0 - u[0] * u[0], -u[0] * u[1], -u[0] * u[2]];
    let nn = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    n.iter_mut().for_each(|v| *v /= nn);
    let (se, ce) = pose.elbow.sin_cos();
    let f = [0, 1, 2].map(|k| ce * u[k] + se * n[k]);

    let r_el = [0, 1, 2].map(|k| RIGHT_SHOULDER[k] + body.upper_arm_length_m * u[k]);
    let r_wr = [0, 1, 2].map(|k| r_el[k] + body.forearm_length_m * f[k]);
    let l_el = [
        LEFT_SHOULDER[0],
        LEFT_SHOULDER[1],
        LEFT_SHOULDER[2] - body.upper_arm_length_m,
    ];
    let l_wr = [l_el[0], l_el[1], l_el[2] - body.forearm_length_m];
    [LEFT_SHOULDER, RIGHT_SHOULDER, l_el, r_el, l_wr, r_wr]
}

pub fn synth_kinematics(
    spec: &SynthSpec,
    cond: &Condition,
    trial: usize,
) -> Result<MarkerTrajectory> {
    spec.validate()?;
    let mut rng = rng_for(spec, 1, cond, trial as u64);
    let keys = keyframes(cond.movement, spec.trial_duration_s, &mut rng);
    let positions = (0..spec.n_samples())
        .map(|i| arm_markers(pose_at(&keys, i as f64 / spec.sample_rate_hz), &spec.body))
        .collect();
    Ok(MarkerTrajectory::new(spec.sample_rate_hz, positions, *cond)?.with_trial(trial))
}

/// Per-channel DC offset in mV, shared by every recording of the subject.
fn dc_offsets(spec: &SynthSpec) -> [f64; EMG_CHANNELS] {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, 2]));
    [0; EMG_CHANNELS].map(|_| rng.random_range(-0.5..0.5))
}

/// Per-session electrode gain: log-uniform within `[1/√spread, √spread]`.
pub fn session_gains(spec: &SynthSpec, cond: &Condition) -> [f64; EMG_CHANNELS] {
    let mut rng = rng_for(spec, 3, cond, 0);
    let half = spec.gain_spread.ln() / 2.0;
    [0; EMG_CHANNELS].map(|_| rng.random_range(-half..=half).exp())
}

/// Gaussian noise restricted to the carrier band by spectral masking, unit variance.
fn band_limited_noise(n: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * fs / n as f64;
        if f < CARRIER_BAND_HZ.0 || f > CARRIER_BAND_HZ.1 {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let sd = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    x.into_iter()
        .map(|v| if sd > 0.0 { v / sd } else { 0.0 })
        .collect()
}

fn channel_demand(w: &[f64; 3], elbow: f64, front: f64, side: f64) -> f64 {
    w[0] * elbow.abs() + w[1] * front.abs() + w[2] * side.abs()
}

/// Per-channel demand range over the reachable poses with `m_obj` in hand.
fn demand_range(spec: &SynthSpec, m_obj: f64) -> [(f64, f64); EMG_CHANNELS] {
    let table = AnthropometricTable::for_sex(spec.body.sex);
    let at = |s: f64, e: f64, m: f64| pose_torque(s, e, &spec.body, &table, m, spec.forearm_lever);
    let mut out = [(f64::INFINITY, f64::NEG_INFINITY); EMG_CHANNELS];
    for i in 0..=40 {
        for j in 0..=60 {
            let p = at(deg(2.0 * i as f64), deg(2.0 * j as f64), m_obj);
            for (o, w) in out.iter_mut().zip(&MIX) {
                let d = channel_demand(w, p.elbow, p.front, p.side);
                *o = (o.0.min(d), o.1.max(d));
            }
        }
    }
    out
}

/// Peak envelope for a given object mass.
pub fn weight_gain(weight_kg: f64) -> f64 {
    (0.6 + 0.2 * weight_kg).min(1.0)
}

/// Envelope in `[BASELINE, 1]` per channel from the torque demand of `traj`.
pub fn demand_envelope(traj: &MarkerTrajectory, spec: &SynthSpec) -> Result<Vec<Vec<f64>>> {
    let angles = compute_angles(traj)?;
    let table = AnthropometricTable::for_sex(spec.body.sex);
    let tq = compute_torques(
        &angles,
        &spec.body,
        &table,
        traj.condition.weight_kg,
        spec.forearm_lever,
    );
    let range = demand_range(spec, traj.condition.weight_kg);
    let gain = weight_gain(traj.condition.weight_kg);
    Ok(MIX
        .iter()
        .zip(range)
        .map(|(w, (lo, hi))| {
            (0..tq.len())
                .map(|t| {
                    let d = channel_demand(w, tq.elbow[t], tq.front[t], tq.side[t]);
                    let u = ((d - lo) / (hi - lo)).clamp(0.0, 1.0);
                    BASELINE + (1.0 - BASELINE) * gain * u
                })
                .collect()
        })
        .collect())
}

fn emg_from_envelope(
    env: &[Vec<f64>],
    spec: &SynthSpec,
    cond: &Condition,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = env.first().map_or(0, Vec::len);
    let dc = dc_offsets(spec);
    let gains = session_gains(spec, cond);
    env.iter()
        .enumerate()
        .map(|(c, e)| {
            let carrier = band_limited_noise(n, spec.sample_rate_hz, rng);
            (0..n)
                .map(|t| {
                    let white: f64 = rng.sample(StandardNormal);
                    dc[c] + gains[c] * e[t] * carrier[t] + spec.noise_level * white
                })
                .collect()
        })
        .collect()
}

/// EMG for a trajectory plus the ground-truth envelope, channel-major.
pub fn synth_emg(
    traj: &MarkerTrajectory,
    spec: &SynthSpec,
) -> Result<(EmgRecording, Vec<Vec<f64>>)> {
    spec.validate()?;
    let cond = traj.condition;
    let env = demand_envelope(traj, spec)?;
    let mut rng = rng_for(spec, 4, &cond, traj.trial.unwrap_or(0) as u64);
    let channels = emg_from_envelope(&env, spec, &cond, &mut rng);
    let mut rec = EmgRecording::new(
        spec.sample_rate_hz,
        EmgRecording::default_names(EMG_CHANNELS),
        channels,
        cond,
        false,
    )?;
    rec.trial = traj.trial;
    Ok((rec, env))
}

/// Rest recording of one session: constant baseline envelope.
pub fn synth_rest(spec: &SynthSpec, cond: &Condition) -> Result<(EmgRecording, Vec<Vec<f64>>)> {
    spec.validate()?;
    let n = (REST_SECONDS * spec.sample_rate_hz).round() as usize;
    let env = vec![vec![BASELINE; n]; EMG_CHANNELS];
    let mut rng = rng_for(spec, 5, cond, 0);
    let channels = emg_from_envelope(&env, spec, cond, &mut rng);
    let rec = EmgRecording::new(
        spec.sample_rate_hz,
        EmgRecording::default_names(EMG_CHANNELS),
        channels,
        *cond,
        true,
    )?;
    Ok((rec, env))
}

#[derive(Debug, Clone)]
pub struct SynthTrial {
    pub markers: MarkerTrajectory,
    pub emg: EmgRecording,
    pub envelope: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SynthSession {
    pub condition: Condition,
    pub rest: EmgRecording,
    pub trials: Vec<SynthTrial>,
}

pub fn synth_session(spec: &SynthSpec, cond: &Condition) -> Result<SynthSession> {
    let (rest, _) = synth_rest(spec, cond)?;
    let trials = (0..spec.trials_per_condition)
        .map(|i| {
            let markers = synth_kinematics(spec, cond, i)?;
            let (emg, envelope) = synth_emg(&markers, spec)?;
            Ok(SynthTrial {
                markers,
                emg,
                envelope,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SynthSession {
        condition: *cond,
        rest,
        trials,
    })
}

/// Every (weight, movement) pair of the manifest.
pub fn condition_grid(weights_kg: &[f64]) -> Result<Vec<Condition>> {
    let mut out = Vec::new();
    for &w in weights_kg {
        for m in Movement::ALL {
            out.push(Condition::new(w, m)?);
        }
    }
    Ok(out)
}

/// Writes rest, EMG, marker and truth files for every condition into `dir`.
/// Returns the number of files written.
pub fn write_dataset(spec: &SynthSpec, conditions: &[Condition], dir: &Path) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = 0;
    for cond in conditions {
        let session = synth_session(spec, cond)?;
        write_emg_csv(&layout::rest_path(dir, cond), &session.rest)?;
        files += 1;
        for (i, trial) in session.trials.iter().enumerate() {
            write_emg_csv(&layout::emg_path(dir, cond, i), &trial.emg)?;
            write_markers_csv(&layout::markers_path(dir, cond, i), &trial.markers)?;
            let truth = EnvelopeFile {
                meta: RecordingMeta {
                    rate_hz: spec.sample_rate_hz,
                    condition: *cond,
                    is_rest: false,
                    trial: Some(i),
                },
                channels: trial.envelope.clone(),
            };
            write_text(&layout::truth_path(dir, cond, i), &format_envelope(&truth))?;
            files += 3;
        }
        log::info!(
            "synthesized {} ({} trials)",
            cond.label(),
            session.trials.len()
        );
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Marker;

    fn short_spec() -> SynthSpec {
        SynthSpec {
            trial_duration_s: 4.0,
            trials_per_condition: 1,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn segments_are_rigid() {
        let spec = short_spec();
        for m in Movement::ALL {
            let c = Condition::new(1.1, m).unwrap();
            let tr = synth_kinematics(&spec, &c, 0).unwrap();
            for t in 0..tr.n_samples() {
                let d = |a: Marker, b: Marker| {
                    let (p, q) = (tr.at(t, a), tr.at(t, b));
                    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
                };
                assert!((d(Marker::RightShoulder, Marker::RightElbow) - 0.30).abs() < 1e-9);
                assert!((d(Marker::RightElbow, Marker::RightWrist) - 0.27).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn grasping_starts_at_rest() {
        let spec = short_spec();
        let c = Condition::new(0.0, Movement::Grasping).unwrap();
        let a = compute_angles(&synth_kinematics(&spec, &c, 0).unwrap()).unwrap();
        assert!((a.theta_e[0] - a.theta_s[0]).abs() < 1e-7);
    }

    #[test]
    fn deterministic() {
        let spec = short_spec();
        let c = Condition::new(1.85, Movement::Complex).unwrap();
        let a = synth_emg(&synth_kinematics(&spec, &c, 0).unwrap(), &spec).unwrap();
        let b = synth_emg(&synth_kinematics(&spec, &c, 0).unwrap(), &spec).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn rest_envelope_is_baseline() {
        let c = Condition::new(0.0, Movement::Grasping).unwrap();
        let (rec, env) = synth_rest(&short_spec(), &c).unwrap();
        assert!(rec.is_rest);
        assert!(env.iter().flatten().all(|v| *v == BASELINE));
    }

    #[test]
    fn heavier_object_raises_envelope() {
        let spec = short_spec();
        let light = Condition::new(0.0, Movement::Grasping).unwrap();
        let heavy = Condition::new(1.85, Movement::Grasping).unwrap();
        let traj = synth_kinematics(&spec, &light, 0).unwrap();
        let mut heavy_traj = traj.clone();
        heavy_traj.condition = heavy;
        let e0 = demand_envelope(&traj, &spec).unwrap();
        let e1 = demand_envelope(&heavy_traj, &spec).unwrap();
        for ch in [0, 1, 3] {
            let m0: f64 = e0[ch].iter().sum();
            let m1: f64 = e1[ch].iter().sum();
            assert!(m1 > m0);
        }
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    // Square root of the smoothed running variance, divided by the session
    // gain, against the known envelope over the whole channel-stacked trial.
    #[test]
    fn processed_emg_tracks_envelope_without_noise() {
        use crate::preprocess::{condition, smooth, FilterSpec};
        let spec = SynthSpec {
            noise_level: 0.0,
            ..SynthSpec::default()
        };
        let fspec = FilterSpec::from_manifest(&RunManifest::default());
        for c in condition_grid(&[0.0, 1.1, 1.85]).unwrap() {
            let (rest, _) = synth_rest(&spec, &c).unwrap();
            let gains = session_gains(&spec, &c);
            for trial in 0..2 {
                let (emg, env) =
                    synth_emg(&synth_kinematics(&spec, &c, trial).unwrap(), &spec).unwrap();
                let var = condition(&emg, &rest, &fspec, 50).unwrap().variance;
                let sm = smooth(&var, &fspec).unwrap();
                let amp: Vec<f64> = sm
                    .channels
                    .iter()
                    .zip(gains)
                    .flat_map(|(ch, g)| ch.iter().map(move |v| v.max(0.0).sqrt() / g))
                    .collect();
                let truth: Vec<f64> = env.concat();
                let rho = pearson(&amp, &truth);
                assert!(rho > 0.95, "{} trial {trial}: rho {rho}", c.label());
            }
        }
    }

    #[test]
    fn spectrum_inside_passband() {
        use crate::features::multitaper::Multitaper;
        use crate::preprocess::remove_baseline;
        let spec = SynthSpec {
            trial_duration_s: 4.0,
            ..SynthSpec::default()
        };
        let mt = Multitaper::new(500, 4.0, 7, spec.sample_rate_hz).unwrap();
        for c in condition_grid(&[0.0, 1.85]).unwrap() {
            let (rest, _) = synth_rest(&spec, &c).unwrap();
            let (emg, _) = synth_emg(&synth_kinematics(&spec, &c, 0).unwrap(), &spec).unwrap();
            let centred = remove_baseline(&emg, &rest).unwrap();
            for ch in &centred.channels {
                let (mut total, mut inside) = (0.0, 0.0);
                for seg in ch.chunks_exact(500) {
                    total += mt.total_power(seg).unwrap();
                    inside += mt.band_power(seg, &[(15.0, 225.0)]).unwrap()[0];
                }
                let frac = 1.0 - inside / total;
                assert!(frac < 0.01, "{}: {frac}", c.label());
            }
        }
    }

    #[test]
    fn dataset_round_trip() {
        use crate::data::csvio::{load_emg_csv, load_envelope_csv, load_markers_csv};
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            trial_duration_s: 1.0,
            trials_per_condition: 2,
            ..SynthSpec::default()
        };
        let c = Condition::new(1.1, Movement::Grasping).unwrap();
        assert_eq!(write_dataset(&spec, &[c], dir.path()).unwrap(), 7);
        assert_eq!(layout::discover_trials(dir.path(), &c).unwrap(), vec![0, 1]);
        let s = synth_session(&spec, &c).unwrap();
        let emg = load_emg_csv(&layout::emg_path(dir.path(), &c, 1)).unwrap();
        assert_eq!(emg.channels, s.trials[1].emg.channels);
        let mk = load_markers_csv(&layout::markers_path(dir.path(), &c, 1)).unwrap();
        assert_eq!(mk.positions, s.trials[1].markers.positions);
        let env = load_envelope_csv(&layout::truth_path(dir.path(), &c, 0)).unwrap();
        assert_eq!(env.channels, s.trials[0].envelope);
        assert!(
            load_emg_csv(&layout::rest_path(dir.path(), &c))
                .unwrap()
                .is_rest
        );
    }
}
