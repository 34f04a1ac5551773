//! Dataset assembly and the preprocessing chain from raw recordings to
//! windowed features and torque targets.

mod cell;
pub mod files;
mod protocol;
mod store;

use std::path::Path;

use ndarray::{concatenate, Array2, Axis};

use crate::activation::{activate, fit_activation_segments, ActivationFit, ActivationParams};
use crate::data::csvio::{load_emg_csv, load_envelope_csv, load_markers_csv};
use crate::data::layout;
use crate::data::manifest::{ActivationMode, FeatureToggles, RunManifest};
use crate::data::{Condition, EmgRecording, MarkerTrajectory};
use crate::error::{Error, Result};
use crate::features::{plan_windows, Feature, FeatureExtractor, FeatureMatrix};
use crate::preprocess::{
    condition, fit_maxima, smooth, FilterSpec, NormalizationMaxima, NormalizationMode,
};
use crate::synth::{condition_grid, synth_session, SynthSpec};
use crate::torque::{trajectory_torques, window_targets};

pub use cell::{model_bundle, run_cell, CellModel, CellOutcome, Encoder, Layout};
pub use protocol::{run_protocol, threads_from_env, write_report, ProtocolRun};
pub use store::{load_results, results_bundle};

#[derive(Debug, Clone)]
pub struct Trial {
    pub emg: EmgRecording,
    pub markers: MarkerTrajectory,
    /// Ground-truth activation envelope, present for synthetic data.
    pub truth: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub condition: Condition,
    pub rest: EmgRecording,
    pub trials: Vec<Trial>,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub sessions: Vec<Session>,
}

impl Dataset {
    /// Every (weight, movement) session of `weights_kg` from `dir`.
    pub fn load(dir: &Path, weights_kg: &[f64]) -> Result<Self> {
        let mut sessions = Vec::new();
        for cond in condition_grid(weights_kg)? {
            let rest = load_emg_csv(&layout::rest_path(dir, &cond))?;
            let numbers = layout::discover_trials(dir, &cond)?;
            if numbers.is_empty() {
                return Err(Error::MissingInput(format!(
                    "no trials for {cond} in {}",
                    dir.display()
                )));
            }
            let mut trials = Vec::with_capacity(numbers.len());
            for t in numbers {
                let emg = load_emg_csv(&layout::emg_path(dir, &cond, t))?;
                let markers = load_markers_csv(&layout::markers_path(dir, &cond, t))?;
                if emg.condition != cond || markers.condition != cond {
                    return Err(Error::Schema(format!(
                        "trial {t} of {cond} carries a different condition header"
                    )));
                }
                if emg.n_samples() != markers.n_samples() {
                    return Err(Error::Length(format!(
                        "{cond} trial {t}: {} EMG samples but {} marker frames",
                        emg.n_samples(),
                        markers.n_samples()
                    )));
                }
                let truth_path = layout::truth_path(dir, &cond, t);
                let truth = if truth_path.exists() {
                    Some(load_envelope_csv(&truth_path)?.channels)
                } else {
                    None
                };
                trials.push(Trial {
                    emg,
                    markers,
                    truth,
                });
            }
            sessions.push(Session {
                condition: cond,
                rest,
                trials,
            });
        }
        Ok(Self { sessions })
    }

    /// Synthetic sessions held in memory.
    pub fn synthesize(spec: &SynthSpec, conditions: &[Condition]) -> Result<Self> {
        let sessions = conditions
            .iter()
            .map(|c| {
                let s = synth_session(spec, c)?;
                Ok(Session {
                    condition: s.condition,
                    rest: s.rest,
                    trials: s
                        .trials
                        .into_iter()
                        .map(|t| Trial {
                            emg: t.emg,
                            markers: t.markers,
                            truth: Some(t.envelope),
                        })
                        .collect(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { sessions })
    }

    pub fn conditions(&self) -> Vec<Condition> {
        self.sessions.iter().map(|s| s.condition).collect()
    }

    /// Sessions whose weight is in `weights_kg`, in dataset order. Every
    /// (weight, movement) pair must be present.
    pub fn select(&self, weights_kg: &[f64]) -> Result<Vec<&Session>> {
        let wanted = condition_grid(weights_kg)?;
        for c in &wanted {
            if !self.sessions.iter().any(|s| s.condition == *c) {
                return Err(Error::Protocol(format!("no data for condition {c}")));
            }
        }
        Ok(self
            .sessions
            .iter()
            .filter(|s| wanted.contains(&s.condition))
            .collect())
    }
}

/// One trial after the signal chain.
#[derive(Debug, Clone)]
pub struct ProcessedTrial {
    pub condition: Condition,
    pub activation: EmgRecording,
    pub bandpassed: EmgRecording,
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub trials: Vec<ProcessedTrial>,
    pub maxima: NormalizationMaxima,
    pub params: ActivationParams,
    pub fit: Option<ActivationFit>,
}

fn clamp_unit(rec: EmgRecording) -> Result<EmgRecording> {
    let chs = rec
        .channels
        .iter()
        .map(|c| c.iter().map(|v| v.clamp(0.0, 1.0)).collect())
        .collect();
    rec.with_channels(chs)
}

/// Divides the band-passed tap by the square root of the variance maxima, so
/// spectral features see the same normalization as the envelope.
fn amplitude_normalize(rec: &EmgRecording, maxima: &NormalizationMaxima) -> Result<EmgRecording> {
    let max = maxima.for_condition(&rec.condition)?;
    let chs = rec
        .channels
        .iter()
        .zip(max)
        .map(|(c, m)| {
            let s = m.sqrt();
            c.iter().map(|v| v / s).collect()
        })
        .collect();
    rec.with_channels(chs)
}

/// (session, trial, channel) picks for the activation fit: sessions and
/// channels rotate so the budget spreads over conditions and muscles, and
/// trials are taken from the start of each session.
fn fit_picks(
    trials_per_session: &[usize],
    channels: usize,
    n_samples: usize,
    budget: usize,
) -> Vec<(usize, usize, usize)> {
    let mut picks = Vec::new();
    let mut used = 0;
    for t in 0..trials_per_session.iter().copied().max().unwrap_or(0) {
        for r in 0..channels {
            for (si, &count) in trials_per_session.iter().enumerate() {
                if t >= count {
                    continue;
                }
                if !picks.is_empty() && used + n_samples > budget {
                    return picks;
                }
                picks.push((si, t, (si + r) % channels));
                used += n_samples;
            }
        }
    }
    picks
}

/// Baseline removal, band-pass, running variance, normalization, 5 Hz
/// smoothing, clamping and the activation transform for every trial.
pub fn preprocess(sessions: &[&Session], m: &RunManifest) -> Result<Preprocessed> {
    let spec = FilterSpec::from_manifest(m);
    let mut conditioned = Vec::new();
    for s in sessions {
        for t in &s.trials {
            conditioned.push(condition(&t.emg, &s.rest, &spec, m.variance_window)?);
        }
    }
    let variances: Vec<EmgRecording> = conditioned.iter().map(|c| c.variance.clone()).collect();
    let maxima = fit_maxima(&variances, m.normalization)?;
    let envelopes = variances
        .iter()
        .map(|v| clamp_unit(smooth(&maxima.apply(v)?, &spec)?))
        .collect::<Result<Vec<_>>>()?;

    let (params, fit) = match m.activation {
        ActivationMode::Identity => (ActivationParams::IDENTITY, None),
        ActivationMode::Fit => {
            let fit = fit_to_truth(sessions, &envelopes, m)?;
            (fit.params, Some(fit))
        }
    };
    log::info!(
        "activation alpha={:.4} beta1={:.4} beta2={:.4} delay={}",
        params.alpha,
        params.beta1,
        params.beta2,
        params.delay
    );

    let trials = envelopes
        .into_iter()
        .zip(conditioned)
        .map(|(e, c)| {
            let chs = e
                .channels
                .iter()
                .map(|ch| activate(ch, &params))
                .collect::<Result<_>>()?;
            Ok(ProcessedTrial {
                condition: e.condition,
                activation: e.with_channels(chs)?,
                bandpassed: amplitude_normalize(&c.bandpassed, &maxima)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Preprocessed {
        trials,
        maxima,
        params,
        fit,
    })
}

/// The target of the activation fit is the squared truth envelope put through
/// the same normalization as the EMG (the processed signal is a variance).
/// Trials without truth fall back to the envelope itself.
fn fit_to_truth(
    sessions: &[&Session],
    envelopes: &[EmgRecording],
    m: &RunManifest,
) -> Result<ActivationFit> {
    let mut truth_sq = Vec::new();
    let mut index = Vec::new();
    for (si, s) in sessions.iter().enumerate() {
        for (ti, t) in s.trials.iter().enumerate() {
            if let Some(env) = &t.truth {
                let sq = env
                    .iter()
                    .map(|c| c.iter().map(|v| v * v).collect())
                    .collect();
                truth_sq.push(t.emg.with_channels(sq)?);
                index.push((si, ti));
            }
        }
    }
    let truth_max = if truth_sq.is_empty() {
        None
    } else {
        Some(fit_maxima(&truth_sq, m.normalization)?)
    };

    let offsets: Vec<usize> = sessions
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.trials.len();
            Some(o)
        })
        .collect();
    let counts: Vec<usize> = sessions.iter().map(|s| s.trials.len()).collect();
    let n = envelopes.first().map_or(0, EmgRecording::n_samples);
    let channels = envelopes.first().map_or(0, EmgRecording::n_channels);
    let picks = fit_picks(&counts, channels, n, m.activation_fit_samples);

    let mut targets: Vec<Vec<f64>> = Vec::with_capacity(picks.len());
    for &(si, ti, ch) in &picks {
        let env = &envelopes[offsets[si] + ti];
        let target = match (index.iter().position(|p| *p == (si, ti)), &truth_max) {
            (Some(k), Some(tm)) => tm.apply(&truth_sq[k])?.channels[ch].clone(),
            _ => env.channels[ch].clone(),
        };
        targets.push(target);
    }
    let segments: Vec<(&[f64], &[f64])> = picks
        .iter()
        .zip(&targets)
        .map(|(&(si, ti, ch), y)| {
            (
                envelopes[offsets[si] + ti].channels[ch].as_slice(),
                y.as_slice(),
            )
        })
        .collect();
    fit_activation_segments(&segments, m.activation_max_delay)
}

/// Feature rows of every processed trial, one group per trial.
pub fn extract_all(trials: &[ProcessedTrial], m: &RunManifest) -> Result<FeatureMatrix> {
    let fx = FeatureExtractor::new(m)?;
    let parts = trials
        .iter()
        .map(|t| fx.extract(&t.activation, &t.bandpassed))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::concat(&parts)
}

/// Window-end torque targets in N·m, rows aligned with [`extract_all`].
pub fn torque_targets(sessions: &[&Session], m: &RunManifest) -> Result<Array2<f64>> {
    let lowpass = FilterSpec::from_manifest(m).lowpass()?;
    let mut parts = Vec::new();
    for s in sessions {
        for t in &s.trials {
            let raw = trajectory_torques(&t.markers, m)?;
            let plan = plan_windows(raw.len(), m)?;
            parts.push(window_targets(&raw, &plan, &lowpass)?);
        }
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))
}

/// Condition and recording id of every target row, matching the keys that
/// [`extract_all`] gives feature rows.
pub fn target_keys(sessions: &[&Session], m: &RunManifest) -> Result<(Vec<Condition>, Vec<usize>)> {
    let mut conditions = Vec::new();
    let mut groups = Vec::new();
    let mut g = 0;
    for s in sessions {
        for t in &s.trials {
            let n = plan_windows(t.emg.n_samples(), m)?.n_windows;
            conditions.extend(std::iter::repeat_n(s.condition, n));
            groups.extend(std::iter::repeat_n(g, n));
            g += 1;
        }
    }
    Ok((conditions, groups))
}

/// Columns of `fm` holding time points only.
pub fn time_points_only(fm: &FeatureMatrix) -> FeatureMatrix {
    let keep: Vec<usize> = (0..fm.n_cols())
        .filter(|&j| matches!(fm.columns[j].feature, Feature::TimePoint(_)))
        .collect();
    FeatureMatrix {
        rows: fm.rows.select(Axis(1), &keep),
        columns: keep.iter().map(|&j| fm.columns[j]).collect(),
        conditions: fm.conditions.clone(),
        groups: fm.groups.clone(),
    }
}

/// Features, targets and the fitted preprocessing state of one set of sessions.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub features: FeatureMatrix,
    pub targets: Array2<f64>,
    pub maxima: NormalizationMaxima,
    pub params: ActivationParams,
}

/// Full chain with the manifest's normalization and feature toggles.
pub fn prepare(sessions: &[&Session], m: &RunManifest) -> Result<Prepared> {
    let pre = preprocess(sessions, m)?;
    let features = extract_all(&pre.trials, m)?;
    let targets = torque_targets(sessions, m)?;
    if targets.nrows() != features.n_rows() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} target rows",
            features.n_rows(),
            targets.nrows()
        )));
    }
    Ok(Prepared {
        features,
        targets,
        maxima: pre.maxima,
        params: pre.params,
    })
}

/// `m` with normalization and feature toggles replaced.
pub fn with_mode(m: &RunManifest, mode: NormalizationMode, toggles: FeatureToggles) -> RunManifest {
    let mut m = m.clone();
    m.normalization = mode;
    m.features = toggles;
    m
}
