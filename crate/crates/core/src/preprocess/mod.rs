//! Baseline removal, band-pass, running variance, normalization and the final
//! low-pass, in that order.

pub mod filter;
pub mod normalize;
pub mod variance;

pub use filter::Sos;
pub use normalize::{fit_maxima, normalize, NormalizationMaxima, NormalizationMode};
pub use variance::{running_variance, RunningVariance};

use crate::data::{EmgRecording, RunManifest};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub order: usize,
    pub low_cut_hz: f64,
    pub high_cut_hz: f64,
    pub smooth_cut_hz: f64,
    pub sample_rate_hz: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            order: 4,
            low_cut_hz: 15.0,
            high_cut_hz: 225.0,
            smooth_cut_hz: 5.0,
            sample_rate_hz: 500.0,
        }
    }
}

impl FilterSpec {
    pub fn from_manifest(m: &RunManifest) -> Self {
        Self {
            order: m.filter_order,
            low_cut_hz: m.low_cut_hz,
            high_cut_hz: m.high_cut_hz,
            smooth_cut_hz: m.smooth_cut_hz,
            sample_rate_hz: m.sample_rate_hz,
        }
    }

    pub fn bandpass(&self) -> Result<Sos> {
        Sos::bandpass(
            self.order,
            self.low_cut_hz,
            self.high_cut_hz,
            self.sample_rate_hz,
        )
    }

    pub fn lowpass(&self) -> Result<Sos> {
        Sos::lowpass(self.order, self.smooth_cut_hz, self.sample_rate_hz)
    }
}

/// Subtract the rest recording's per-channel mean.
pub fn remove_baseline(raw: &EmgRecording, rest: &EmgRecording) -> Result<EmgRecording> {
    if raw.n_channels() != rest.n_channels() {
        return Err(Error::Shape(format!(
            "rest recording has {} channels, task recording has {}",
            rest.n_channels(),
            raw.n_channels()
        )));
    }
    if raw.sample_rate_hz != rest.sample_rate_hz {
        return Err(Error::Shape(format!(
            "rest recording at {} Hz, task recording at {} Hz",
            rest.sample_rate_hz, raw.sample_rate_hz
        )));
    }
    if rest.n_samples() == 0 {
        return Err(Error::Empty("rest recording has no samples".into()));
    }
    let channels = raw
        .channels
        .iter()
        .zip(&rest.channels)
        .map(|(ch, r)| {
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            ch.iter().map(|v| v - mean).collect()
        })
        .collect();
    raw.with_channels(channels)
}

pub fn bandpass_zero_phase(x: &[f64], spec: &FilterSpec) -> Result<Vec<f64>> {
    spec.bandpass()?.filtfilt(x)
}

pub fn lowpass_smooth(x: &[f64], spec: &FilterSpec) -> Result<Vec<f64>> {
    spec.lowpass()?.filtfilt(x)
}

fn map_channels(
    rec: &EmgRecording,
    f: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<EmgRecording> {
    let channels = rec.channels.iter().map(|c| f(c)).collect::<Result<_>>()?;
    rec.with_channels(channels)
}

/// Stages before normalization: the band-passed tap and its running variance.
#[derive(Debug, Clone)]
pub struct Conditioned {
    pub bandpassed: EmgRecording,
    pub variance: EmgRecording,
}

pub fn condition(
    raw: &EmgRecording,
    rest: &EmgRecording,
    spec: &FilterSpec,
    variance_window: usize,
) -> Result<Conditioned> {
    let centred = remove_baseline(raw, rest)?;
    let bp = spec.bandpass()?;
    let bandpassed = map_channels(&centred, |c| bp.filtfilt(c))?;
    let variance = map_channels(&bandpassed, |c| running_variance(c, variance_window))?;
    Ok(Conditioned {
        bandpassed,
        variance,
    })
}

/// Final 5 Hz smoothing of normalized recordings.
pub fn smooth(rec: &EmgRecording, spec: &FilterSpec) -> Result<EmgRecording> {
    let lp = spec.lowpass()?;
    map_channels(rec, |c| lp.filtfilt(c))
}
