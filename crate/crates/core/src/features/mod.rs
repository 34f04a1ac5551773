//! Sliding-window segmentation and per-window feature extraction.

pub mod morlet;
pub mod multitaper;
pub mod time_domain;

use std::fmt;

use ndarray::Array2;

use crate::data::{Condition, EmgRecording, RunManifest};
use crate::error::{Error, Result};

pub use morlet::{morlet_power, MorletBank};
pub use multitaper::{dpss, equal_bands, Multitaper};
pub use time_domain::{rms, slope_sign_changes, waveform_length};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPlan {
    pub window_len: usize,
    pub hop: usize,
    pub n_windows: usize,
}

impl WindowPlan {
    pub fn new(n_samples: usize, window_len: usize, hop: usize) -> Result<Self> {
        if window_len == 0 || hop == 0 {
            return Err(Error::Parameter(
                "window length and hop must be positive".into(),
            ));
        }
        if n_samples < window_len {
            return Err(Error::Length(format!(
                "{n_samples} samples cannot hold one {window_len}-sample window"
            )));
        }
        Ok(Self {
            window_len,
            hop,
            n_windows: (n_samples - window_len) / hop + 1,
        })
    }

    pub fn start(&self, w: usize) -> usize {
        w * self.hop
    }

    /// Index of the last sample covered by window `w`.
    pub fn last(&self, w: usize) -> usize {
        w * self.hop + self.window_len - 1
    }

    pub fn range(&self, w: usize) -> std::ops::Range<usize> {
        self.start(w)..self.start(w) + self.window_len
    }
}

pub fn plan_windows(n_samples: usize, m: &RunManifest) -> Result<WindowPlan> {
    WindowPlan::new(n_samples, m.window_len(), m.hop())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feature {
    TimePoint(usize),
    Rms,
    WaveformLength,
    SlopeSignChanges,
    BandPower { lo_hz: f64, hi_hz: f64 },
    Morlet { freq_hz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Column {
    pub channel: usize,
    pub feature: Feature,
}

impl Column {
    /// Inverse of the `Display` form, e.g. `ch3_tp12` or `ch1_bp15-67.5`.
    pub fn parse(name: &str) -> Option<Self> {
        let (ch, rest) = name.strip_prefix("ch")?.split_once('_')?;
        let channel = ch.parse::<usize>().ok()?.checked_sub(1)?;
        let feature = match rest {
            "rms" => Feature::Rms,
            "wl" => Feature::WaveformLength,
            "ssc" => Feature::SlopeSignChanges,
            _ => {
                if let Some(i) = rest.strip_prefix("tp") {
                    Feature::TimePoint(i.parse().ok()?)
                } else if let Some(f) = rest.strip_prefix("mwt") {
                    Feature::Morlet {
                        freq_hz: f.parse().ok()?,
                    }
                } else {
                    let (lo, hi) = rest.strip_prefix("bp")?.split_once('-')?;
                    Feature::BandPower {
                        lo_hz: lo.parse().ok()?,
                        hi_hz: hi.parse().ok()?,
                    }
                }
            }
        };
        Some(Self { channel, feature })
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ch = self.channel + 1;
        match self.feature {
            Feature::TimePoint(i) => write!(f, "ch{ch}_tp{i}"),
            Feature::Rms => write!(f, "ch{ch}_rms"),
            Feature::WaveformLength => write!(f, "ch{ch}_wl"),
            Feature::SlopeSignChanges => write!(f, "ch{ch}_ssc"),
            Feature::BandPower { lo_hz, hi_hz } => write!(f, "ch{ch}_bp{lo_hz}-{hi_hz}"),
            Feature::Morlet { freq_hz } => write!(f, "ch{ch}_mwt{freq_hz}"),
        }
    }
}

/// Windowed feature rows. `group` identifies the source recording of each
/// row so later stages never stack windows across recordings.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Array2<f64>,
    pub columns: Vec<Column>,
    pub conditions: Vec<Condition>,
    pub groups: Vec<usize>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.rows.ncols()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(Column::to_string).collect()
    }

    /// Stack matrices with identical schemas, renumbering groups.
    pub fn concat(parts: &[FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Empty("no feature matrices to concatenate".into()))?;
        let mut views = Vec::with_capacity(parts.len());
        let mut conditions = Vec::new();
        let mut groups = Vec::new();
        let mut offset = 0;
        for p in parts {
            if p.columns != first.columns {
                return Err(Error::Shape(
                    "feature matrices have different columns".into(),
                ));
            }
            views.push(p.rows.view());
            conditions.extend_from_slice(&p.conditions);
            let max = p.groups.iter().copied().max().map_or(0, |g| g + 1);
            groups.extend(p.groups.iter().map(|g| g + offset));
            offset += max;
        }
        let rows = ndarray::concatenate(ndarray::Axis(0), &views)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(FeatureMatrix {
            rows,
            columns: first.columns.clone(),
            conditions,
            groups,
        })
    }
}

/// Reusable extractor holding the taper and wavelet banks.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    pub toggles: crate::data::manifest::FeatureToggles,
    pub ssc_threshold: f64,
    pub window_len: usize,
    pub hop: usize,
    pub bands: Vec<(f64, f64)>,
    multitaper: Multitaper,
    morlet: MorletBank,
}

impl FeatureExtractor {
    pub fn new(m: &RunManifest) -> Result<Self> {
        let n = m.window_len();
        Ok(Self {
            toggles: m.features,
            ssc_threshold: m.ssc_threshold,
            window_len: n,
            hop: m.hop(),
            bands: equal_bands(m.low_cut_hz, m.high_cut_hz, m.band_count),
            multitaper: Multitaper::new(n, m.mt_time_bandwidth, m.mt_tapers, m.sample_rate_hz)?,
            morlet: MorletBank::auto(&m.mwt_freqs, m.sample_rate_hz, n, m.mwt_max_cycles)?,
        })
    }

    pub fn columns(&self, n_channels: usize) -> Vec<Column> {
        let t = self.toggles;
        let mut cols = Vec::new();
        for channel in 0..n_channels {
            let mut push = |feature| cols.push(Column { channel, feature });
            if t.time_points {
                (0..self.window_len).for_each(|i| push(Feature::TimePoint(i)));
            }
            if t.time_domain {
                push(Feature::Rms);
                push(Feature::WaveformLength);
                push(Feature::SlopeSignChanges);
            }
            if t.band_power {
                for &(lo_hz, hi_hz) in &self.bands {
                    push(Feature::BandPower { lo_hz, hi_hz });
                }
            }
            if t.morlet {
                for &freq_hz in &self.morlet.freqs {
                    push(Feature::Morlet { freq_hz });
                }
            }
        }
        cols
    }

    /// Features of one recording. Time points, RMS, WL and SSC read
    /// `activation`; band power and wavelet power read `bandpassed`.
    pub fn extract(
        &self,
        activation: &EmgRecording,
        bandpassed: &EmgRecording,
    ) -> Result<FeatureMatrix> {
        if activation.n_samples() != bandpassed.n_samples()
            || activation.n_channels() != bandpassed.n_channels()
        {
            return Err(Error::Shape(format!(
                "activation signal is {}x{}, band-passed tap is {}x{}",
                activation.n_channels(),
                activation.n_samples(),
                bandpassed.n_channels(),
                bandpassed.n_samples()
            )));
        }
        let plan = WindowPlan::new(activation.n_samples(), self.window_len, self.hop)?;
        let columns = self.columns(activation.n_channels());
        let mut rows = Array2::<f64>::zeros((plan.n_windows, columns.len()));
        let t = self.toggles;
        for w in 0..plan.n_windows {
            let r = plan.range(w);
            let mut row = Vec::with_capacity(columns.len());
            for (act, bp) in activation.channels.iter().zip(&bandpassed.channels) {
                let a = &act[r.clone()];
                let b = &bp[r.clone()];
                if t.time_points {
                    row.extend_from_slice(a);
                }
                if t.time_domain {
                    row.push(rms(a)?);
                    row.push(waveform_length(a)?);
                    row.push(slope_sign_changes(a, self.ssc_threshold)? as f64);
                }
                if t.band_power {
                    row.extend(self.multitaper.band_power(b, &self.bands)?);
                }
                if t.morlet {
                    row.extend(self.morlet.power(b)?);
                }
            }
            rows.row_mut(w)
                .iter_mut()
                .zip(row)
                .for_each(|(dst, v)| *dst = v);
        }
        if let Some(bad) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                row: bad / columns.len(),
                msg: "non-finite feature".into(),
            });
        }
        Ok(FeatureMatrix {
            rows,
            columns,
            conditions: vec![activation.condition; plan.n_windows],
            groups: vec![0; plan.n_windows],
        })
    }
}

pub fn extract_features(
    activation: &EmgRecording,
    bandpassed: &EmgRecording,
    m: &RunManifest,
) -> Result<FeatureMatrix> {
    FeatureExtractor::new(m)?.extract(activation, bandpassed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::manifest::FeatureToggles;
    use crate::data::Movement;

    #[test]
    fn column_names_round_trip() {
        let m = RunManifest::default();
        let fx = FeatureExtractor::new(&m).unwrap();
        for c in fx.columns(8) {
            assert_eq!(Column::parse(&c.to_string()), Some(c), "{c}");
        }
        assert_eq!(Column::parse("ch0_rms"), None);
        assert_eq!(Column::parse("ch2_zz"), None);
    }

    #[test]
    fn plan_counts() {
        assert_eq!(WindowPlan::new(5000, 50, 25).unwrap().n_windows, 199);
        assert_eq!(WindowPlan::new(50, 50, 25).unwrap().n_windows, 1);
        assert_eq!(
            WindowPlan::new(49, 50, 25).unwrap_err().category(),
            "length"
        );
    }

    fn recording(n: usize) -> EmgRecording {
        let chs = (0..8)
            .map(|c| (0..n).map(|t| ((t * (c + 3)) % 17) as f64 / 17.0).collect())
            .collect();
        EmgRecording::new(
            500.0,
            EmgRecording::default_names(8),
            chs,
            Condition::new(0.0, Movement::Complex).unwrap(),
            false,
        )
        .unwrap()
    }

    #[test]
    fn column_accounting() {
        let mut m = RunManifest::default();
        let r = recording(300);
        let full = extract_features(&r, &r, &m).unwrap();
        assert_eq!(full.n_cols(), 520);
        assert_eq!(full.n_rows(), 11);
        m.features = FeatureToggles::TIME_POINTS_ONLY;
        let tp = extract_features(&r, &r, &m).unwrap();
        assert_eq!(tp.n_cols(), 400);
        assert!(full.column_names().iter().all(|c| !c.contains("mav")));
    }
}
