//! Flat `key=value` run configuration.
//!
//! Every key is optional; absent keys take the defaults below. Lines starting
//! with `#` are comments. Unknown keys and out-of-range values are rejected
//! with a config error naming the key.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{BodyParameters, Sex};
use crate::error::{Error, Result};
use crate::preprocess::NormalizationMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mlp,
    Tcn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Tcn => "tcn",
        }
    }
}

/// Which moment arm the object/hand term of the elbow torque uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForearmLever {
    /// Full forearm length.
    AsPrinted,
    /// Perpendicular forearm distance `x`.
    MomentArmX,
}

impl ForearmLever {
    pub fn as_str(self) -> &'static str {
        match self {
            ForearmLever::AsPrinted => "as_printed",
            ForearmLever::MomentArmX => "moment_arm_x",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationMode {
    /// Fit the recursion coefficients per channel against the envelope files.
    Fit,
    /// Pass the smoothed EMG through unchanged (alpha = 1, no delay).
    Identity,
}

impl ActivationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ActivationMode::Fit => "fit",
            ActivationMode::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureToggles {
    pub time_points: bool,
    pub time_domain: bool,
    pub band_power: bool,
    pub morlet: bool,
}

impl FeatureToggles {
    pub const ALL: FeatureToggles = FeatureToggles {
        time_points: true,
        time_domain: true,
        band_power: true,
        morlet: true,
    };

    pub const TIME_POINTS_ONLY: FeatureToggles = FeatureToggles {
        time_points: true,
        time_domain: false,
        band_power: false,
        morlet: false,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub sample_rate_hz: f64,
    pub filter_order: usize,
    pub low_cut_hz: f64,
    pub high_cut_hz: f64,
    pub smooth_cut_hz: f64,
    pub variance_window: usize,

    pub window_ms: f64,
    pub overlap: f64,
    pub normalization: NormalizationMode,

    pub activation: ActivationMode,
    pub activation_max_delay: usize,
    pub activation_fit_samples: usize,

    pub features: FeatureToggles,
    pub ssc_threshold: f64,
    pub band_count: usize,
    pub mt_time_bandwidth: f64,
    pub mt_tapers: usize,
    pub mwt_freqs: Vec<f64>,
    pub mwt_max_cycles: usize,

    pub test_fraction: f64,
    pub val_fraction: f64,
    pub pca_retain: f64,
    pub history: usize,
    pub weights_kg: Vec<f64>,

    pub model: ModelKind,
    pub mlp_hidden: Vec<usize>,
    pub dropout: f64,
    pub l2: f64,
    pub huber_delta: f64,
    pub loss_epsilon: f64,
    pub tcn_filters: usize,
    pub tcn_kernel: usize,
    pub tcn_dilations: Vec<usize>,
    pub tcn_dense: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seeds: Vec<u64>,

    pub body: BodyParameters,
    pub forearm_lever: ForearmLever,

    pub synth_trial_s: f64,
    pub synth_trials: usize,
    pub synth_noise: f64,
    pub synth_seed: u64,
    pub synth_gain_spread: f64,

    pub data_dir: PathBuf,
    pub work_dir: PathBuf,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            sample_rate_hz: 500.0,
            filter_order: 4,
            low_cut_hz: 15.0,
            high_cut_hz: 225.0,
            smooth_cut_hz: 5.0,
            variance_window: 50,
            window_ms: 100.0,
            overlap: 0.5,
            normalization: NormalizationMode::ConditionSpecific,
            activation: ActivationMode::Fit,
            activation_max_delay: 50,
            activation_fit_samples: 30_000,
            features: FeatureToggles::ALL,
            ssc_threshold: 1e-8,
            band_count: 4,
            mt_time_bandwidth: 2.5,
            mt_tapers: 4,
            mwt_freqs: (0..8).map(|i| 50.0 + 25.0 * i as f64).collect(),
            mwt_max_cycles: 7,
            test_fraction: 0.10,
            val_fraction: 0.15,
            pca_retain: 0.95,
            history: 4,
            weights_kg: vec![0.0, 1.1, 1.85],
            model: ModelKind::Mlp,
            mlp_hidden: vec![128, 64],
            dropout: 0.10,
            l2: 0.001,
            huber_delta: 1.0,
            loss_epsilon: 1e-6,
            tcn_filters: 32,
            tcn_kernel: 3,
            tcn_dilations: vec![1, 2],
            tcn_dense: 64,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            patience: 20,
            seeds: vec![1, 7, 25, 45, 70],
            body: BodyParameters::default(),
            forearm_lever: ForearmLever::AsPrinted,
            synth_trial_s: 10.0,
            synth_trials: 20,
            synth_noise: 0.005,
            synth_seed: 2024,
            synth_gain_spread: 4.0,
            data_dir: PathBuf::from("data"),
            work_dir: PathBuf::from("work"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|p| parse_num(key, p.trim())).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expected true/false, got `{v}`"),
        )),
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunManifest {
    /// Window length in samples.
    pub fn window_len(&self) -> usize {
        (self.window_ms * self.sample_rate_hz / 1000.0).round() as usize
    }

    /// Hop between consecutive windows in samples.
    pub fn hop(&self) -> usize {
        ((self.window_len() as f64) * (1.0 - self.overlap))
            .round()
            .max(1.0) as usize
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = RunManifest::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected key=value, got `{line}`"),
                )
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::config(key, "duplicate key"));
            }
            m.set(key, value)?;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(path.display().to_string())
            } else {
                Error::io(path, e)
            }
        })?;
        Self::parse(&text)
    }

    /// Apply one `key=value` assignment without cross-field validation.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "sample_rate_hz" => self.sample_rate_hz = parse_num(key, v)?,
            "filter_order" => self.filter_order = parse_num(key, v)?,
            "low_cut_hz" => self.low_cut_hz = parse_num(key, v)?,
            "high_cut_hz" => self.high_cut_hz = parse_num(key, v)?,
            "smooth_cut_hz" => self.smooth_cut_hz = parse_num(key, v)?,
            "variance_window" => self.variance_window = parse_num(key, v)?,
            "window_ms" => self.window_ms = parse_num(key, v)?,
            "overlap" => self.overlap = parse_num(key, v)?,
            "normalization" => {
                self.normalization = NormalizationMode::parse(v)
                    .ok_or_else(|| Error::config(key, "expected global or condition"))?
            }
            "activation" => {
                self.activation = match v {
                    "fit" => ActivationMode::Fit,
                    "identity" => ActivationMode::Identity,
                    _ => return Err(Error::config(key, "expected fit or identity")),
                }
            }
            "activation_max_delay" => self.activation_max_delay = parse_num(key, v)?,
            "activation_fit_samples" => self.activation_fit_samples = parse_num(key, v)?,
            "feat_time_points" => self.features.time_points = parse_bool(key, v)?,
            "feat_time_domain" => self.features.time_domain = parse_bool(key, v)?,
            "feat_band_power" => self.features.band_power = parse_bool(key, v)?,
            "feat_morlet" => self.features.morlet = parse_bool(key, v)?,
            "ssc_threshold" => self.ssc_threshold = parse_num(key, v)?,
            "band_count" => self.band_count = parse_num(key, v)?,
            "mt_time_bandwidth" => self.mt_time_bandwidth = parse_num(key, v)?,
            "mt_tapers" => self.mt_tapers = parse_num(key, v)?,
            "mwt_freqs" => self.mwt_freqs = parse_list(key, v)?,
            "mwt_max_cycles" => self.mwt_max_cycles = parse_num(key, v)?,
            "test_fraction" => self.test_fraction = parse_num(key, v)?,
            "val_fraction" => self.val_fraction = parse_num(key, v)?,
            "pca_retain" => self.pca_retain = parse_num(key, v)?,
            "history" => self.history = parse_num(key, v)?,
            "weights_kg" => self.weights_kg = parse_list(key, v)?,
            "model" => {
                self.model = match v {
                    "mlp" => ModelKind::Mlp,
                    "tcn" => ModelKind::Tcn,
                    _ => return Err(Error::config(key, "expected mlp or tcn")),
                }
            }
            "mlp_hidden" => self.mlp_hidden = parse_list(key, v)?,
            "dropout" => self.dropout = parse_num(key, v)?,
            "l2" => self.l2 = parse_num(key, v)?,
            "huber_delta" => self.huber_delta = parse_num(key, v)?,
            "loss_epsilon" => self.loss_epsilon = parse_num(key, v)?,
            "tcn_filters" => self.tcn_filters = parse_num(key, v)?,
            "tcn_kernel" => self.tcn_kernel = parse_num(key, v)?,
            "tcn_dilations" => self.tcn_dilations = parse_list(key, v)?,
            "tcn_dense" => self.tcn_dense = parse_num(key, v)?,
            "learning_rate" => self.learning_rate = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "max_epochs" => self.max_epochs = parse_num(key, v)?,
            "patience" => self.patience = parse_num(key, v)?,
            "seeds" => self.seeds = parse_list(key, v)?,
            "body_mass_kg" => self.body.body_mass_kg = parse_num(key, v)?,
            "sex" => {
                self.body.sex =
                    Sex::parse(v).ok_or_else(|| Error::config(key, "expected male or female"))?
            }
            "hand_length_m" => self.body.hand_length_m = parse_num(key, v)?,
            "upper_arm_length_m" => self.body.upper_arm_length_m = parse_num(key, v)?,
            "forearm_length_m" => self.body.forearm_length_m = parse_num(key, v)?,
            "forearm_lever" => {
                self.forearm_lever = match v {
                    "as_printed" => ForearmLever::AsPrinted,
                    "moment_arm_x" => ForearmLever::MomentArmX,
                    _ => return Err(Error::config(key, "expected as_printed or moment_arm_x")),
                }
            }
            "synth_trial_s" => self.synth_trial_s = parse_num(key, v)?,
            "synth_trials" => self.synth_trials = parse_num(key, v)?,
            "synth_noise" => self.synth_noise = parse_num(key, v)?,
            "synth_seed" => self.synth_seed = parse_num(key, v)?,
            "synth_gain_spread" => self.synth_gain_spread = parse_num(key, v)?,
            "data_dir" => self.data_dir = PathBuf::from(v),
            "work_dir" => self.work_dir = PathBuf::from(v),
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |k: &str, msg: String| Err(Error::config(k, msg));
        let nyquist = self.sample_rate_hz / 2.0;
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return err("sample_rate_hz", "must be positive".into());
        }
        if self.filter_order < 2 || self.filter_order % 2 != 0 || self.filter_order > 16 {
            return err("filter_order", "must be even and in 2..=16".into());
        }
        if !(self.low_cut_hz > 0.0 && self.low_cut_hz < nyquist) {
            return err("low_cut_hz", format!("must lie in (0, {nyquist})"));
        }
        if !(self.high_cut_hz > self.low_cut_hz && self.high_cut_hz < nyquist) {
            return err(
                "high_cut_hz",
                format!("must lie in (low_cut_hz, {nyquist})"),
            );
        }
        if !(self.smooth_cut_hz > 0.0 && self.smooth_cut_hz < nyquist) {
            return err("smooth_cut_hz", format!("must lie in (0, {nyquist})"));
        }
        if self.variance_window < 2 {
            return err("variance_window", "must be at least 2".into());
        }
        if !(self.window_ms > 0.0) || self.window_len() < 3 {
            return err("window_ms", "window must span at least 3 samples".into());
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return err(
                "overlap",
                format!("must lie in [0, 1), got {}", self.overlap),
            );
        }
        if self.activation_max_delay > 1000 {
            return err(
                "activation_max_delay",
                "must be at most 1000 samples".into(),
            );
        }
        if self.activation_fit_samples < 10 {
            return err("activation_fit_samples", "must be at least 10".into());
        }
        let f = self.features;
        if !(f.time_points || f.time_domain || f.band_power || f.morlet) {
            return err(
                "feat_time_points",
                "at least one feature family must be enabled".into(),
            );
        }
        if !(self.ssc_threshold >= 0.0) {
            return err("ssc_threshold", "must be non-negative".into());
        }
        if self.band_count == 0 || self.band_count > 64 {
            return err("band_count", "must be in 1..=64".into());
        }
        if !(self.mt_time_bandwidth > 0.0) {
            return err("mt_time_bandwidth", "must be positive".into());
        }
        if self.mt_tapers == 0 || self.mt_tapers > self.window_len() {
            return err("mt_tapers", "must be in 1..=window length".into());
        }
        if self.mwt_freqs.is_empty() || self.mwt_freqs.iter().any(|&fq| !(fq > 0.0 && fq < nyquist))
        {
            return err(
                "mwt_freqs",
                format!("frequencies must lie in (0, {nyquist})"),
            );
        }
        if self.mwt_max_cycles == 0 {
            return err("mwt_max_cycles", "must be at least 1".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return err("test_fraction", "must lie in (0, 1)".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return err("val_fraction", "must lie in (0, 1)".into());
        }
        if !(self.pca_retain > 0.0 && self.pca_retain <= 1.0) {
            return err("pca_retain", "must lie in (0, 1]".into());
        }
        if self.history > 64 {
            return err("history", "must be at most 64".into());
        }
        if self.weights_kg.is_empty()
            || self
                .weights_kg
                .iter()
                .any(|w| !(*w >= 0.0 && w.is_finite()))
        {
            return err("weights_kg", "need at least one non-negative mass".into());
        }
        if self.mlp_hidden.is_empty() || self.mlp_hidden.contains(&0) {
            return err("mlp_hidden", "layer sizes must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err("dropout", "must lie in [0, 1)".into());
        }
        if !(self.l2 >= 0.0) {
            return err("l2", "must be non-negative".into());
        }
        if !(self.huber_delta > 0.0) {
            return err("huber_delta", "must be positive".into());
        }
        if !(self.loss_epsilon > 0.0) {
            return err("loss_epsilon", "must be positive".into());
        }
        if self.tcn_filters == 0 {
            return err("tcn_filters", "must be at least 1".into());
        }
        if self.tcn_kernel < 2 {
            return err("tcn_kernel", "must be at least 2".into());
        }
        if self.tcn_dilations.is_empty() || self.tcn_dilations.contains(&0) {
            return err("tcn_dilations", "dilations must be at least 1".into());
        }
        if self.tcn_dense == 0 {
            return err("tcn_dense", "must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) {
            return err("learning_rate", "must be positive".into());
        }
        if self.batch_size == 0 {
            return err("batch_size", "must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return err("max_epochs", "must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return err("seeds", "need at least one seed".into());
        }
        self.body.validate()?;
        if !(self.synth_trial_s > 0.0) {
            return err("synth_trial_s", "must be positive".into());
        }
        if self.synth_trials == 0 {
            return err("synth_trials", "must be at least 1".into());
        }
        if !(self.synth_noise >= 0.0) {
            return err("synth_noise", "must be non-negative".into());
        }
        if !(self.synth_gain_spread >= 1.0) {
            return err("synth_gain_spread", "must be at least 1".into());
        }
        Ok(())
    }

    /// Serialize every key. `parse(to_text())` reproduces the manifest exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("sample_rate_hz", self.sample_rate_hz.to_string());
        kv("filter_order", self.filter_order.to_string());
        kv("low_cut_hz", self.low_cut_hz.to_string());
        kv("high_cut_hz", self.high_cut_hz.to_string());
        kv("smooth_cut_hz", self.smooth_cut_hz.to_string());
        kv("variance_window", self.variance_window.to_string());
        kv("window_ms", self.window_ms.to_string());
        kv("overlap", self.overlap.to_string());
        kv("normalization", self.normalization.as_str().into());
        kv("activation", self.activation.as_str().into());
        kv(
            "activation_max_delay",
            self.activation_max_delay.to_string(),
        );
        kv(
            "activation_fit_samples",
            self.activation_fit_samples.to_string(),
        );
        kv("feat_time_points", self.features.time_points.to_string());
        kv("feat_time_domain", self.features.time_domain.to_string());
        kv("feat_band_power", self.features.band_power.to_string());
        kv("feat_morlet", self.features.morlet.to_string());
        kv("ssc_threshold", self.ssc_threshold.to_string());
        kv("band_count", self.band_count.to_string());
        kv("mt_time_bandwidth", self.mt_time_bandwidth.to_string());
        kv("mt_tapers", self.mt_tapers.to_string());
        kv("mwt_freqs", join(&self.mwt_freqs));
        kv("mwt_max_cycles", self.mwt_max_cycles.to_string());
        kv("test_fraction", self.test_fraction.to_string());
        kv("val_fraction", self.val_fraction.to_string());
        kv("pca_retain", self.pca_retain.to_string());
        kv("history", self.history.to_string());
        kv("weights_kg", join(&self.weights_kg));
        kv("model", self.model.as_str().into());
        kv("mlp_hidden", join(&self.mlp_hidden));
        kv("dropout", self.dropout.to_string());
        kv("l2", self.l2.to_string());
        kv("huber_delta", self.huber_delta.to_string());
        kv("loss_epsilon", self.loss_epsilon.to_string());
        kv("tcn_filters", self.tcn_filters.to_string());
        kv("tcn_kernel", self.tcn_kernel.to_string());
        kv("tcn_dilations", join(&self.tcn_dilations));
        kv("tcn_dense", self.tcn_dense.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("max_epochs", self.max_epochs.to_string());
        kv("patience", self.patience.to_string());
        kv("seeds", join(&self.seeds));
        kv("body_mass_kg", self.body.body_mass_kg.to_string());
        kv("sex", self.body.sex.as_str().into());
        kv("hand_length_m", self.body.hand_length_m.to_string());
        kv(
            "upper_arm_length_m",
            self.body.upper_arm_length_m.to_string(),
        );
        kv("forearm_length_m", self.body.forearm_length_m.to_string());
        kv("forearm_lever", self.forearm_lever.as_str().into());
        kv("synth_trial_s", self.synth_trial_s.to_string());
        kv("synth_trials", self.synth_trials.to_string());
        kv("synth_noise", self.synth_noise.to_string());
        kv("synth_seed", self.synth_seed.to_string());
        kv("synth_gain_spread", self.synth_gain_spread.to_string());
        kv("data_dir", self.data_dir.display().to_string());
        kv("work_dir", self.work_dir.display().to_string());
        s
    }

    /// Hex SHA-256 of the serialized manifest, used in provenance lines.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_text().as_bytes());
        hash.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_manifest_yields_defaults() {
        let m = RunManifest::parse("# nothing here\n\n").unwrap();
        assert_eq!(m.window_ms, 100.0);
        assert_eq!(m.overlap, 0.5);
        assert_eq!(m.window_len(), 50);
        assert_eq!(m.hop(), 25);
        assert_eq!(
            (m.low_cut_hz, m.high_cut_hz, m.smooth_cut_hz),
            (15.0, 225.0, 5.0)
        );
        assert_eq!(m.seeds, vec![1, 7, 25, 45, 70]);
        assert_eq!(
            m.mwt_freqs,
            vec![50.0, 75.0, 100.0, 125.0, 150.0, 175.0, 200.0, 225.0]
        );
    }

    #[test]
    fn overlap_out_of_range() {
        let err = RunManifest::parse("overlap=1.2").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "overlap"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunManifest::parse("windw_ms=100").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "windw_ms"));
    }

    #[test]
    fn overrides_apply() {
        let m = RunManifest::parse("normalization=global\nseeds=3,4\nmodel=tcn\n").unwrap();
        assert_eq!(m.normalization, NormalizationMode::Global);
        assert_eq!(m.seeds, vec![3, 4]);
        assert_eq!(m.model, ModelKind::Tcn);
    }

    #[test]
    fn duplicate_key_rejected() {
        assert!(RunManifest::parse("history=2\nhistory=3\n").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(
            overlap in 0.0f64..0.99,
            retain in 0.01f64..=1.0,
            lr in 1e-6f64..1.0,
            seeds in proptest::collection::vec(0u64..10_000, 1..6),
            history in 0usize..10,
            global in any::<bool>(),
        ) {
            let mut m = RunManifest::default();
            m.overlap = overlap;
            m.pca_retain = retain;
            m.learning_rate = lr;
            m.seeds = seeds;
            m.history = history;
            m.normalization = if global { NormalizationMode::Global } else { NormalizationMode::ConditionSpecific };
            let text = m.to_text();
            let back = RunManifest::parse(&text).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(back.to_text(), text);
        }
    }
}
