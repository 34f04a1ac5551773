//! Shared domain types: recordings, marker trajectories, conditions and body
//! parameters, plus the on-disk formats in [`csvio`] and the run
//! configuration in [`manifest`].

pub mod csvio;
pub mod layout;
pub mod manifest;

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};

pub use manifest::RunManifest;

/// Number of EMG channels in a standard recording.
pub const EMG_CHANNELS: usize = 8;

/// Marker names in file order.
pub const MARKER_NAMES: [&str; 6] = [
    "l_shoulder",
    "r_shoulder",
    "l_elbow",
    "r_elbow",
    "l_wrist",
    "r_wrist",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Movement {
    Grasping,
    Complex,
}

impl Movement {
    pub const ALL: [Movement; 2] = [Movement::Grasping, Movement::Complex];

    pub fn as_str(self) -> &'static str {
        match self {
            Movement::Grasping => "grasping",
            Movement::Complex => "complex",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "grasping" => Some(Movement::Grasping),
            "complex" => Some(Movement::Complex),
            _ => None,
        }
    }
}

impl fmt::Display for Movement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Load and movement type of one block of trials.
///
/// Equality, hashing and ordering go through [`Condition::key`], which
/// quantizes the mass to milligrams so that `1.1` and `1.10` compare equal.
#[derive(Debug, Clone, Copy)]
pub struct Condition {
    pub weight_kg: f64,
    pub movement: Movement,
}

impl Condition {
    pub fn new(weight_kg: f64, movement: Movement) -> Result<Self> {
        if !weight_kg.is_finite() || weight_kg < 0.0 {
            return Err(Error::Parameter(format!(
                "condition weight must be a finite non-negative mass, got {weight_kg}"
            )));
        }
        Ok(Self {
            weight_kg,
            movement,
        })
    }

    pub fn key(&self) -> (i64, Movement) {
        ((self.weight_kg * 1e6).round() as i64, self.movement)
    }

    /// Short label used in file names and reports, e.g. `1.1kg-grasping`.
    pub fn label(&self) -> String {
        format!("{}kg-{}", self.weight_kg, self.movement)
    }
}

impl PartialEq for Condition {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Condition {}

impl Hash for Condition {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl PartialOrd for Condition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Condition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Multi-channel EMG in millivolts, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmgRecording {
    pub sample_rate_hz: f64,
    pub channel_names: Vec<String>,
    pub channels: Vec<Vec<f64>>,
    pub condition: Condition,
    pub is_rest: bool,
    pub trial: Option<usize>,
}

impl EmgRecording {
    pub fn new(
        sample_rate_hz: f64,
        channel_names: Vec<String>,
        channels: Vec<Vec<f64>>,
        condition: Condition,
        is_rest: bool,
    ) -> Result<Self> {
        let rec = Self {
            sample_rate_hz,
            channel_names,
            channels,
            condition,
            is_rest,
            trial: None,
        };
        rec.validate()?;
        Ok(rec)
    }

    /// Default channel names `ch1..chN`.
    pub fn default_names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("ch{i}")).collect()
    }

    pub fn with_trial(mut self, trial: usize) -> Self {
        self.trial = Some(trial);
        self
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    /// Same metadata, new sample data. Used by every processing stage.
    pub fn with_channels(&self, channels: Vec<Vec<f64>>) -> Result<Self> {
        let rec = Self {
            sample_rate_hz: self.sample_rate_hz,
            channel_names: self.channel_names.clone(),
            channels,
            condition: self.condition,
            is_rest: self.is_rest,
            trial: self.trial,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Parameter(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if self.channel_names.len() != self.channels.len() {
            return Err(Error::Shape(format!(
                "{} channel names for {} channels",
                self.channel_names.len(),
                self.channels.len()
            )));
        }
        let n = self.n_samples();
        for (c, ch) in self.channels.iter().enumerate() {
            if ch.len() != n {
                return Err(Error::Shape(format!(
                    "channel {} has {} samples, expected {n}",
                    self.channel_names[c],
                    ch.len()
                )));
            }
            if let Some(row) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data {
                    row,
                    msg: format!("non-finite sample in channel {}", self.channel_names[c]),
                });
            }
        }
        Ok(())
    }
}

/// Six-marker 3D trajectory in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerTrajectory {
    pub sample_rate_hz: f64,
    pub positions: Vec<[[f64; 3]; 6]>,
    pub condition: Condition,
    pub trial: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    LeftShoulder = 0,
    RightShoulder = 1,
    LeftElbow = 2,
    RightElbow = 3,
    LeftWrist = 4,
    RightWrist = 5,
}

impl MarkerTrajectory {
    pub fn new(
        sample_rate_hz: f64,
        positions: Vec<[[f64; 3]; 6]>,
        condition: Condition,
    ) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Parameter(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(row) = positions
            .iter()
            .position(|p| p.iter().flatten().any(|v| !v.is_finite()))
        {
            return Err(Error::Data {
                row,
                msg: "non-finite marker coordinate".into(),
            });
        }
        Ok(Self {
            sample_rate_hz,
            positions,
            condition,
            trial: None,
        })
    }

    pub fn with_trial(mut self, trial: usize) -> Self {
        self.trial = Some(trial);
        self
    }

    pub fn n_samples(&self) -> usize {
        self.positions.len()
    }

    pub fn at(&self, t: usize, marker: Marker) -> [f64; 3] {
        self.positions[t][marker as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" => Some(Sex::Male),
            "female" => Some(Sex::Female),
            _ => None,
        }
    }
}

/// Subject anthropometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyParameters {
    pub body_mass_kg: f64,
    pub sex: Sex,
    pub hand_length_m: f64,
    pub upper_arm_length_m: f64,
    pub forearm_length_m: f64,
}

impl Default for BodyParameters {
    fn default() -> Self {
        Self {
            body_mass_kg: 70.0,
            sex: Sex::Male,
            hand_length_m: 0.09,
            upper_arm_length_m: 0.30,
            forearm_length_m: 0.27,
        }
    }
}

impl BodyParameters {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("body_mass_kg", self.body_mass_kg),
            ("hand_length_m", self.hand_length_m),
            ("upper_arm_length_m", self.upper_arm_length_m),
            ("forearm_length_m", self.forearm_length_m),
        ];
        for (key, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    key,
                    format!("must be strictly positive, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_equality_ignores_float_spelling() {
        let a = Condition::new(1.1, Movement::Grasping).unwrap();
        let b = Condition::new("1.10".parse().unwrap(), Movement::Grasping).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Condition::new(1.1, Movement::Complex).unwrap());
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(Condition::new(-0.5, Movement::Complex).is_err());
        assert!(Condition::new(f64::NAN, Movement::Complex).is_err());
    }

    #[test]
    fn recording_rejects_ragged_channels() {
        let cond = Condition::new(0.0, Movement::Grasping).unwrap();
        let err = EmgRecording::new(
            500.0,
            EmgRecording::default_names(2),
            vec![vec![0.0; 4], vec![0.0; 3]],
            cond,
            false,
        )
        .unwrap_err();
        assert_eq!(err.category(), "shape");
    }

    #[test]
    fn body_parameters_must_be_positive() {
        let mut body = BodyParameters::default();
        assert!(body.validate().is_ok());
        body.forearm_length_m = 0.0;
        assert!(body.validate().is_err());
    }
}
