//! Prediction filtering, metrics and the Table III experiment grid.

pub mod filters;
pub mod metrics;
pub mod report;

use std::fmt;

use crate::data::manifest::{FeatureToggles, ModelKind};
use crate::error::{Error, Result};
use crate::preprocess::NormalizationMode;
pub use filters::{filter_predictions, Filtered};
pub use metrics::{pearson, r2, rmse, score, JointScore};

pub const JOINTS: [&str; 3] = ["elbow", "front_shoulder", "side_shoulder"];

/// Feature condition of the grid: A = global normalization with all
/// features, B = condition-specific normalization with all features,
/// C = time points only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureCondition {
    A,
    B,
    C,
}

impl FeatureCondition {
    pub fn normalization(self) -> NormalizationMode {
        match self {
            FeatureCondition::A => NormalizationMode::Global,
            FeatureCondition::B | FeatureCondition::C => NormalizationMode::ConditionSpecific,
        }
    }

    pub fn toggles(self) -> FeatureToggles {
        match self {
            FeatureCondition::A | FeatureCondition::B => FeatureToggles::ALL,
            FeatureCondition::C => FeatureToggles::TIME_POINTS_ONLY,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "A" | "a" => Some(FeatureCondition::A),
            "B" | "b" => Some(FeatureCondition::B),
            "C" | "c" => Some(FeatureCondition::C),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureCondition::A => "A",
            FeatureCondition::B => "B",
            FeatureCondition::C => "C",
        };
        f.write_str(s)
    }
}

/// One (model, object weights, feature condition) experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub model: ModelKind,
    pub weights_kg: Vec<f64>,
    pub condition: FeatureCondition,
}

impl Cell {
    pub fn new(model: ModelKind, weights_kg: &[f64], condition: FeatureCondition) -> Self {
        Self {
            model,
            weights_kg: weights_kg.to_vec(),
            condition,
        }
    }

    /// `1.1+1.85` style label of the weight set.
    pub fn weights_label(&self) -> String {
        self.weights_kg
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join("+")
    }

    pub fn id(&self) -> String {
        format!(
            "{}_{}_{}",
            self.model.as_str(),
            self.weights_label(),
            self.condition
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grid {
    /// The seven cells of Table III.
    Table3,
    /// The cells the acceptance run needs: MLP A and B and TCN C on all weights.
    Core,
}

impl Grid {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "table3" => Ok(Grid::Table3),
            "core" => Ok(Grid::Core),
            _ => Err(Error::config(
                "grid",
                format!("unknown grid {s:?}, expected table3 or core"),
            )),
        }
    }

    pub fn cells(self, all_weights: &[f64]) -> Vec<Cell> {
        let loaded: Vec<f64> = all_weights.iter().copied().filter(|w| *w > 0.0).collect();
        let (m, t) = (ModelKind::Mlp, ModelKind::Tcn);
        use FeatureCondition::*;
        match self {
            Grid::Table3 => vec![
                Cell::new(m, &loaded, A),
                Cell::new(m, &loaded, B),
                Cell::new(m, all_weights, A),
                Cell::new(m, all_weights, B),
                Cell::new(t, &loaded, C),
                Cell::new(t, all_weights, C),
                Cell::new(t, all_weights, B),
            ],
            Grid::Core => vec![
                Cell::new(m, all_weights, A),
                Cell::new(m, all_weights, B),
                Cell::new(t, all_weights, C),
            ],
        }
    }
}

/// Test-set outcome of one seed of one cell, in N·m.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub scores: [JointScore; 3],
    /// Filtered predictions per joint over the test rows.
    pub predictions: [Vec<f64>; 3],
    pub targets: [Vec<f64>; 3],
    pub epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(x: &[f64]) -> Self {
        if x.is_empty() {
            return Self::default();
        }
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSummary {
    pub rmse: MeanStd,
    pub r2: MeanStd,
    pub rho: MeanStd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub cell: Cell,
    pub seeds: Vec<SeedResult>,
    pub joints: [JointSummary; 3],
}

impl CellReport {
    pub fn new(cell: Cell, mut seeds: Vec<SeedResult>) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::Protocol(format!(
                "cell {} has no seed results",
                cell.id()
            )));
        }
        seeds.sort_by_key(|s| s.seed);
        let joints = [0, 1, 2].map(|j| {
            let pick = |f: fn(&JointScore) -> f64| {
                MeanStd::of(&seeds.iter().map(|s| f(&s.scores[j])).collect::<Vec<_>>())
            };
            JointSummary {
                rmse: pick(|s| s.rmse),
                r2: pick(|s| s.r2),
                rho: pick(|s| s.rho),
            }
        });
        Ok(Self {
            cell,
            seeds,
            joints,
        })
    }

    pub fn mean_r2(&self) -> f64 {
        self.joints.iter().map(|j| j.r2.mean).sum::<f64>() / 3.0
    }
}
