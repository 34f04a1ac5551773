//! On-disk forms of the intermediate stages used by the CLI.
//!
//! Feature and target files share three leading columns, `weight_kg`,
//! `movement` (index into [`Movement::ALL`]) and `group` (recording id), so
//! `train` can check that both files describe the same windows.

use std::path::Path;

use ndarray::Array2;

use super::{Preprocessed, ProcessedTrial};
use crate::activation::ActivationParams;
use crate::data::csvio::{format_emg, format_table, load_emg_csv, read_table, write_text, Table};
use crate::data::{Condition, Movement};
use crate::error::{Error, Result};
use crate::eval::JOINTS;
use crate::features::{Column, FeatureMatrix};
use crate::preprocess::NormalizationMaxima;

const KEYS: [&str; 3] = ["weight_kg", "movement", "group"];

fn key_columns(conditions: &[Condition], groups: &[usize]) -> Vec<Vec<f64>> {
    vec![
        conditions.iter().map(|c| c.weight_kg).collect(),
        conditions
            .iter()
            .map(|c| {
                Movement::ALL
                    .iter()
                    .position(|m| *m == c.movement)
                    .unwrap_or(0) as f64
            })
            .collect(),
        groups.iter().map(|g| *g as f64).collect(),
    ]
}

fn parse_keys(table: &Table, what: &str) -> Result<(Vec<Condition>, Vec<usize>)> {
    if table.header.len() < 3 || table.header[..3] != KEYS {
        return Err(Error::Schema(format!(
            "{what} must start with columns {}",
            KEYS.join(",")
        )));
    }
    let mut conditions = Vec::with_capacity(table.n_rows());
    for (row, (&w, &mv)) in table.columns[0].iter().zip(&table.columns[1]).enumerate() {
        let movement = Movement::ALL
            .get(mv as usize)
            .filter(|_| mv.fract() == 0.0 && mv >= 0.0)
            .ok_or_else(|| Error::Data {
                row,
                msg: format!("movement index {mv} out of range"),
            })?;
        conditions.push(Condition::new(w, *movement).map_err(|e| Error::Data {
            row,
            msg: e.to_string(),
        })?);
    }
    let groups = table.columns[2].iter().map(|g| *g as usize).collect();
    Ok((conditions, groups))
}

fn matrix_columns(x: &Array2<f64>) -> Vec<Vec<f64>> {
    x.columns().into_iter().map(|c| c.to_vec()).collect()
}

fn columns_matrix(cols: &[Vec<f64>], rows: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols.len()), |(i, j)| cols[j][i])
}

pub fn write_features(path: &Path, fm: &FeatureMatrix) -> Result<()> {
    let mut header: Vec<String> = KEYS.map(String::from).to_vec();
    header.extend(fm.column_names());
    let mut cols = key_columns(&fm.conditions, &fm.groups);
    cols.extend(matrix_columns(&fm.rows));
    write_text(
        path,
        &format_table(&[("kind", "features".into())], &header, &cols),
    )
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    let table = read_table(path)?;
    let (conditions, groups) = parse_keys(&table, "feature file")?;
    let columns = table.header[3..]
        .iter()
        .map(|h| {
            Column::parse(h).ok_or_else(|| Error::Schema(format!("unknown feature column {h:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if columns.is_empty() {
        return Err(Error::Schema("feature file has no feature columns".into()));
    }
    Ok(FeatureMatrix {
        rows: columns_matrix(&table.columns[3..], table.n_rows()),
        columns,
        conditions,
        groups,
    })
}

pub fn write_targets(
    path: &Path,
    targets: &Array2<f64>,
    conditions: &[Condition],
    groups: &[usize],
) -> Result<()> {
    let mut header: Vec<String> = KEYS.map(String::from).to_vec();
    header.extend(JOINTS.map(String::from));
    let mut cols = key_columns(conditions, groups);
    cols.extend(matrix_columns(targets));
    write_text(
        path,
        &format_table(
            &[("kind", "targets".into()), ("unit", "N·m".into())],
            &header,
            &cols,
        ),
    )
}

/// Targets with their row keys.
pub fn load_targets(path: &Path) -> Result<(Array2<f64>, Vec<Condition>, Vec<usize>)> {
    let table = read_table(path)?;
    let (conditions, groups) = parse_keys(&table, "target file")?;
    if table.header[3..] != JOINTS {
        return Err(Error::Schema(format!(
            "target file must have columns {}",
            JOINTS.join(",")
        )));
    }
    Ok((
        columns_matrix(&table.columns[3..], table.n_rows()),
        conditions,
        groups,
    ))
}

fn stem(t: &ProcessedTrial, i: usize) -> String {
    match t.activation.trial {
        Some(n) => format!("{}_t{n:02}", t.condition.label()),
        None => format!("{}_r{i:03}", t.condition.label()),
    }
}

fn state_text(pre: &Preprocessed) -> String {
    let p = &pre.params;
    let mut s = format!(
        "alpha={}\nbeta1={}\nbeta2={}\ndelay={}\nnormalization={}\n",
        p.alpha,
        p.beta1,
        p.beta2,
        p.delay,
        pre.maxima.mode().as_str()
    );
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    match &pre.maxima {
        NormalizationMaxima::Global(v) => s.push_str(&format!("max.global={}\n", join(v))),
        NormalizationMaxima::PerCondition(map) => {
            for (c, v) in map {
                s.push_str(&format!("max.{}={}\n", c.label(), join(v)));
            }
        }
    }
    s
}

/// Activation and band-passed signals of every trial, an index of the trial
/// files in pipeline order, and the fitted normalization and activation state.
pub fn write_preprocessed(dir: &Path, pre: &Preprocessed) -> Result<()> {
    let mut index = String::new();
    for (i, t) in pre.trials.iter().enumerate() {
        let s = stem(t, i);
        write_text(
            &dir.join(format!("{s}_activation.csv")),
            &format_emg(&t.activation),
        )?;
        write_text(
            &dir.join(format!("{s}_bandpassed.csv")),
            &format_emg(&t.bandpassed),
        )?;
        index.push_str(&s);
        index.push('\n');
    }
    write_text(&dir.join("trials.txt"), &index)?;
    write_text(&dir.join("state.txt"), &state_text(pre))
}

/// Trials written by [`write_preprocessed`], in index order, with the
/// activation parameters from the state file.
pub fn load_preprocessed(dir: &Path) -> Result<(Vec<ProcessedTrial>, ActivationParams)> {
    let index_path = dir.join("trials.txt");
    let index = std::fs::read_to_string(&index_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(index_path.display().to_string()),
        _ => Error::io(&index_path, e),
    })?;
    let mut trials = Vec::new();
    for s in index.lines().filter(|l| !l.trim().is_empty()) {
        let activation = load_emg_csv(&dir.join(format!("{s}_activation.csv")))?;
        let bandpassed = load_emg_csv(&dir.join(format!("{s}_bandpassed.csv")))?;
        trials.push(ProcessedTrial {
            condition: activation.condition,
            activation,
            bandpassed,
        });
    }
    if trials.is_empty() {
        return Err(Error::MissingInput(format!(
            "{} lists no trials",
            index_path.display()
        )));
    }
    let state_path = dir.join("state.txt");
    let state = std::fs::read_to_string(&state_path).map_err(|e| Error::io(&state_path, e))?;
    let get = |k: &str| -> Result<f64> {
        state
            .lines()
            .find_map(|l| l.strip_prefix(k).and_then(|r| r.strip_prefix('=')))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Schema(format!("state file lacks a numeric `{k}`")))
    };
    let params = ActivationParams::new(
        get("alpha")?,
        get("beta1")?,
        get("beta2")?,
        get("delay")? as usize,
    )?;
    Ok((trials, params))
}
