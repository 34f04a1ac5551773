//! CSV readers and writers for EMG, marker and envelope files.
//!
//! Every file starts with a block of `#key=value` comment lines carrying the
//! recording metadata, followed by a header row and numeric rows:
//!
//! ```text
//! #rate_hz=500
//! #weight_kg=1.1
//! #movement=grasping
//! #rest=false
//! #trial=3
//! ch1,ch2,ch3,ch4,ch5,ch6,ch7,ch8
//! 0.012,-0.031,...
//! ```
//!
//! `#trial` is optional. Marker files use the columns `<marker>_{x,y,z}` in
//! [`MARKER_NAMES`] order. Floats are written in Rust's shortest round-trip
//! representation, so load/write cycles are bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Condition, EmgRecording, MarkerTrajectory, Movement, EMG_CHANNELS, MARKER_NAMES};
use crate::error::{Error, Result};

/// Parsed comment block plus numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

/// Recording metadata shared by all three file kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordingMeta {
    pub rate_hz: f64,
    pub condition: Condition,
    pub is_rest: bool,
    pub trial: Option<usize>,
}

impl RecordingMeta {
    fn to_pairs(self) -> Vec<(&'static str, String)> {
        let mut pairs = vec![
            ("rate_hz", self.rate_hz.to_string()),
            ("weight_kg", self.condition.weight_kg.to_string()),
            ("movement", self.condition.movement.as_str().to_string()),
            ("rest", self.is_rest.to_string()),
        ];
        if let Some(t) = self.trial {
            pairs.push(("trial", t.to_string()));
        }
        pairs
    }

    fn from_map(meta: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| {
            meta.get(k)
                .ok_or_else(|| Error::Schema(format!("missing `#{k}=` header line")))
        };
        let rate_hz: f64 = get("rate_hz")?
            .parse()
            .map_err(|_| Error::Schema("`rate_hz` is not a number".into()))?;
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::Schema(format!(
                "`rate_hz` must be positive, got {rate_hz}"
            )));
        }
        let weight: f64 = get("weight_kg")?
            .parse()
            .map_err(|_| Error::Schema("`weight_kg` is not a number".into()))?;
        let movement = Movement::parse(get("movement")?)
            .ok_or_else(|| Error::Schema("`movement` must be grasping or complex".into()))?;
        let condition = Condition::new(weight, movement)
            .map_err(|e| Error::Schema(format!("bad condition header: {e}")))?;
        let is_rest = match meta.get("rest").map(|s| s.as_str()) {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => {
                return Err(Error::Schema(format!(
                    "`rest` must be true or false, got {other}"
                )))
            }
        };
        let trial = match meta.get("trial") {
            None => None,
            Some(t) => Some(
                t.parse()
                    .map_err(|_| Error::Schema(format!("`trial` must be an integer, got {t}")))?,
            ),
        };
        Ok(Self {
            rate_hz,
            condition,
            is_rest,
            trial,
        })
    }
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut meta = BTreeMap::new();
    let mut body_start = text.len();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("malformed header line `{trimmed}`")))?;
            meta.insert(k.trim().to_string(), v.trim().to_string());
            offset += line.len();
        } else if trimmed.is_empty() {
            offset += line.len();
        } else {
            body_start = offset;
            break;
        }
    }
    let body = &text[body_start.min(text.len())..];
    if body.trim().is_empty() {
        return Err(Error::Empty("no samples".into()));
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(body.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header row: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns = vec![Vec::new(); header.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data {
            row,
            msg: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Data {
                row,
                msg: format!("{} fields, expected {}", record.len(), header.len()),
            });
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Data {
                row,
                msg: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Data {
                    row,
                    msg: format!("non-finite value `{field}` in column {}", header[col]),
                });
            }
            columns[col].push(v);
        }
    }
    if columns.first().map_or(true, Vec::is_empty) {
        return Err(Error::Empty("no samples".into()));
    }
    Ok(Table {
        meta,
        header,
        columns,
    })
}

pub fn format_table(meta: &[(&str, String)], header: &[String], columns: &[Vec<f64>]) -> String {
    let n = columns.first().map_or(0, Vec::len);
    let mut out = String::with_capacity(n * columns.len() * 12);
    for (k, v) in meta {
        let _ = writeln!(out, "#{k}={v}");
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..n {
        for (c, col) in columns.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", col[i]);
        }
        out.push('\n');
    }
    out
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path.display().to_string())
        } else {
            Error::io(path, e)
        }
    })?;
    parse_table(&text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emg_from_table(table: Table) -> Result<EmgRecording> {
    let meta = RecordingMeta::from_map(&table.meta)?;
    if table.header.len() != EMG_CHANNELS {
        return Err(Error::Schema(format!(
            "EMG file must have {EMG_CHANNELS} channels, found {}",
            table.header.len()
        )));
    }
    let mut rec = EmgRecording::new(
        meta.rate_hz,
        table.header,
        table.columns,
        meta.condition,
        meta.is_rest,
    )?;
    rec.trial = meta.trial;
    Ok(rec)
}

pub fn load_emg_csv(path: &Path) -> Result<EmgRecording> {
    emg_from_table(read_table(path)?)
}

pub fn format_emg(rec: &EmgRecording) -> String {
    let meta = RecordingMeta {
        rate_hz: rec.sample_rate_hz,
        condition: rec.condition,
        is_rest: rec.is_rest,
        trial: rec.trial,
    };
    format_table(&meta.to_pairs(), &rec.channel_names, &rec.channels)
}

pub fn write_emg_csv(path: &Path, rec: &EmgRecording) -> Result<()> {
    write_text(path, &format_emg(rec))
}

pub fn marker_header() -> Vec<String> {
    MARKER_NAMES
        .iter()
        .flat_map(|m| ["x", "y", "z"].map(|a| format!("{m}_{a}")))
        .collect()
}

pub fn markers_from_table(table: Table) -> Result<MarkerTrajectory> {
    let meta = RecordingMeta::from_map(&table.meta)?;
    let expected = marker_header();
    if table.header.len() != expected.len() {
        return Err(Error::Schema(format!(
            "marker file must have {} coordinate columns, found {}",
            expected.len(),
            table.header.len()
        )));
    }
    if let Some((got, want)) = table.header.iter().zip(&expected).find(|(g, w)| g != w) {
        return Err(Error::Schema(format!(
            "expected column `{want}`, found `{got}`"
        )));
    }
    let n = table.n_rows();
    let positions = (0..n)
        .map(|t| {
            let mut p = [[0.0; 3]; 6];
            for (m, marker) in p.iter_mut().enumerate() {
                for (a, v) in marker.iter_mut().enumerate() {
                    *v = table.columns[m * 3 + a][t];
                }
            }
            p
        })
        .collect();
    let mut traj = MarkerTrajectory::new(meta.rate_hz, positions, meta.condition)?;
    traj.trial = meta.trial;
    Ok(traj)
}

pub fn load_markers_csv(path: &Path) -> Result<MarkerTrajectory> {
    markers_from_table(read_table(path)?)
}

pub fn format_markers(traj: &MarkerTrajectory) -> String {
    let meta = RecordingMeta {
        rate_hz: traj.sample_rate_hz,
        condition: traj.condition,
        is_rest: false,
        trial: traj.trial,
    };
    let columns: Vec<Vec<f64>> = (0..18)
        .map(|c| traj.positions.iter().map(|p| p[c / 3][c % 3]).collect())
        .collect();
    format_table(&meta.to_pairs(), &marker_header(), &columns)
}

pub fn write_markers_csv(path: &Path, traj: &MarkerTrajectory) -> Result<()> {
    write_text(path, &format_markers(traj))
}

/// Ground-truth activation envelope written next to synthetic recordings
/// (`*_truth.csv`), columns `env1..env8`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeFile {
    pub meta: RecordingMeta,
    pub channels: Vec<Vec<f64>>,
}

pub fn format_envelope(env: &EnvelopeFile) -> String {
    let header: Vec<String> = (1..=env.channels.len())
        .map(|i| format!("env{i}"))
        .collect();
    format_table(&env.meta.to_pairs(), &header, &env.channels)
}

pub fn load_envelope_csv(path: &Path) -> Result<EnvelopeFile> {
    let table = read_table(path)?;
    let meta = RecordingMeta::from_map(&table.meta)?;
    if table.header.len() != EMG_CHANNELS {
        return Err(Error::Schema(format!(
            "envelope file must have {EMG_CHANNELS} channels, found {}",
            table.header.len()
        )));
    }
    Ok(EnvelopeFile {
        meta,
        channels: table.columns,
    })
}
