//! The seed × cell grid: shared preprocessing, parallel training, aggregation
//! and report files.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::cell::{model_bundle, run_cell};
use super::{prepare, time_points_only, with_mode, Dataset, Prepared};
use crate::data::csvio::write_text;
use crate::data::manifest::{FeatureToggles, ModelKind, RunManifest};
use crate::error::{Error, Result};
use crate::eval::report::{band_svg, comparison_csv, provenance, table3_csv};
use crate::eval::{Cell, CellReport, FeatureCondition, SeedResult, JOINTS};
use crate::features::FeatureMatrix;
use crate::preprocess::{NormalizationMaxima, NormalizationMode};

/// Worker count from `PIPELINE_THREADS`, defaulting to the available cores.
pub fn threads_from_env() -> usize {
    std::env::var("PIPELINE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    /// One report per cell, in grid order.
    pub reports: Vec<CellReport>,
    /// `(file name, bytes)` of every trained model bundle, sorted by name.
    pub bundles: Vec<(String, Vec<u8>)>,
}

struct Source {
    weights: Vec<f64>,
    mode: NormalizationMode,
    prepared: Prepared,
    time_points: FeatureMatrix,
}

fn maxima_vecs(maxima: &NormalizationMaxima) -> Vec<(String, Vec<f64>)> {
    match maxima {
        NormalizationMaxima::Global(v) => vec![("norm.max.global".into(), v.clone())],
        NormalizationMaxima::PerCondition(map) => map
            .iter()
            .map(|(c, v)| (format!("norm.max.{}", c.label()), v.clone()))
            .collect(),
    }
}

/// Trains every cell of `cells` once per manifest seed and aggregates the
/// test metrics. Preprocessing is shared between cells with the same weight
/// set and normalization. Jobs run on up to `threads` workers; results do not
/// depend on the worker count.
pub fn run_protocol(
    ds: &Dataset,
    m: &RunManifest,
    cells: &[Cell],
    threads: usize,
) -> Result<ProtocolRun> {
    if cells.is_empty() {
        return Err(Error::Protocol("no cells to run".into()));
    }
    if m.seeds.is_empty() {
        return Err(Error::Protocol("no seeds configured".into()));
    }
    let mut sources: Vec<Source> = Vec::new();
    for cell in cells {
        let mode = cell.condition.normalization();
        if sources
            .iter()
            .any(|s| s.weights == cell.weights_kg && s.mode == mode)
        {
            continue;
        }
        let sessions = ds.select(&cell.weights_kg)?;
        let mc = with_mode(m, mode, FeatureToggles::ALL);
        log::info!(
            "preprocessing {} kg with {} normalization",
            cell.weights_label(),
            mode.as_str()
        );
        let prepared = prepare(&sessions, &mc)?;
        let time_points = time_points_only(&prepared.features);
        sources.push(Source {
            weights: cell.weights_kg.clone(),
            mode,
            prepared,
            time_points,
        });
    }
    let source_of = |cell: &Cell| {
        sources
            .iter()
            .position(|s| s.weights == cell.weights_kg && s.mode == cell.condition.normalization())
            .expect("every cell has a source")
    };

    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| m.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<(SeedResult, Vec<u8>)>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let manifest_text = m.to_text();

    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= jobs.len() {
            break;
        }
        let (ci, seed) = jobs[i];
        let cell = &cells[ci];
        let src = &sources[source_of(cell)];
        let fm = match cell.condition {
            FeatureCondition::C => &src.time_points,
            FeatureCondition::A | FeatureCondition::B => &src.prepared.features,
        };
        let out = run_cell(
            fm,
            &src.prepared.targets,
            cell.model,
            &cell.weights_kg,
            m,
            seed,
        )
        .map(|o| {
            let p = &src.prepared.params;
            let extra = [
                ("cell", cell.id()),
                ("seed", seed.to_string()),
                ("manifest", manifest_text.clone()),
                ("normalization", src.mode.as_str().to_string()),
                (
                    "activation",
                    format!(
                        "alpha={}\nbeta1={}\nbeta2={}\ndelay={}\n",
                        p.alpha, p.beta1, p.beta2, p.delay
                    ),
                ),
            ];
            let bytes =
                model_bundle(&o.model, &extra, &maxima_vecs(&src.prepared.maxima)).to_bytes();
            (o.result, bytes)
        });
        let stop = out.is_err();
        slots.lock().expect("result slots")[i] = Some(out);
        if stop {
            next.store(jobs.len(), Ordering::SeqCst);
        }
    };
    let workers = threads.clamp(1, jobs.len());
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(&work);
            }
        });
    }

    let slots = slots.into_inner().expect("result slots");
    let mut per_cell: Vec<Vec<SeedResult>> = vec![Vec::new(); cells.len()];
    let mut bundles = Vec::new();
    for (slot, &(ci, seed)) in slots.into_iter().zip(&jobs) {
        match slot {
            Some(Ok((result, bytes))) => {
                per_cell[ci].push(result);
                bundles.push((format!("{}_seed{seed}.bundle", cells[ci].id()), bytes));
            }
            Some(Err(e)) => return Err(e),
            None => {}
        }
    }
    bundles.sort_by(|a, b| a.0.cmp(&b.0));
    let reports = cells
        .iter()
        .cloned()
        .zip(per_cell)
        .map(|(c, seeds)| CellReport::new(c, seeds))
        .collect::<Result<_>>()?;
    Ok(ProtocolRun { reports, bundles })
}

/// The cell whose predictions go into the band plots: MLP condition B on the
/// widest weight set when present.
fn band_cell(reports: &[CellReport]) -> Option<&CellReport> {
    let widest = reports.iter().map(|r| r.cell.weights_kg.len()).max()?;
    reports
        .iter()
        .find(|r| {
            r.cell.model == ModelKind::Mlp
                && r.cell.condition == FeatureCondition::B
                && r.cell.weights_kg.len() == widest
        })
        .or_else(|| reports.first())
}

/// Writes `table3.csv`, `comparison.csv`, `bands_<joint>.svg` and `PROVENANCE` into `dir`.
pub fn write_report(
    dir: &Path,
    reports: &[CellReport],
    m: &RunManifest,
    command: &str,
) -> Result<()> {
    write_text(&dir.join("table3.csv"), &table3_csv(reports))?;
    write_text(&dir.join("comparison.csv"), &comparison_csv(reports))?;
    if let Some(r) = band_cell(reports) {
        for (j, name) in JOINTS.iter().enumerate() {
            write_text(&dir.join(format!("bands_{name}.svg")), &band_svg(r, j))?;
        }
    }
    let seeds = m
        .seeds
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(",");
    write_text(
        &dir.join("PROVENANCE"),
        &provenance(&m.digest(), &seeds, command),
    )
}
