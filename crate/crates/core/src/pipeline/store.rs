//! Per-seed predictions saved by `eval` so `report` can rebuild every output.

use crate::data::manifest::ModelKind;
use crate::error::{Error, Result};
use crate::eval::{score, Cell, CellReport, FeatureCondition, SeedResult};
use crate::nn::bundle::Bundle;

fn parse_cell(text: &str) -> Result<Cell> {
    let mut model = None;
    let mut weights = None;
    let mut condition = None;
    for line in text.lines() {
        match line.split_once('=') {
            Some(("model", v)) => {
                model = match v {
                    "mlp" => Some(ModelKind::Mlp),
                    "tcn" => Some(ModelKind::Tcn),
                    _ => None,
                }
            }
            Some(("weights_kg", v)) => {
                weights = v
                    .split(',')
                    .map(|w| w.parse::<f64>().ok())
                    .collect::<Option<Vec<_>>>();
            }
            Some(("condition", v)) => condition = FeatureCondition::parse(v),
            _ => {}
        }
    }
    match (model, weights, condition) {
        (Some(m), Some(w), Some(c)) => Ok(Cell::new(m, &w, c)),
        _ => Err(Error::Bundle(format!("malformed cell record {text:?}"))),
    }
}

/// Cells, seeds, filtered test predictions and targets of a protocol run.
pub fn results_bundle(reports: &[CellReport]) -> Bundle {
    let mut b = Bundle::new();
    b.put_text("cells", reports.len().to_string());
    for (i, r) in reports.iter().enumerate() {
        let c = &r.cell;
        let weights = c
            .weights_kg
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(",");
        b.put_text(
            &format!("cell{i:02}"),
            format!(
                "model={}\nweights_kg={weights}\ncondition={}\n",
                c.model.as_str(),
                c.condition
            ),
        );
        let seeds: Vec<f64> = r.seeds.iter().map(|s| s.seed as f64).collect();
        b.put_vec(&format!("cell{i:02}.seeds"), &seeds);
        for s in &r.seeds {
            let p = format!("cell{i:02}.seed{}", s.seed);
            b.put_text(&format!("{p}.epochs"), s.epochs.to_string());
            for j in 0..3 {
                b.put_vec(&format!("{p}.pred{j}"), &s.predictions[j]);
                b.put_vec(&format!("{p}.target{j}"), &s.targets[j]);
            }
        }
    }
    b
}

/// Inverse of [`results_bundle`]; metrics are recomputed from the series.
pub fn load_results(b: &Bundle) -> Result<Vec<CellReport>> {
    let n: usize = b
        .text("cells")?
        .parse()
        .map_err(|_| Error::Bundle("cell count is not an integer".into()))?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let cell = parse_cell(b.text(&format!("cell{i:02}"))?)?;
        let mut seeds = Vec::new();
        for s in b.vec(&format!("cell{i:02}.seeds"))? {
            let seed = s as u64;
            let p = format!("cell{i:02}.seed{seed}");
            let epochs = b
                .text(&format!("{p}.epochs"))?
                .parse()
                .map_err(|_| Error::Bundle(format!("{p}.epochs is not an integer")))?;
            let predictions = [0, 1, 2].map(|j| b.vec(&format!("{p}.pred{j}")));
            let targets = [0, 1, 2].map(|j| b.vec(&format!("{p}.target{j}")));
            let [p0, p1, p2] = predictions;
            let [t0, t1, t2] = targets;
            let predictions = [p0?, p1?, p2?];
            let targets = [t0?, t1?, t2?];
            let scores = [
                score(&predictions[0], &targets[0])?,
                score(&predictions[1], &targets[1])?,
                score(&predictions[2], &targets[2])?,
            ];
            seeds.push(SeedResult {
                seed,
                scores,
                predictions,
                targets,
                epochs,
            });
        }
        out.push(CellReport::new(cell, seeds)?);
    }
    Ok(out)
}
