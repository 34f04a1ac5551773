//! Report files: Table III CSV, comparison CSV, band plots and provenance.

use std::fmt::Write as _;

use super::{CellReport, FeatureCondition, JOINTS};
use crate::data::manifest::ModelKind;

pub fn table3_header() -> Vec<String> {
    let mut h: Vec<String> = ["model", "weights_kg", "condition", "n_seeds"]
        .map(String::from)
        .to_vec();
    for j in JOINTS {
        for m in ["rmse", "r2", "rho"] {
            h.push(format!("{j}_{m}_mean"));
            h.push(format!("{j}_{m}_std"));
        }
    }
    h
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

pub fn table3_csv(reports: &[CellReport]) -> String {
    let mut out = table3_header().join(",");
    out.push('\n');
    for r in reports {
        let mut row = vec![
            r.cell.model.as_str().to_string(),
            r.cell.weights_label(),
            r.cell.condition.to_string(),
            r.seeds.len().to_string(),
        ];
        for j in &r.joints {
            for m in [j.rmse, j.r2, j.rho] {
                row.push(num(m.mean));
                row.push(num(m.std));
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn find<'a>(
    reports: &'a [CellReport],
    model: ModelKind,
    weights: &[f64],
    cond: FeatureCondition,
) -> Option<&'a CellReport> {
    reports
        .iter()
        .find(|r| r.cell.model == model && r.cell.weights_kg == weights && r.cell.condition == cond)
}

/// Differences (second minus first) of mean metrics between paired cells:
/// normalization (MLP A → MLP B) and model (MLP B → TCN C) on the same weights.
pub fn comparison_csv(reports: &[CellReport]) -> String {
    let mut out = String::from("comparison,weights_kg,joint,delta_rmse,delta_r2,delta_rho\n");
    let mut weight_sets: Vec<&Vec<f64>> = Vec::new();
    for r in reports {
        if !weight_sets.contains(&&r.cell.weights_kg) {
            weight_sets.push(&r.cell.weights_kg);
        }
    }
    let pairs = [
        (
            "mlp_A_to_mlp_B",
            (ModelKind::Mlp, FeatureCondition::A),
            (ModelKind::Mlp, FeatureCondition::B),
        ),
        (
            "mlp_B_to_tcn_C",
            (ModelKind::Mlp, FeatureCondition::B),
            (ModelKind::Tcn, FeatureCondition::C),
        ),
    ];
    for w in weight_sets {
        for (name, a, b) in pairs {
            let (Some(ra), Some(rb)) = (find(reports, a.0, w, a.1), find(reports, b.0, w, b.1))
            else {
                continue;
            };
            for (j, joint) in JOINTS.iter().enumerate() {
                let (x, y) = (&ra.joints[j], &rb.joints[j]);
                let _ = writeln!(
                    out,
                    "{name},{},{joint},{},{},{}",
                    ra.cell.weights_label(),
                    num(y.rmse.mean - x.rmse.mean),
                    num(y.r2.mean - x.r2.mean),
                    num(y.rho.mean - x.rho.mean)
                );
            }
        }
    }
    out
}

/// Target and mean prediction ± 1 std across seeds over the test windows.
pub fn band_svg(report: &CellReport, joint: usize) -> String {
    let (w, h, pad) = (900.0, 320.0, 40.0);
    let target = &report.seeds[0].targets[joint];
    let n = target.len();
    let stats: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v: Vec<f64> = report
                .seeds
                .iter()
                .map(|s| s.predictions[joint][i])
                .collect();
            let m = super::MeanStd::of(&v);
            (m.mean, m.std)
        })
        .collect();
    let lo = stats
        .iter()
        .map(|(m, s)| m - s)
        .chain(target.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let hi = stats
        .iter()
        .map(|(m, s)| m + s)
        .chain(target.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |i: usize| pad + (w - 2.0 * pad) * i as f64 / (n.max(2) - 1) as f64;
    let y = |v: f64| h - pad - (h - 2.0 * pad) * (v - lo) / span;
    let path = |pts: &mut dyn Iterator<Item = (f64, f64)>| {
        pts.map(|(a, b)| format!("{a:.2},{b:.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let upper = path(&mut (0..n).map(|i| (x(i), y(stats[i].0 + stats[i].1))));
    let lower = path(&mut (0..n).rev().map(|i| (x(i), y(stats[i].0 - stats[i].1))));
    let mean = path(&mut (0..n).map(|i| (x(i), y(stats[i].0))));
    let truth = path(&mut (0..n).map(|i| (x(i), y(target[i]))));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{pad}" y="24" font-family="sans-serif" font-size="14">{} torque, {} ({} seeds), N·m {lo:.2} to {hi:.2}</text>"#,
        JOINTS[joint],
        report.cell.id(),
        report.seeds.len()
    );
    let _ = writeln!(
        s,
        r#"<polygon points="{upper} {lower}" fill="steelblue" fill-opacity="0.3" stroke="none"/>"#
    );
    let _ = writeln!(
        s,
        r#"<polyline points="{truth}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    let _ = writeln!(
        s,
        r#"<polyline points="{mean}" fill="none" stroke="steelblue" stroke-width="1"/>"#
    );
    s.push_str("</svg>\n");
    s
}

/// Provenance record written next to every output set.
pub fn provenance(manifest_digest: &str, seed: &str, command: &str) -> String {
    format!(
        "tool=emgtorque\nversion={}\ncommand={command}\nmanifest_sha256={manifest_digest}\nseed={seed}\n",
        env!("CARGO_PKG_VERSION")
    )
}
