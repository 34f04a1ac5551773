//! Post-filtering of per-window prediction series.

use nalgebra::{DMatrix, DVector};

pub const MEDIAN_WINDOW: usize = 5;
pub const SG_WINDOW: usize = 21;
pub const SG_ORDER: usize = 2;

/// Point reflection about the end samples: `x[-k] = 2·x[0] − x[k]`, so linear
/// trends continue past the edges. Offsets beyond the series clamp.
fn reflected(x: &[f64], j: isize) -> f64 {
    let last = x.len() as isize - 1;
    if j < 0 {
        2.0 * x[0] - x[(-j).min(last) as usize]
    } else if j > last {
        2.0 * x[last as usize] - x[(2 * last - j).max(0) as usize]
    } else {
        x[j as usize]
    }
}

/// Running median with point-reflected edges. `window` must be odd.
pub fn median_filter(x: &[f64], window: usize) -> Vec<f64> {
    let half = (window / 2) as isize;
    let mut buf = Vec::with_capacity(window);
    (0..x.len() as isize)
        .map(|i| {
            buf.clear();
            buf.extend((i - half..=i + half).map(|j| reflected(x, j)));
            buf.sort_by(f64::total_cmp);
            buf[buf.len() / 2]
        })
        .collect()
}

/// Least-squares weights that evaluate a degree-`order` fit over `window`
/// samples at offset `pos` (0-based within the window).
pub fn savgol_coeffs(window: usize, order: usize, pos: usize) -> Vec<f64> {
    let half = (window / 2) as f64;
    let a = DMatrix::from_fn(window, order + 1, |r, c| (r as f64 - half).powi(c as i32));
    let at = a.transpose();
    let gram = (&at * &a).try_inverse().expect("full-rank Vandermonde");
    let e = DVector::from_fn(order + 1, |c, _| (pos as f64 - half).powi(c as i32));
    let row = (gram * e).transpose() * at;
    row.iter().copied().collect()
}

/// Savitzky–Golay smoothing. The first and last `window/2` samples take the
/// value of the polynomial fitted to the first or last full window, so any
/// polynomial of degree ≤ `order` passes through unchanged.
pub fn savgol_filter(x: &[f64], window: usize, order: usize) -> Vec<f64> {
    let n = x.len();
    let half = window / 2;
    let centre = savgol_coeffs(window, order, half);
    let dot = |c: &[f64], start: usize| {
        c.iter()
            .zip(&x[start..start + window])
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };
    let mut out = vec![0.0; n];
    for i in half..n - half {
        out[i] = dot(&centre, i - half);
    }
    for pos in 0..half {
        out[pos] = dot(&savgol_coeffs(window, order, pos), 0);
        out[n - half + pos] = dot(&savgol_coeffs(window, order, half + 1 + pos), n - window);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub values: Vec<f64>,
    /// Set when the series was shorter than a filter window and truncated
    /// windows were used.
    pub truncated: bool,
}

fn largest_odd_at_most(n: usize, cap: usize) -> usize {
    let w = n.min(cap);
    if w % 2 == 0 {
        w - 1
    } else {
        w
    }
}

/// Median(5) then Savitzky–Golay(21, 2).
pub fn filter_predictions(x: &[f64]) -> Filtered {
    if x.is_empty() {
        return Filtered {
            values: Vec::new(),
            truncated: true,
        };
    }
    let mw = largest_odd_at_most(x.len(), MEDIAN_WINDOW);
    let sw = largest_odd_at_most(x.len(), SG_WINDOW);
    let truncated = sw < SG_WINDOW;
    if truncated {
        log::warn!(
            "series of {} samples is shorter than the filter windows",
            x.len()
        );
    }
    let med = median_filter(x, mw);
    Filtered {
        values: savgol_filter(&med, sw, SG_ORDER.min(sw - 1)),
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centre_coefficients_closed_form() {
        // quadratic/cubic SG: c_j = (3(3m²+3m−1) − 15j²) / ((2m−1)(2m+1)(2m+3))
        let m = 10.0f64;
        let c = savgol_coeffs(21, 2, 10);
        for (i, v) in c.iter().enumerate() {
            let j = i as f64 - m;
            let want = (3.0 * (3.0 * m * m + 3.0 * m - 1.0) - 15.0 * j * j)
                / ((2.0 * m - 1.0) * (2.0 * m + 1.0) * (2.0 * m + 3.0));
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_passes_through() {
        let x: Vec<f64> = (0..80)
            .map(|i| 0.3 * (i * i) as f64 - 2.0 * i as f64 + 7.0)
            .collect();
        let y = savgol_filter(&x, 21, 2);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn median_keeps_ramp_and_drops_spike() {
        let ramp: Vec<f64> = (0..30).map(f64::from).collect();
        assert_eq!(median_filter(&ramp, 5), ramp);
        let mut spike = vec![2.0; 30];
        spike[12] = 50.0;
        assert!(median_filter(&spike, 5).iter().all(|v| *v == 2.0));
    }

    #[test]
    fn short_series_flagged() {
        let f = filter_predictions(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert!(f.truncated);
        assert_eq!(f.values.len(), 7);
        assert!(!filter_predictions(&[0.0; 40]).truncated);
    }
}
