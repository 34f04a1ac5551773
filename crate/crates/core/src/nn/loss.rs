use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};

pub fn huber(e: f64, delta: f64) -> f64 {
    if e.abs() <= delta {
        0.5 * e * e
    } else {
        delta * (e.abs() - 0.5 * delta)
    }
}

pub fn huber_grad(e: f64, delta: f64) -> f64 {
    e.clamp(-delta, delta)
}

/// Per-output weights `1/(Var(y_i) + ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    pub w: Array1<f64>,
    pub epsilon: f64,
}

impl LossWeights {
    pub fn new(w: Array1<f64>, epsilon: f64) -> Result<Self> {
        if w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Parameter(
                "loss weights must be positive and finite".into(),
            ));
        }
        Ok(Self { w, epsilon })
    }

    pub fn from_targets(y: ArrayView2<f64>, epsilon: f64) -> Result<Self> {
        if y.nrows() == 0 {
            return Err(Error::Empty(
                "loss weights need at least one target row".into(),
            ));
        }
        let var = y.var_axis(Axis(0), 0.0);
        Self::new(var.mapv(|v| 1.0 / (v + epsilon)), epsilon)
    }
}

/// `Σ_i w_i · huber(pred_i − target_i)` for one sample.
pub fn weighted_huber(pred: &[f64], target: &[f64], weights: &LossWeights, delta: f64) -> f64 {
    pred.iter()
        .zip(target)
        .zip(&weights.w)
        .map(|((p, t), w)| w * huber(p - t, delta))
        .sum()
}

/// Batch-mean weighted Huber loss and its gradient with respect to `pred`.
pub fn weighted_huber_batch(
    pred: &Array2<f64>,
    target: ArrayView2<f64>,
    weights: &LossWeights,
    delta: f64,
) -> (f64, Array2<f64>) {
    let n = pred.nrows().max(1) as f64;
    let mut grad = Array2::zeros(pred.raw_dim());
    let mut loss = 0.0;
    for ((mut g, p), t) in grad
        .axis_iter_mut(Axis(0))
        .zip(pred.axis_iter(Axis(0)))
        .zip(target.axis_iter(Axis(0)))
    {
        Zip::from(&mut g)
            .and(&p)
            .and(&t)
            .and(&weights.w)
            .for_each(|g, &p, &t, &w| {
                loss += w * huber(p - t, delta);
                *g = w * huber_grad(p - t, delta) / n;
            });
    }
    (loss / n, grad)
}
