//! Row-major layers on `[rows × features]` activations.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::param::Param;

/// He-uniform scale for layers feeding a rectifier.
pub const HE: f64 = 6.0;
/// LeCun-uniform scale for the tanh output layer.
pub const LECUN: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Param,
    pub b: Param,
    x: Option<Array2<f64>>,
}

impl Dense {
    pub fn new(n_in: usize, n_out: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            w: Param::uniform(&[n_in, n_out], n_in, scale, rng),
            b: Param::zeros(&[n_out], false),
            x: None,
        }
    }

    pub fn n_in(&self) -> usize {
        self.w.value.shape()[0]
    }

    pub fn n_out(&self) -> usize {
        self.w.value.shape()[1]
    }

    pub fn forward(&mut self, x: Array2<f64>, train: bool) -> Array2<f64> {
        let y = x.dot(&self.w.mat()) + &self.b.vec();
        if train {
            self.x = Some(x);
        }
        y
    }

    pub fn backward(&mut self, g: &Array2<f64>) -> Array2<f64> {
        let x = self.x.take().expect("backward without training forward");
        self.w.grad_mat().assign(&x.t().dot(g));
        self.b.grad_vec().assign(&g.sum_axis(Axis(0)));
        g.dot(&self.w.mat().t())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }
}

#[derive(Debug, Clone, PartialEq)]
struct NormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

/// Batch normalization over rows, one statistic per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<NormCache>,
}

impl BatchNorm {
    pub fn new(n: usize) -> Self {
        Self {
            gamma: Param::filled(&[n], 1.0),
            beta: Param::zeros(&[n], false),
            running_mean: Array1::zeros(n),
            running_var: Array1::ones(n),
            momentum: 0.99,
            eps: 1e-3,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: Array2<f64>, train: bool) -> Array2<f64> {
        let (gamma, beta) = (self.gamma.vec(), self.beta.vec());
        if !train {
            let inv = self.running_var.mapv(|v| 1.0 / (v + self.eps).sqrt());
            return (x - &self.running_mean) * &(inv * gamma) + beta;
        }
        let n = x.nrows() as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let centred = x - &mean;
        let var = centred.mapv(|v| v * v).sum_axis(Axis(0)) / n;
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let xhat = centred * &inv_std;
        let y = &xhat * &gamma + &beta;
        let m = self.momentum;
        Zip::from(&mut self.running_mean)
            .and(&mean)
            .for_each(|r, &b| *r = m * *r + (1.0 - m) * b);
        Zip::from(&mut self.running_var)
            .and(&var)
            .for_each(|r, &b| *r = m * *r + (1.0 - m) * b);
        self.cache = Some(NormCache { xhat, inv_std });
        y
    }

    pub fn backward(&mut self, g: &Array2<f64>) -> Array2<f64> {
        let NormCache { xhat, inv_std } = self
            .cache
            .take()
            .expect("backward without training forward");
        let n = g.nrows() as f64;
        self.gamma.grad_vec().assign(&(g * &xhat).sum_axis(Axis(0)));
        self.beta.grad_vec().assign(&g.sum_axis(Axis(0)));
        let dxhat = g * &self.gamma.vec();
        let s1 = dxhat.sum_axis(Axis(0));
        let s2 = (&dxhat * &xhat).sum_axis(Axis(0));
        (dxhat * n - &s1 - xhat * &s2) * &(inv_std / n)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }
}

/// Layer normalization of each row across its features.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Param,
    pub beta: Param,
    pub eps: f64,
    cache: Option<NormCache>,
}

impl LayerNorm {
    pub fn new(n: usize) -> Self {
        Self {
            gamma: Param::filled(&[n], 1.0),
            beta: Param::zeros(&[n], false),
            eps: 1e-3,
            cache: None,
        }
    }

    // Explicit row loops: the broadcasting forms cost more than the
    // convolutions around them in a TCN.
    pub fn forward(&mut self, x: Array2<f64>, train: bool) -> Array2<f64> {
        let n = x.ncols();
        let mut xhat = x.as_standard_layout().into_owned();
        let mut y = Array2::zeros(xhat.raw_dim());
        let mut inv_std = Array1::zeros(xhat.nrows());
        let (gamma, beta) = (self.gamma.vec(), self.beta.vec());
        let (gamma, beta) = (
            gamma.as_slice().expect("contiguous"),
            beta.as_slice().expect("contiguous"),
        );
        let rows = xhat
            .as_slice_mut()
            .expect("standard layout")
            .chunks_exact_mut(n)
            .zip(
                y.as_slice_mut()
                    .expect("standard layout")
                    .chunks_exact_mut(n),
            );
        for ((xr, yr), is) in rows.zip(inv_std.iter_mut()) {
            let mean = xr.iter().sum::<f64>() / n as f64;
            let mut var = 0.0;
            for v in xr.iter_mut() {
                *v -= mean;
                var += *v * *v;
            }
            let s = 1.0 / (var / n as f64 + self.eps).sqrt();
            *is = s;
            for (((v, o), g), b) in xr
                .iter_mut()
                .zip(yr.iter_mut())
                .zip(gamma.iter())
                .zip(beta.iter())
            {
                *v *= s;
                *o = *v * g + b;
            }
        }
        if train {
            self.cache = Some(NormCache { xhat, inv_std });
        }
        y
    }

    pub fn backward(&mut self, g: &Array2<f64>) -> Array2<f64> {
        let NormCache { xhat, inv_std } = self
            .cache
            .take()
            .expect("backward without training forward");
        let n = g.ncols();
        let gamma = self.gamma.vec().to_vec();
        let mut dgamma = vec![0.0; n];
        let mut dbeta = vec![0.0; n];
        let g = g.as_standard_layout();
        let mut dx = Array2::zeros(g.raw_dim());
        let mut dxhat = vec![0.0; n];
        let rows = g
            .as_slice()
            .expect("standard layout")
            .chunks_exact(n)
            .zip(xhat.as_slice().expect("standard layout").chunks_exact(n))
            .zip(
                dx.as_slice_mut()
                    .expect("standard layout")
                    .chunks_exact_mut(n),
            );
        for (((gr, xr), dr), &is) in rows.zip(inv_std.iter()) {
            let (mut s1, mut s2) = (0.0, 0.0);
            for j in 0..n {
                dgamma[j] += gr[j] * xr[j];
                dbeta[j] += gr[j];
                let d = gr[j] * gamma[j];
                dxhat[j] = d;
                s1 += d;
                s2 += d * xr[j];
            }
            let k = is / n as f64;
            for j in 0..n {
                dr[j] = (dxhat[j] * n as f64 - s1 - xr[j] * s2) * k;
            }
        }
        self.gamma.grad_vec().assign(&Array1::from(dgamma));
        self.beta.grad_vec().assign(&Array1::from(dbeta));
        dx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }
}

pub fn relu(x: Array2<f64>) -> Array2<f64> {
    x.mapv_into(|v| v.max(0.0))
}

/// Gradient through a rectifier given its output.
pub fn relu_backward(g: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
    Zip::from(g)
        .and(y)
        .map_collect(|&g, &y| if y > 0.0 { g } else { 0.0 })
}

/// Gradient through tanh given its output.
pub fn tanh_backward(g: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
    Zip::from(g).and(y).map_collect(|&g, &y| g * (1.0 - y * y))
}

/// Inverted-dropout mask: kept entries are `1/(1-rate)`, dropped are 0.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn((rows, cols), || {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            keep
        }
    })
}

/// Mean over each consecutive block of `steps` rows.
pub fn global_avg_pool(x: &Array2<f64>, steps: usize) -> Array2<f64> {
    let batch = x.nrows() / steps;
    let mut out = Array2::zeros((batch, x.ncols()));
    for (b, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let block = x.slice(ndarray::s![b * steps..(b + 1) * steps, ..]);
        row.assign(&(block.sum_axis(Axis(0)) / steps as f64));
    }
    out
}

pub fn global_avg_pool_backward(g: &Array2<f64>, steps: usize) -> Array2<f64> {
    let mut out = Array2::zeros((g.nrows() * steps, g.ncols()));
    for (r, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        row.assign(&(&g.row(r / steps) / steps as f64));
    }
    out
}
