//! Causal dilated 1-D convolution on sequences stored as `[batch·steps × channels]`.

use ndarray::{Array2, Axis};
use rand_chacha::ChaCha8Rng;

use super::param::Param;

#[derive(Debug, Clone, PartialEq)]
pub struct CausalConv1d {
    /// `[kernel·in × out]`, tap `j` at rows `j·in..(j+1)·in` reads lag `(kernel−1−j)·dilation`.
    pub w: Param,
    pub b: Param,
    pub kernel: usize,
    pub dilation: usize,
    cols: Option<(Array2<f64>, usize)>,
}

impl CausalConv1d {
    pub fn new(
        n_in: usize,
        n_out: usize,
        kernel: usize,
        dilation: usize,
        scale: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Self {
            w: Param::uniform(&[kernel * n_in, n_out], kernel * n_in, scale, rng),
            b: Param::zeros(&[n_out], false),
            kernel,
            dilation,
            cols: None,
        }
    }

    pub fn n_in(&self) -> usize {
        self.w.value.shape()[0] / self.kernel
    }

    pub fn n_out(&self) -> usize {
        self.w.value.shape()[1]
    }

    /// Samples of history each output sees, itself included.
    pub fn receptive_field(&self) -> usize {
        1 + (self.kernel - 1) * self.dilation
    }

    fn lag(&self, tap: usize) -> usize {
        (self.kernel - 1 - tap) * self.dilation
    }

    fn im2col(&self, x: &Array2<f64>, steps: usize) -> Array2<f64> {
        let c = self.n_in();
        let width = self.kernel * c;
        let x = x.as_standard_layout();
        let src = x.as_slice().expect("standard layout");
        let mut cols = Array2::zeros((x.nrows(), width));
        let dst = cols.as_slice_mut().expect("standard layout");
        for r in 0..x.nrows() {
            let t = r % steps;
            for j in 0..self.kernel {
                let lag = self.lag(j);
                if lag <= t {
                    let from = (r - lag) * c;
                    dst[r * width + j * c..r * width + (j + 1) * c]
                        .copy_from_slice(&src[from..from + c]);
                }
            }
        }
        cols
    }

    pub fn forward(&mut self, x: &Array2<f64>, steps: usize, train: bool) -> Array2<f64> {
        let cols = self.im2col(x, steps);
        let y = cols.dot(&self.w.mat());
        let mut y = if y.is_standard_layout() {
            y
        } else {
            y.as_standard_layout().into_owned()
        };
        let b = self.b.vec();
        let b = b.as_slice().expect("contiguous");
        for row in y
            .as_slice_mut()
            .expect("standard layout")
            .chunks_exact_mut(b.len())
        {
            for (v, bias) in row.iter_mut().zip(b) {
                *v += bias;
            }
        }
        if train {
            self.cols = Some((cols, steps));
        }
        y
    }

    pub fn backward(&mut self, g: &Array2<f64>) -> Array2<f64> {
        let (cols, steps) = self.cols.take().expect("backward without training forward");
        self.w.grad_mat().assign(&cols.t().dot(g));
        self.b.grad_vec().assign(&g.sum_axis(Axis(0)));
        let gcols = g.dot(&self.w.mat().t());
        let c = self.n_in();
        let width = self.kernel * c;
        let gcols = gcols.as_standard_layout();
        let src = gcols.as_slice().expect("standard layout");
        let mut gx = Array2::zeros((g.nrows(), c));
        let dst = gx.as_slice_mut().expect("standard layout");
        for r in 0..g.nrows() {
            let t = r % steps;
            for j in 0..self.kernel {
                let lag = self.lag(j);
                if lag <= t {
                    let to = (r - lag) * c;
                    let from = r * width + j * c;
                    for (d, s) in dst[to..to + c].iter_mut().zip(&src[from..from + c]) {
                        *d += s;
                    }
                }
            }
        }
        gx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }
}
