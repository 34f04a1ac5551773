//! Hand-written regressors: MLP and temporal convolutional network with
//! backpropagation, Adam and early stopping.

pub mod bundle;
pub mod conv;
pub mod layers;
pub mod loss;
pub mod mlp;
pub mod param;
pub mod tcn;
pub mod train;

use ndarray::{s, Array2, ArrayView2};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::data::manifest::ModelKind;
use crate::error::{Error, Result};
pub use loss::LossWeights;
pub use mlp::{Mlp, MlpConfig};
pub use param::{Adam, Param};
pub use tcn::{Tcn, TcnConfig};
pub use train::{train, History, TrainConfig};

/// Forward-pass mode. Training draws dropout masks from the given generator
/// and uses batch statistics.
pub enum Mode<'a> {
    Infer,
    Train(&'a mut ChaCha8Rng),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

const PREDICT_BATCH: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Mlp(Mlp),
    Tcn(Tcn),
}

impl Network {
    pub fn kind(&self) -> ModelKind {
        match self {
            Network::Mlp(_) => ModelKind::Mlp,
            Network::Tcn(_) => ModelKind::Tcn,
        }
    }

    /// Width of one flat input row.
    pub fn n_in(&self) -> usize {
        match self {
            Network::Mlp(m) => m.config.n_in,
            Network::Tcn(t) => t.config.steps * t.config.n_in,
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            Network::Mlp(m) => m.config.n_out,
            Network::Tcn(t) => t.config.n_out,
        }
    }

    pub fn forward(&mut self, x: Array2<f64>, mode: Mode<'_>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_in() {
            return Err(Error::Shape(format!(
                "model expects {} input columns, got {}",
                self.n_in(),
                x.ncols()
            )));
        }
        Ok(match self {
            Network::Mlp(m) => m.forward(x, mode),
            Network::Tcn(t) => t.forward(x, mode),
        })
    }

    pub fn backward(&mut self, g: &Array2<f64>) -> Array2<f64> {
        match self {
            Network::Mlp(m) => m.backward(g),
            Network::Tcn(t) => t.backward(g),
        }
    }

    /// Inference-mode outputs, computed in fixed-size chunks.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut net = self.clone();
        let mut out = Array2::zeros((x.nrows(), self.n_out()));
        let mut start = 0;
        while start < x.nrows() {
            let end = (start + PREDICT_BATCH).min(x.nrows());
            let y = net.forward(x.slice(s![start..end, ..]).to_owned(), Mode::Infer)?;
            out.slice_mut(s![start..end, ..]).assign(&y);
            start = end;
        }
        Ok(out)
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Network::Mlp(m) => m.params(),
            Network::Tcn(t) => t.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Network::Mlp(m) => m.params_mut(),
            Network::Tcn(t) => t.params_mut(),
        }
    }

    /// Non-trainable state (batch-norm running statistics), in a fixed order.
    pub fn buffers(&self) -> Vec<&ndarray::Array1<f64>> {
        match self {
            Network::Mlp(m) => m
                .hidden
                .iter()
                .filter_map(|h| h.bn.as_ref())
                .flat_map(|bn| [&bn.running_mean, &bn.running_var])
                .collect(),
            Network::Tcn(_) => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut ndarray::Array1<f64>> {
        match self {
            Network::Mlp(m) => m
                .hidden
                .iter_mut()
                .filter_map(|h| h.bn.as_mut())
                .flat_map(|bn| [&mut bn.running_mean, &mut bn.running_var])
                .collect(),
            Network::Tcn(_) => Vec::new(),
        }
    }

    /// `Σ θ²` over decayed parameters.
    pub fn l2_sum(&self) -> f64 {
        self.params()
            .iter()
            .filter(|p| p.decay)
            .map(|p| p.sum_squares())
            .sum()
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// SHA-256 over the little-endian bytes of every parameter and buffer.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for p in self.params() {
            for v in p.value.iter() {
                h.update(v.to_le_bytes());
            }
        }
        for b in self.buffers() {
            for v in b.iter() {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
