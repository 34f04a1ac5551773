use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use super::layers::{
    dropout_mask, relu, relu_backward, tanh_backward, BatchNorm, Dense, HE, LECUN,
};
use super::param::Param;
use super::Mode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub n_in: usize,
    pub hidden: Vec<usize>,
    pub n_out: usize,
    pub dropout: f64,
    pub batch_norm: bool,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_in == 0 || self.n_out == 0 || self.hidden.iter().any(|h| *h == 0) {
            return Err(Error::Parameter(
                "MLP layer sizes must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Parameter(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hidden {
    pub dense: Dense,
    pub bn: Option<BatchNorm>,
    act: Option<Array2<f64>>,
    mask: Option<Array2<f64>>,
}

/// Dense → batch norm → rectifier → dropout per hidden layer, tanh output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub config: MlpConfig,
    pub hidden: Vec<Hidden>,
    pub out: Dense,
    y: Option<Array2<f64>>,
}

impl Mlp {
    pub fn new(config: MlpConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let mut hidden = Vec::new();
        let mut width = config.n_in;
        for &h in &config.hidden {
            hidden.push(Hidden {
                dense: Dense::new(width, h, HE, rng),
                bn: config.batch_norm.then(|| BatchNorm::new(h)),
                act: None,
                mask: None,
            });
            width = h;
        }
        let out = Dense::new(width, config.n_out, LECUN, rng);
        Ok(Self {
            config,
            hidden,
            out,
            y: None,
        })
    }

    pub fn forward(&mut self, x: Array2<f64>, mut mode: Mode<'_>) -> Array2<f64> {
        let train = mode.is_train();
        let rate = self.config.dropout;
        let mut h = x;
        for layer in &mut self.hidden {
            h = layer.dense.forward(h, train);
            if let Some(bn) = &mut layer.bn {
                h = bn.forward(h, train);
            }
            h = relu(h);
            if let Mode::Train(rng) = &mut mode {
                layer.act = Some(h.clone());
                if rate > 0.0 {
                    let m = dropout_mask(h.nrows(), h.ncols(), rate, rng);
                    h *= &m;
                    layer.mask = Some(m);
                } else {
                    layer.mask = None;
                }
            }
        }
        let y = self.out.forward(h, train).mapv_into(f64::tanh);
        if train {
            self.y = Some(y.clone());
        }
        y
    }

    pub fn backward(&mut self, g: &Array2<f64>) -> Array2<f64> {
        let y = self.y.take().expect("backward without training forward");
        let mut g = self.out.backward(&tanh_backward(g, &y));
        for layer in self.hidden.iter_mut().rev() {
            if let Some(m) = layer.mask.take() {
                g *= &m;
            }
            g = relu_backward(&g, &layer.act.take().expect("cached activation"));
            if let Some(bn) = &mut layer.bn {
                g = bn.backward(&g);
            }
            g = layer.dense.backward(&g);
        }
        g
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for layer in &mut self.hidden {
            out.extend(layer.dense.params_mut());
            if let Some(bn) = &mut layer.bn {
                out.extend(bn.params_mut());
            }
        }
        out.extend(self.out.params_mut());
        out
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        for layer in &self.hidden {
            out.extend(layer.dense.params());
            if let Some(bn) = &layer.bn {
                out.extend(bn.params());
            }
        }
        out.extend(self.out.params());
        out
    }
}
