use ndarray::{Array2, Axis};
use rand_chacha::ChaCha8Rng;

use super::conv::CausalConv1d;
use super::layers::{
    dropout_mask, global_avg_pool, global_avg_pool_backward, relu, relu_backward, tanh_backward,
    Dense, LayerNorm, HE, LECUN,
};
use super::param::Param;
use super::Mode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TcnConfig {
    /// Sequence length of one input row.
    pub steps: usize,
    /// Channels per time step.
    pub n_in: usize,
    pub filters: usize,
    pub kernel: usize,
    pub dilations: Vec<usize>,
    pub dense: usize,
    pub n_out: usize,
    pub dropout: f64,
    pub layer_norm: bool,
}

impl TcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0
            || self.n_in == 0
            || self.filters == 0
            || self.dense == 0
            || self.n_out == 0
        {
            return Err(Error::Parameter("TCN sizes must be at least 1".into()));
        }
        if self.kernel < 1 || self.dilations.is_empty() || self.dilations.iter().any(|d| *d == 0) {
            return Err(Error::Parameter(
                "TCN needs kernel ≥ 1 and positive dilations".into(),
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

    /// `1 + Σ (k−1)·d` over both convolutions of every block.
    pub fn receptive_field(&self) -> usize {
        1 + self
            .dilations
            .iter()
            .map(|d| 2 * (self.kernel - 1) * d)
            .sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
struct BlockCache {
    a1: Option<Array2<f64>>,
    m1: Option<Array2<f64>>,
    a2: Option<Array2<f64>>,
    m2: Option<Array2<f64>>,
    out: Option<Array2<f64>>,
}

/// Two causal convolutions with normalization, rectifier and spatial dropout,
/// plus a residual path (1×1 convolution when widths differ).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub conv1: CausalConv1d,
    pub ln1: Option<LayerNorm>,
    pub conv2: CausalConv1d,
    pub ln2: Option<LayerNorm>,
    pub skip: Option<CausalConv1d>,
    cache: BlockCache,
}

/// Spatial dropout: one keep/drop decision per (sequence, channel).
fn spatial_mask(
    batch: usize,
    steps: usize,
    ch: usize,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let per_seq = dropout_mask(batch, ch, rate, rng);
    let mut m = Array2::zeros((batch * steps, ch));
    for (r, mut row) in m.axis_iter_mut(Axis(0)).enumerate() {
        row.assign(&per_seq.row(r / steps));
    }
    m
}

impl ResidualBlock {
    fn new(n_in: usize, cfg: &TcnConfig, dilation: usize, rng: &mut ChaCha8Rng) -> Self {
        let f = cfg.filters;
        Self {
            conv1: CausalConv1d::new(n_in, f, cfg.kernel, dilation, HE, rng),
            ln1: cfg.layer_norm.then(|| LayerNorm::new(f)),
            conv2: CausalConv1d::new(f, f, cfg.kernel, dilation, HE, rng),
            ln2: cfg.layer_norm.then(|| LayerNorm::new(f)),
            skip: (n_in != f).then(|| CausalConv1d::new(n_in, f, 1, 1, HE, rng)),
            cache: BlockCache::default(),
        }
    }

    fn forward(
        &mut self,
        x: &Array2<f64>,
        steps: usize,
        rate: f64,
        mode: &mut Mode<'_>,
        trace: &mut Option<&mut Vec<Array2<f64>>>,
    ) -> Array2<f64> {
        let train = mode.is_train();
        let batch = x.nrows() / steps;
        let mut record = |a: &Array2<f64>| {
            if let Some(t) = trace {
                t.push(a.clone());
            }
        };

        let mut h = self.conv1.forward(x, steps, train);
        record(&h);
        if let Some(ln) = &mut self.ln1 {
            h = ln.forward(h, train);
        }
        h = relu(h);
        if let Mode::Train(rng) = mode {
            self.cache.a1 = Some(h.clone());
            self.cache.m1 = (rate > 0.0).then(|| spatial_mask(batch, steps, h.ncols(), rate, rng));
            if let Some(m) = &self.cache.m1 {
                h *= m;
            }
        }
        let mut h = self.conv2.forward(&h, steps, train);
        record(&h);
        if let Some(ln) = &mut self.ln2 {
            h = ln.forward(h, train);
        }
        h = relu(h);
        if let Mode::Train(rng) = mode {
            self.cache.a2 = Some(h.clone());
            self.cache.m2 = (rate > 0.0).then(|| spatial_mask(batch, steps, h.ncols(), rate, rng));
            if let Some(m) = &self.cache.m2 {
                h *= m;
            }
        }
        match &mut self.skip {
            Some(c) => h += &c.forward(x, steps, train),
            None => h += x,
        }
        let out = relu(h);
        record(&out);
        if train {
            self.cache.out = Some(out.clone());
        }
        out
    }

    fn backward(&mut self, g: &Array2<f64>) -> Array2<f64> {
        let c = std::mem::take(&mut self.cache);
        let g = relu_backward(g, &c.out.expect("cached block output"));
        let mut h = g.clone();
        if let Some(m) = &c.m2 {
            h *= m;
        }
        h = relu_backward(&h, &c.a2.expect("cached activation"));
        if let Some(ln) = &mut self.ln2 {
            h = ln.backward(&h);
        }
        h = self.conv2.backward(&h);
        if let Some(m) = &c.m1 {
            h *= m;
        }
        h = relu_backward(&h, &c.a1.expect("cached activation"));
        if let Some(ln) = &mut self.ln1 {
            h = ln.backward(&h);
        }
        let mut gx = self.conv1.backward(&h);
        match &mut self.skip {
            Some(conv) => gx += &conv.backward(&g),
            None => gx += &g,
        }
        gx
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.conv1.params_mut();
        if let Some(ln) = &mut self.ln1 {
            out.extend(ln.params_mut());
        }
        out.extend(self.conv2.params_mut());
        if let Some(ln) = &mut self.ln2 {
            out.extend(ln.params_mut());
        }
        if let Some(s) = &mut self.skip {
            out.extend(s.params_mut());
        }
        out
    }

    fn params(&self) -> Vec<&Param> {
        let mut out = self.conv1.params();
        if let Some(ln) = &self.ln1 {
            out.extend(ln.params());
        }
        out.extend(self.conv2.params());
        if let Some(ln) = &self.ln2 {
            out.extend(ln.params());
        }
        if let Some(s) = &self.skip {
            out.extend(s.params());
        }
        out
    }
}

/// Residual causal blocks → global average pooling → dense rectifier → tanh.
///
/// Input rows hold `steps × n_in` values, time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tcn {
    pub config: TcnConfig,
    pub blocks: Vec<ResidualBlock>,
    pub head: Dense,
    pub out: Dense,
    head_act: Option<Array2<f64>>,
    y: Option<Array2<f64>>,
}

impl Tcn {
    pub fn new(config: TcnConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let mut blocks = Vec::new();
        let mut width = config.n_in;
        for &d in &config.dilations {
            blocks.push(ResidualBlock::new(width, &config, d, rng));
            width = config.filters;
        }
        let head = Dense::new(config.filters, config.dense, HE, rng);
        let out = Dense::new(config.dense, config.n_out, LECUN, rng);
        Ok(Self {
            config,
            blocks,
            head,
            out,
            head_act: None,
            y: None,
        })
    }

    fn to_sequence(&self, x: Array2<f64>) -> Array2<f64> {
        let rows = x.nrows() * self.config.steps;
        x.as_standard_layout()
            .into_owned()
            .into_shape_with_order((rows, self.config.n_in))
            .expect("row width checked by caller")
    }

    fn run_blocks(
        &mut self,
        x: Array2<f64>,
        mode: &mut Mode<'_>,
        mut trace: Option<&mut Vec<Array2<f64>>>,
    ) -> Array2<f64> {
        let steps = self.config.steps;
        let rate = self.config.dropout;
        let mut h = self.to_sequence(x);
        for block in &mut self.blocks {
            h = block.forward(&h, steps, rate, mode, &mut trace);
        }
        h
    }

    /// Every pre-pooling activation (convolution outputs and block outputs),
    /// each `[batch·steps × filters]`, in inference mode.
    pub fn trace(&mut self, x: Array2<f64>) -> Vec<Array2<f64>> {
        let mut out = Vec::new();
        self.run_blocks(x, &mut Mode::Infer, Some(&mut out));
        out
    }

    pub fn forward(&mut self, x: Array2<f64>, mut mode: Mode<'_>) -> Array2<f64> {
        let train = mode.is_train();
        let h = self.run_blocks(x, &mut mode, None);
        let pooled = global_avg_pool(&h, self.config.steps);
        let a = relu(self.head.forward(pooled, train));
        if train {
            self.head_act = Some(a.clone());
        }
        let y = self.out.forward(a, train).mapv_into(f64::tanh);
        if train {
            self.y = Some(y.clone());
        }
        y
    }

    pub fn backward(&mut self, g: &Array2<f64>) -> Array2<f64> {
        let y = self.y.take().expect("backward without training forward");
        let g = self.out.backward(&tanh_backward(g, &y));
        let g = relu_backward(&g, &self.head_act.take().expect("cached activation"));
        let g = self.head.backward(&g);
        let mut g = global_avg_pool_backward(&g, self.config.steps);
        for block in self.blocks.iter_mut().rev() {
            g = block.backward(&g);
        }
        let batch = g.nrows() / self.config.steps;
        g.as_standard_layout()
            .into_owned()
            .into_shape_with_order((batch, self.config.steps * self.config.n_in))
            .expect("contiguous gradient")
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = self
            .blocks
            .iter_mut()
            .flat_map(|b| b.params_mut())
            .collect();
        out.extend(self.head.params_mut());
        out.extend(self.out.params_mut());
        out
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out: Vec<&Param> = self.blocks.iter().flat_map(|b| b.params()).collect();
        out.extend(self.head.params());
        out.extend(self.out.params());
        out
    }
}
