//! Central finite-difference checks of hand-written backward passes.

use emgtorque::nn::conv::CausalConv1d;
use emgtorque::nn::layers::{
    global_avg_pool, global_avg_pool_backward, relu, relu_backward, tanh_backward, BatchNorm,
    Dense, LayerNorm, HE,
};
use emgtorque::nn::loss::LossWeights;
use emgtorque::nn::train::batch_step;
use emgtorque::nn::{Mlp, MlpConfig, Network, Param, Tcn, TcnConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, 1e-6)`; the floor keeps round-off on
/// vanishing gradients from counting as disagreement.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

pub fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn jitter(p: &mut Param, rng: &mut ChaCha8Rng) {
    p.value.mapv_inplace(|v| v + rng.random_range(-0.3..0.3));
}

pub trait Probe {
    fn loss(&mut self, x: &Array2<f64>) -> f64;
    /// Runs a training forward and backward; returns the input gradient if
    /// the probe checks it.
    fn analytic(&mut self, x: &Array2<f64>) -> Option<Array2<f64>>;
    fn params(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }
}

/// Largest relative error over every parameter entry and input entry.
pub fn check(probe: &mut dyn Probe, x: &Array2<f64>) -> f64 {
    let gx = probe
        .analytic(x)
        .map(|g| g.as_standard_layout().into_owned());
    let grads: Vec<Vec<f64>> = probe
        .params()
        .iter()
        .map(|p| p.grad.iter().copied().collect())
        .collect();
    let mut worst = 0.0f64;
    for (i, g) in grads.iter().enumerate() {
        for (j, a) in g.iter().enumerate() {
            let nudge = |probe: &mut dyn Probe, d: f64| {
                probe.params()[i]
                    .value
                    .as_slice_memory_order_mut()
                    .expect("contiguous")[j] += d;
            };
            nudge(probe, H);
            let up = probe.loss(x);
            nudge(probe, -2.0 * H);
            let down = probe.loss(x);
            nudge(probe, H);
            worst = worst.max(rel_err(*a, (up - down) / (2.0 * H)));
        }
    }
    if let Some(gx) = gx {
        for idx in 0..x.len() {
            let mut xp = x.clone();
            xp.as_slice_mut().expect("contiguous")[idx] += H;
            let up = probe.loss(&xp);
            xp.as_slice_mut().expect("contiguous")[idx] -= 2.0 * H;
            let down = probe.loss(&xp);
            worst = worst.max(rel_err(
                gx.as_slice().expect("contiguous")[idx],
                (up - down) / (2.0 * H),
            ));
        }
    }
    worst
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a * b).sum()
}

pub struct DenseProbe(pub Dense, pub Array2<f64>);

impl Probe for DenseProbe {
    fn loss(&mut self, x: &Array2<f64>) -> f64 {
        dot(&self.0.forward(x.clone(), false), &self.1)
    }
    fn analytic(&mut self, x: &Array2<f64>) -> Option<Array2<f64>> {
        self.0.forward(x.clone(), true);
        Some(self.0.backward(&self.1))
    }
    fn params(&mut self) -> Vec<&mut Param> {
        self.0.params_mut()
    }
}

pub struct BatchNormProbe(pub BatchNorm, pub Array2<f64>);

impl Probe for BatchNormProbe {
    fn loss(&mut self, x: &Array2<f64>) -> f64 {
        dot(&self.0.forward(x.clone(), true), &self.1)
    }
    fn analytic(&mut self, x: &Array2<f64>) -> Option<Array2<f64>> {
        self.0.forward(x.clone(), true);
        Some(self.0.backward(&self.1))
    }
    fn params(&mut self) -> Vec<&mut Param> {
        self.0.params_mut()
    }
}

pub struct LayerNormProbe(pub LayerNorm, pub Array2<f64>);

impl Probe for LayerNormProbe {
    fn loss(&mut self, x: &Array2<f64>) -> f64 {
        dot(&self.0.forward(x.clone(), false), &self.1)
    }
    fn analytic(&mut self, x: &Array2<f64>) -> Option<Array2<f64>> {
        self.0.forward(x.clone(), true);
        Some(self.0.backward(&self.1))
    }
    fn params(&mut self) -> Vec<&mut Param> {
        self.0.params_mut()
    }
}

pub struct ConvProbe(pub CausalConv1d, pub usize, pub Array2<f64>);

impl Probe for ConvProbe {
    fn loss(&mut self, x: &Array2<f64>) -> f64 {
        dot(&self.0.forward(x, self.1, false), &self.2)
    }
    fn analytic(&mut self, x: &Array2<f64>) -> Option<Array2<f64>> {
        self.0.forward(x, self.1, true);
        Some(self.0.backward(&self.2))
    }
    fn params(&mut self) -> Vec<&mut Param> {
        self.0.params_mut()
    }
}

pub struct PoolProbe(pub usize, pub Array2<f64>);

impl Probe for PoolProbe {
    fn loss(&mut self, x: &Array2<f64>) -> f64 {
        dot(&global_avg_pool(x, self.0), &self.1)
    }
    fn analytic(&mut self, _x: &Array2<f64>) -> Option<Array2<f64>> {
        Some(global_avg_pool_backward(&self.1, self.0))
    }
}

/// Dense layer followed by tanh or a rectifier.
pub struct HeadProbe {
    pub dense: Dense,
    pub tanh: bool,
    pub r: Array2<f64>,
}

impl HeadProbe {
    fn act(&self, z: Array2<f64>) -> Array2<f64> {
        if self.tanh {
            z.mapv_into(f64::tanh)
        } else {
            relu(z)
        }
    }
}

impl Probe for HeadProbe {
    fn loss(&mut self, x: &Array2<f64>) -> f64 {
        let z = self.dense.forward(x.clone(), false);
        dot(&self.act(z), &self.r)
    }
    fn analytic(&mut self, x: &Array2<f64>) -> Option<Array2<f64>> {
        let z = self.dense.forward(x.clone(), true);
        let y = self.act(z);
        let g = if self.tanh {
            tanh_backward(&self.r, &y)
        } else {
            relu_backward(&self.r, &y)
        };
        Some(self.dense.backward(&g))
    }
    fn params(&mut self) -> Vec<&mut Param> {
        self.dense.params_mut()
    }
}

/// Whole network under the weighted Huber loss with L2; dropout masks are
/// replayed from a fixed seed on every evaluation.
pub struct NetworkProbe {
    pub net: Network,
    pub y: Array2<f64>,
    pub weights: LossWeights,
    pub delta: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Probe for NetworkProbe {
    fn loss(&mut self, x: &Array2<f64>) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        batch_step(
            &mut self.net,
            x.clone(),
            self.y.view(),
            &self.weights,
            self.delta,
            self.l2,
            &mut rng,
        )
        .unwrap()
    }
    fn analytic(&mut self, x: &Array2<f64>) -> Option<Array2<f64>> {
        self.loss(x);
        None
    }
    fn params(&mut self) -> Vec<&mut Param> {
        self.net.params_mut()
    }
}

/// Worst relative error per layer type over `configs` random configurations.
pub fn run_all(configs: usize) -> Vec<(&'static str, f64)> {
    let mut worst = vec![
        ("dense", 0.0f64),
        ("batch-norm", 0.0),
        ("causal-conv", 0.0),
        ("layer-norm", 0.0),
        ("pooling", 0.0),
        ("tanh-head", 0.0),
        ("rectifier-head", 0.0),
        ("mlp+huber+l2", 0.0),
        ("tcn+huber+l2", 0.0),
    ];
    for k in 0..configs as u64 {
        let rng = &mut ChaCha8Rng::seed_from_u64(1000 + k);
        let rows = rng.random_range(2..7);
        let n_in = rng.random_range(1..6);
        let n_out = rng.random_range(1..5);

        let mut d = Dense::new(n_in, n_out, HE, rng);
        jitter(&mut d.b, rng);
        let r = random(rows, n_out, rng);
        let e = check(&mut DenseProbe(d, r), &random(rows, n_in, rng));
        worst[0].1 = worst[0].1.max(e);

        let mut bn = BatchNorm::new(n_in);
        jitter(&mut bn.gamma, rng);
        jitter(&mut bn.beta, rng);
        let r = random(rows, n_in, rng);
        let e = check(&mut BatchNormProbe(bn, r), &random(rows, n_in, rng));
        worst[1].1 = worst[1].1.max(e);

        let steps = rng.random_range(3..12);
        let batch = rng.random_range(1..4);
        let kernel = rng.random_range(1..4);
        let dilation = rng.random_range(1..4);
        let mut conv = CausalConv1d::new(n_in, n_out, kernel, dilation, HE, rng);
        jitter(&mut conv.b, rng);
        let r = random(batch * steps, n_out, rng);
        let e = check(
            &mut ConvProbe(conv, steps, r),
            &random(batch * steps, n_in, rng),
        );
        worst[2].1 = worst[2].1.max(e);

        let width = n_in + 1;
        let mut ln = LayerNorm::new(width);
        jitter(&mut ln.gamma, rng);
        jitter(&mut ln.beta, rng);
        let r = random(rows, width, rng);
        let e = check(&mut LayerNormProbe(ln, r), &random(rows, width, rng));
        worst[3].1 = worst[3].1.max(e);

        let r = random(batch, n_in, rng);
        let e = check(&mut PoolProbe(steps, r), &random(batch * steps, n_in, rng));
        worst[4].1 = worst[4].1.max(e);

        for (slot, tanh) in [(5, true), (6, false)] {
            let mut dense = Dense::new(n_in, n_out, HE, rng);
            jitter(&mut dense.b, rng);
            let r = random(rows, n_out, rng);
            let e = check(&mut HeadProbe { dense, tanh, r }, &random(rows, n_in, rng));
            worst[slot].1 = worst[slot].1.max(e);
        }

        let mlp_cfg = MlpConfig {
            n_in,
            hidden: vec![rng.random_range(2..6), rng.random_range(2..5)],
            n_out: 3,
            dropout: 0.1,
            batch_norm: true,
        };
        let mut net = Network::Mlp(Mlp::new(mlp_cfg, rng).unwrap());
        for p in net.params_mut() {
            jitter(p, rng);
        }
        let rows = rows + 2;
        let y = random(rows, 3, rng).mapv(|v| 1.5 * v);
        let weights = LossWeights::from_targets(y.view(), 1e-6).unwrap();
        let x = random(rows, n_in, rng);
        let mut probe = NetworkProbe {
            net,
            y,
            weights,
            delta: 0.5,
            l2: 0.01,
            seed: k,
        };
        worst[7].1 = worst[7].1.max(check(&mut probe, &x));

        let tcn_cfg = TcnConfig {
            steps,
            n_in,
            filters: rng.random_range(2..5),
            kernel: 3,
            dilations: vec![1, 2],
            dense: rng.random_range(2..5),
            n_out: 3,
            dropout: 0.1,
            layer_norm: true,
        };
        let mut net = Network::Tcn(Tcn::new(tcn_cfg, rng).unwrap());
        for p in net.params_mut() {
            jitter(p, rng);
        }
        let y = random(batch, 3, rng).mapv(|v| 1.5 * v);
        let weights = LossWeights::new(ndarray::arr1(&[1.0, 2.0, 0.5]), 1e-6).unwrap();
        let x = random(batch, steps * n_in, rng);
        let mut probe = NetworkProbe {
            net,
            y,
            weights,
            delta: 0.5,
            l2: 0.01,
            seed: k,
        };
        worst[8].1 = worst[8].1.max(check(&mut probe, &x));
    }
    worst
}
