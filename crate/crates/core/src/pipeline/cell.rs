//! Training and scoring one (model, feature set, seed) combination.

use ndarray::{concatenate, s, Array1, Array2, ArrayD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::manifest::{ModelKind, RunManifest};
use crate::data::Condition;
use crate::error::{Error, Result};
use crate::eval::{filter_predictions, score, SeedResult};
use crate::features::{Feature, FeatureMatrix};
use crate::nn::bundle::Bundle;
use crate::nn::{train, History, Mlp, MlpConfig, Network, Tcn, TcnConfig, TrainConfig};
use crate::post::{split, stack_history, OneHot, Reducer, SplitSpec, Standardizer};
use crate::torque::MinMaxScaler;

/// How feature rows become network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Reduced features with history, flattened, then the one-hot code.
    Flat,
    /// Reduced features with history as a sequence of `history + 1` steps,
    /// each followed by the one-hot code.
    Stacked,
    /// Raw time points as a sequence of window samples, every step carrying
    /// all channels and the one-hot code.
    TimeMajor { channels: usize, window: usize },
}

impl Layout {
    pub fn name(&self) -> String {
        match self {
            Layout::Flat => "flat".into(),
            Layout::Stacked => "stacked".into(),
            Layout::TimeMajor { channels, window } => format!("time-major:{channels}x{window}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Layout::Flat),
            "stacked" => Ok(Layout::Stacked),
            _ => {
                let dims = s
                    .strip_prefix("time-major:")
                    .and_then(|d| d.split_once('x'))
                    .and_then(|(c, w)| Some((c.parse().ok()?, w.parse().ok()?)));
                match dims {
                    Some((channels, window)) => Ok(Layout::TimeMajor { channels, window }),
                    None => Err(Error::Bundle(format!("unknown input layout {s:?}"))),
                }
            }
        }
    }

    /// Layout a model of `kind` uses on feature columns `columns`.
    pub fn choose(kind: ModelKind, fm: &FeatureMatrix) -> Result<Self> {
        if kind == ModelKind::Mlp {
            return Ok(Layout::Flat);
        }
        let tp = fm
            .columns
            .iter()
            .all(|c| matches!(c.feature, Feature::TimePoint(_)));
        if !tp {
            return Ok(Layout::Stacked);
        }
        let channels = fm.columns.iter().map(|c| c.channel + 1).max().unwrap_or(0);
        if channels == 0 || fm.n_cols() % channels != 0 {
            return Err(Error::Shape(
                "time-point columns do not form a channel × sample grid".into(),
            ));
        }
        let window = fm.n_cols() / channels;
        for (j, c) in fm.columns.iter().enumerate() {
            if c.channel != j / window || c.feature != Feature::TimePoint(j % window) {
                return Err(Error::Shape(format!(
                    "time-point column {j} out of channel-major order"
                )));
            }
        }
        Ok(Layout::TimeMajor { channels, window })
    }
}

/// Fitted mapping from feature rows to network input rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub layout: Layout,
    pub reducer: Option<Reducer>,
    pub onehot: OneHot,
    pub history: usize,
}

impl Encoder {
    pub fn fit(
        layout: Layout,
        train_rows: &Array2<f64>,
        weights_kg: &[f64],
        m: &RunManifest,
    ) -> Result<Self> {
        let reducer = match layout {
            Layout::TimeMajor { .. } => None,
            Layout::Flat | Layout::Stacked => Some(Reducer::fit(train_rows.view(), m.pca_retain)?),
        };
        Ok(Self {
            layout,
            reducer,
            onehot: OneHot::new(weights_kg),
            history: m.history,
        })
    }

    /// `(steps, channels per step)` of the network input.
    pub fn shape(&self, n_cols: usize) -> (usize, usize) {
        let oh = self.onehot.width();
        let k = self.reducer.as_ref().map_or(n_cols, Reducer::width);
        match self.layout {
            Layout::Flat => (1, (self.history + 1) * k + oh),
            Layout::Stacked => (self.history + 1, k + oh),
            Layout::TimeMajor { channels, window } => (window, channels + oh),
        }
    }

    /// Input rows for a block of consecutive feature rows. History stacking
    /// only looks back inside the block and inside each group.
    pub fn encode(
        &self,
        rows: &Array2<f64>,
        conditions: &[Condition],
        groups: &[usize],
    ) -> Result<Array2<f64>> {
        let code = self.onehot.encode_all(conditions)?;
        let oh = code.ncols();
        match self.layout {
            Layout::Flat => {
                let z = self.reduce(rows)?;
                let stacked = stack_history(z.view(), groups, self.history)?;
                concatenate(Axis(1), &[stacked.view(), code.view()])
                    .map_err(|e| Error::Shape(e.to_string()))
            }
            Layout::Stacked => {
                let z = self.reduce(rows)?;
                let k = z.ncols();
                let stacked = stack_history(z.view(), groups, self.history)?;
                let steps = self.history + 1;
                let mut out = Array2::zeros((rows.nrows(), steps * (k + oh)));
                for h in 0..steps {
                    let base = h * (k + oh);
                    out.slice_mut(s![.., base..base + k])
                        .assign(&stacked.slice(s![.., h * k..(h + 1) * k]));
                    out.slice_mut(s![.., base + k..base + k + oh]).assign(&code);
                }
                Ok(out)
            }
            Layout::TimeMajor { channels, window } => {
                if rows.ncols() != channels * window {
                    return Err(Error::Shape(format!(
                        "expected {} time-point columns, got {}",
                        channels * window,
                        rows.ncols()
                    )));
                }
                let width = channels + oh;
                let mut out = Array2::zeros((rows.nrows(), window * width));
                for (i, row) in rows.outer_iter().enumerate() {
                    for t in 0..window {
                        for c in 0..channels {
                            out[[i, t * width + c]] = row[c * window + t];
                        }
                        for b in 0..oh {
                            out[[i, t * width + channels + b]] = code[[i, b]];
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    fn reduce(&self, rows: &Array2<f64>) -> Result<Array2<f64>> {
        match &self.reducer {
            Some(r) => r.apply(rows.view()),
            None => Ok(rows.clone()),
        }
    }
}

/// Everything needed to turn new feature rows into torques.
#[derive(Debug, Clone)]
pub struct CellModel {
    pub network: Network,
    pub encoder: Encoder,
    pub scaler: MinMaxScaler,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub result: SeedResult,
    pub model: CellModel,
    pub history: History,
}

fn build_network(
    kind: ModelKind,
    steps: usize,
    width: usize,
    m: &RunManifest,
    seed: u64,
) -> Result<Network> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match kind {
        ModelKind::Mlp => Network::Mlp(Mlp::new(
            MlpConfig {
                n_in: steps * width,
                hidden: m.mlp_hidden.clone(),
                n_out: 3,
                dropout: m.dropout,
                batch_norm: true,
            },
            &mut rng,
        )?),
        ModelKind::Tcn => Network::Tcn(Tcn::new(
            TcnConfig {
                steps,
                n_in: width,
                filters: m.tcn_filters,
                kernel: m.tcn_kernel,
                dilations: m.tcn_dilations.clone(),
                dense: m.tcn_dense,
                n_out: 3,
                dropout: m.dropout,
                layer_norm: true,
            },
            &mut rng,
        )?),
    })
}

fn take(fm: &FeatureMatrix, idx: &[usize]) -> (Array2<f64>, Vec<Condition>, Vec<usize>) {
    (
        fm.rows.select(Axis(0), idx),
        idx.iter().map(|&i| fm.conditions[i]).collect(),
        idx.iter().map(|&i| fm.groups[i]).collect(),
    )
}

/// Split, fit the encoder and target scaler on the training rows, train with
/// early stopping, then predict the test rows, filter each recording's
/// predictions and score them in N·m.
pub fn run_cell(
    fm: &FeatureMatrix,
    targets: &Array2<f64>,
    kind: ModelKind,
    weights_kg: &[f64],
    m: &RunManifest,
    seed: u64,
) -> Result<CellOutcome> {
    if targets.nrows() != fm.n_rows() || targets.ncols() != 3 {
        return Err(Error::Shape(format!(
            "{} feature rows but a {}×{} target matrix",
            fm.n_rows(),
            targets.nrows(),
            targets.ncols()
        )));
    }
    let parts = split(
        &fm.conditions,
        &SplitSpec::new(m.test_fraction, m.val_fraction)?,
    )?;
    let layout = Layout::choose(kind, fm)?;
    let (x_tr, c_tr, g_tr) = take(fm, &parts.train);
    let (x_va, c_va, g_va) = take(fm, &parts.val);
    let (x_te, c_te, g_te) = take(fm, &parts.test);

    let encoder = Encoder::fit(layout, &x_tr, weights_kg, m)?;
    let in_tr = encoder.encode(&x_tr, &c_tr, &g_tr)?;
    let in_va = encoder.encode(&x_va, &c_va, &g_va)?;
    let in_te = encoder.encode(&x_te, &c_te, &g_te)?;

    let y_tr = targets.select(Axis(0), &parts.train);
    let y_va = targets.select(Axis(0), &parts.val);
    let y_te = targets.select(Axis(0), &parts.test);
    let scaler = MinMaxScaler::fit(&y_tr)?;

    let (steps, width) = encoder.shape(fm.n_cols());
    let mut network = build_network(kind, steps, width, m, seed)?;
    let cfg = TrainConfig {
        learning_rate: m.learning_rate,
        batch_size: m.batch_size,
        max_epochs: m.max_epochs,
        patience: m.patience,
        l2: if kind == ModelKind::Mlp { m.l2 } else { 0.0 },
        huber_delta: m.huber_delta,
        loss_epsilon: m.loss_epsilon,
        seed,
    };
    let history = train(
        &mut network,
        in_tr.view(),
        scaler.transform(&y_tr).view(),
        in_va.view(),
        scaler.transform(&y_va).view(),
        &cfg,
    )?;

    let pred = scaler.inverse(&network.predict(in_te.view())?);
    let mut predictions: [Vec<f64>; 3] = Default::default();
    let mut start = 0;
    while start < g_te.len() {
        let mut end = start + 1;
        while end < g_te.len() && g_te[end] == g_te[start] {
            end += 1;
        }
        for (j, out) in predictions.iter_mut().enumerate() {
            let block: Vec<f64> = pred.slice(s![start..end, j]).to_vec();
            out.extend(filter_predictions(&block).values);
        }
        start = end;
    }
    let targets_out: [Vec<f64>; 3] = [0, 1, 2].map(|j| y_te.column(j).to_vec());
    let scores = [
        score(&predictions[0], &targets_out[0])?,
        score(&predictions[1], &targets_out[1])?,
        score(&predictions[2], &targets_out[2])?,
    ];
    log::info!(
        "{} seed {seed}: {} epochs, R² {:.3}/{:.3}/{:.3}",
        kind.as_str(),
        history.train_loss.len(),
        scores[0].r2,
        scores[1].r2,
        scores[2].r2
    );
    Ok(CellOutcome {
        result: SeedResult {
            seed,
            scores,
            predictions,
            targets: targets_out,
            epochs: history.train_loss.len(),
        },
        model: CellModel {
            network,
            encoder,
            scaler,
        },
        history,
    })
}

fn put_standardizer(b: &mut Bundle, prefix: &str, s: &Standardizer) {
    b.put_vec(&format!("{prefix}.mean"), &s.mean.to_vec());
    b.put_vec(&format!("{prefix}.std"), &s.std.to_vec());
    let flags: Vec<f64> = s.constant.iter().map(|c| f64::from(u8::from(*c))).collect();
    b.put_vec(&format!("{prefix}.constant"), &flags);
}

/// Bundle with the network, encoder, target scaler and any extra text
/// sections (manifest snapshot, normalization maxima, activation parameters).
pub fn model_bundle(
    model: &CellModel,
    extra_text: &[(&str, String)],
    extra_vecs: &[(String, Vec<f64>)],
) -> Bundle {
    let mut b = Bundle::new();
    b.put_network("model", &model.network);
    let enc = &model.encoder;
    b.put_text("encoder.layout", enc.layout.name());
    b.put_text("encoder.history", enc.history.to_string());
    b.put_vec("encoder.onehot_weights", &enc.onehot.weights_kg);
    if let Some(r) = &enc.reducer {
        put_standardizer(&mut b, "reducer.pre", &r.pre);
        b.put_vec("reducer.pca.mean", &r.pca.mean.to_vec());
        b.put_tensor(
            "reducer.pca.components",
            r.pca.components.clone().into_dyn(),
        );
        b.put_vec("reducer.pca.explained_ratio", &r.pca.explained_ratio);
        put_standardizer(&mut b, "reducer.post", &r.post);
    }
    b.put_vec("scaler.min", &model.scaler.min);
    b.put_vec("scaler.max", &model.scaler.max);
    for (name, text) in extra_text {
        b.put_text(name, text.clone());
    }
    for (name, v) in extra_vecs {
        b.put_vec(name, v);
    }
    b
}

fn get_standardizer(b: &Bundle, prefix: &str) -> Result<Standardizer> {
    Ok(Standardizer {
        mean: Array1::from(b.vec(&format!("{prefix}.mean"))?),
        std: Array1::from(b.vec(&format!("{prefix}.std"))?),
        constant: b
            .vec(&format!("{prefix}.constant"))?
            .iter()
            .map(|v| *v != 0.0)
            .collect(),
    })
}

impl CellModel {
    pub fn from_bundle(b: &Bundle) -> Result<Self> {
        let network = b.network("model")?;
        let layout = Layout::parse(b.text("encoder.layout")?)?;
        let history = b
            .text("encoder.history")?
            .parse()
            .map_err(|_| Error::Bundle("encoder.history is not an integer".into()))?;
        let reducer = if b.has("reducer.pca.components") {
            let comps: &ArrayD<f64> = b.tensor("reducer.pca.components")?;
            let components = comps
                .clone()
                .into_dimensionality()
                .map_err(|_| Error::Bundle("PCA components are not a matrix".into()))?;
            Some(Reducer {
                pre: get_standardizer(b, "reducer.pre")?,
                pca: crate::post::Pca {
                    mean: Array1::from(b.vec("reducer.pca.mean")?),
                    components,
                    explained_ratio: b.vec("reducer.pca.explained_ratio")?,
                },
                post: get_standardizer(b, "reducer.post")?,
            })
        } else {
            None
        };
        Ok(Self {
            network,
            encoder: Encoder {
                layout,
                reducer,
                onehot: OneHot::new(&b.vec("encoder.onehot_weights")?),
                history,
            },
            scaler: MinMaxScaler {
                min: b.vec("scaler.min")?,
                max: b.vec("scaler.max")?,
            },
        })
    }

    /// Torques in N·m for consecutive feature rows, unfiltered.
    pub fn predict(
        &self,
        rows: &Array2<f64>,
        conditions: &[Condition],
        groups: &[usize],
    ) -> Result<Array2<f64>> {
        let x = self.encoder.encode(rows, conditions, groups)?;
        Ok(self.scaler.inverse(&self.network.predict(x.view())?))
    }
}
