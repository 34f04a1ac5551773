use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{weighted_huber_batch, LossWeights};
use super::param::Adam;
use super::{Mode, Network};
use crate::error::{Error, Result};
use crate::post::shuffle_indices;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub l2: f64,
    pub huber_delta: f64,
    pub loss_epsilon: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Parameter(
                "training needs a positive learning rate, batch size and epoch budget".into(),
            ));
        }
        if !(self.l2 >= 0.0) || !(self.huber_delta > 0.0) || !(self.loss_epsilon > 0.0) {
            return Err(Error::Parameter(
                "l2 ≥ 0, huber delta > 0 and epsilon > 0 required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Zero-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub weights: LossWeights,
}

fn check_pair(x: ArrayView2<f64>, y: ArrayView2<f64>, what: &str) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::Shape(format!(
            "{what}: {} input rows but {} target rows",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::Empty(format!("{what} set is empty")));
    }
    Ok(())
}

/// Weighted Huber loss of `net` on `(x, y)` in inference mode.
pub fn evaluate_loss(
    net: &Network,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    w: &LossWeights,
    delta: f64,
) -> Result<f64> {
    let pred = net.predict(x)?;
    Ok(weighted_huber_batch(&pred, y, w, delta).0)
}

/// Mini-batch Adam on the weighted Huber loss plus `l2·Σθ²`, with early
/// stopping on validation loss. The best weights are left in `net`.
pub fn train(
    net: &mut Network,
    x_train: ArrayView2<f64>,
    y_train: ArrayView2<f64>,
    x_val: ArrayView2<f64>,
    y_val: ArrayView2<f64>,
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    check_pair(x_train, y_train, "training")?;
    check_pair(x_val, y_val, "validation")?;
    if y_train.ncols() != net.n_out() || y_val.ncols() != net.n_out() {
        return Err(Error::Shape(format!("model has {} outputs", net.n_out())));
    }
    let weights = LossWeights::from_targets(y_train, cfg.loss_epsilon)?;
    let mut opt = Adam::new(cfg.learning_rate);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x00d2_0b0a);
    let mut best = (f64::INFINITY, net.clone(), 0usize);
    let mut history = History {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        weights: weights.clone(),
    };

    for epoch in 0..cfg.max_epochs {
        let order = shuffle_indices(
            x_train.nrows(),
            cfg.seed.wrapping_mul(1_000_003).wrapping_add(epoch as u64),
        );
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let xb = x_train.select(Axis(0), idx);
            let yb = y_train.select(Axis(0), idx);
            let loss = batch_step(
                net,
                xb,
                yb.view(),
                &weights,
                cfg.huber_delta,
                cfg.l2,
                &mut dropout_rng,
            )?;
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    msg: "loss is not finite".into(),
                });
            }
            total += loss * idx.len() as f64;
            opt.step(&mut net.params_mut());
        }
        let train_loss = total / x_train.nrows() as f64;
        let val_loss = evaluate_loss(net, x_val, y_val, &weights, cfg.huber_delta)?;
        if !val_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                msg: "validation loss is not finite".into(),
            });
        }
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        if val_loss < best.0 {
            best = (val_loss, net.clone(), epoch);
        } else if epoch - best.2 >= cfg.patience {
            break;
        }
    }
    *net = best.1;
    history.best_epoch = best.2;
    Ok(history)
}

/// Training-mode loss (data term plus `l2·Σθ²`) on one batch. Leaves the
/// matching gradients, L2 included, in the network's parameters.
pub fn batch_step(
    net: &mut Network,
    x: Array2<f64>,
    y: ArrayView2<f64>,
    w: &LossWeights,
    delta: f64,
    l2: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let pred = net.forward(x, Mode::Train(rng))?;
    let (loss, grad) = weighted_huber_batch(&pred, y, w, delta);
    net.backward(&grad);
    if l2 > 0.0 {
        for p in net.params_mut().into_iter().filter(|p| p.decay) {
            ndarray::Zip::from(&mut p.grad)
                .and(&p.value)
                .for_each(|g, &v| *g += 2.0 * l2 * v);
        }
    }
    Ok(loss + l2 * net.l2_sum())
}
