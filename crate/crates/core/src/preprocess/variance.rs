use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Sliding-window sample variance (divisor `n − 1`) over the last `W` samples.
///
/// Updates are O(1): the running mean and sum of squared deviations are
/// adjusted for the sample entering and the one leaving the ring. The sum is
/// recomputed from the buffer once per full turn of the ring so rounding
/// drift never accumulates over long recordings.
#[derive(Debug, Clone)]
pub struct RunningVariance {
    window: usize,
    buf: VecDeque<f64>,
    mean: f64,
    m2: f64,
    since_exact: usize,
}

impl RunningVariance {
    pub fn new(window: usize) -> Result<Self> {
        if window < 2 {
            return Err(Error::Parameter(format!(
                "variance window must be at least 2 samples, got {window}"
            )));
        }
        Ok(Self {
            window,
            buf: VecDeque::with_capacity(window),
            mean: 0.0,
            m2: 0.0,
            since_exact: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Push one sample and return the variance of the buffered samples.
    pub fn update(&mut self, x: f64) -> f64 {
        if self.buf.len() < self.window {
            self.buf.push_back(x);
            let n = self.buf.len() as f64;
            let delta = x - self.mean;
            self.mean += delta / n;
            self.m2 += delta * (x - self.mean);
        } else {
            let old = self.buf.pop_front().unwrap_or(0.0);
            self.buf.push_back(x);
            let old_mean = self.mean;
            self.mean += (x - old) / self.window as f64;
            self.m2 += (x - old) * (x - self.mean + old - old_mean);
            self.since_exact += 1;
            if self.since_exact >= self.window {
                self.resync();
            }
        }
        self.variance()
    }

    fn resync(&mut self) {
        let n = self.buf.len() as f64;
        let mean = self.buf.iter().sum::<f64>() / n;
        self.mean = mean;
        self.m2 = self.buf.iter().map(|v| (v - mean) * (v - mean)).sum();
        self.since_exact = 0;
    }

    pub fn variance(&self) -> f64 {
        match self.buf.len() {
            0 | 1 => 0.0,
            n => self.m2.max(0.0) / (n - 1) as f64,
        }
    }
}

/// Variance of `(t − W, t]` at every `t`; the first `W − 1` outputs use the
/// samples seen so far.
pub fn running_variance(x: &[f64], window: usize) -> Result<Vec<f64>> {
    let mut rv = RunningVariance::new(window)?;
    Ok(x.iter().map(|&v| rv.update(v)).collect())
}
