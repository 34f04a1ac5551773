//! Complex Morlet wavelet power over a short window.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest cycle count satisfying `n·fs/f ≤ window_len`, capped at `max_cycles`.
pub fn max_cycles(f_hz: f64, fs: f64, window_len: usize, cap: usize) -> usize {
    ((f_hz * window_len as f64 / fs + 1e-9).floor() as usize).min(cap)
}

/// Gaussian-windowed complex exponential with `n_cycles` cycles of `f_hz`,
/// spanning `round(n_cycles·fs/f)` samples, unit energy.
pub fn wavelet(f_hz: f64, n_cycles: usize, fs: f64) -> Vec<Complex64> {
    let m = ((n_cycles as f64 * fs / f_hz).round() as usize).max(1);
    let sigma = n_cycles as f64 / (2.0 * PI * f_hz);
    let centre = (m as f64 - 1.0) / 2.0;
    let mut w: Vec<Complex64> = (0..m)
        .map(|k| {
            let t = (k as f64 - centre) / fs;
            let env = (-t * t / (2.0 * sigma * sigma)).exp();
            Complex64::from_polar(env, 2.0 * PI * f_hz * t)
        })
        .collect();
    let norm = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    w.iter_mut().for_each(|c| *c /= norm);
    w
}

/// Precomputed wavelet bank for a fixed window length.
#[derive(Debug, Clone)]
pub struct MorletBank {
    pub freqs: Vec<f64>,
    pub cycles: Vec<usize>,
    kernels: Vec<Vec<Complex64>>,
    window_len: usize,
}

impl MorletBank {
    pub fn new(freqs: &[f64], cycles: &[usize], fs: f64, window_len: usize) -> Result<Self> {
        if freqs.len() != cycles.len() {
            return Err(Error::Parameter(format!(
                "{} frequencies but {} cycle counts",
                freqs.len(),
                cycles.len()
            )));
        }
        for (&f, &n) in freqs.iter().zip(cycles) {
            if !(f > 0.0 && f <= fs / 2.0) {
                return Err(Error::Parameter(format!(
                    "wavelet frequency {f} Hz outside (0, {}]",
                    fs / 2.0
                )));
            }
            if n == 0 || n as f64 * fs / f > window_len as f64 + 1e-9 {
                return Err(Error::Parameter(format!(
                    "{n} cycles at {f} Hz span {:.1} samples, more than the {window_len}-sample window",
                    n as f64 * fs / f
                )));
            }
        }
        Ok(Self {
            freqs: freqs.to_vec(),
            cycles: cycles.to_vec(),
            kernels: freqs
                .iter()
                .zip(cycles)
                .map(|(&f, &n)| wavelet(f, n, fs))
                .collect(),
            window_len,
        })
    }

    /// Bank with the largest legal cycle count per frequency.
    pub fn auto(freqs: &[f64], fs: f64, window_len: usize, cap: usize) -> Result<Self> {
        let cycles: Vec<usize> = freqs
            .iter()
            .map(|&f| max_cycles(f, fs, window_len, cap))
            .collect();
        Self::new(freqs, &cycles, fs, window_len)
    }

    /// Mean squared magnitude of the centred ("same") convolution per frequency.
    pub fn power(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.window_len {
            return Err(Error::Length(format!(
                "morlet window has {} samples, expected {}",
                x.len(),
                self.window_len
            )));
        }
        let n = x.len() as isize;
        Ok(self
            .kernels
            .iter()
            .map(|w| {
                let m = w.len() as isize;
                let half = (m - 1) / 2;
                let mut acc = 0.0;
                for t in 0..n {
                    let mut c = Complex64::new(0.0, 0.0);
                    let lo = (t + half - m + 1).max(0);
                    let hi = (t + half).min(n - 1);
                    for s in lo..=hi {
                        c += w[(t + half - s) as usize] * x[s as usize];
                    }
                    acc += c.norm_sqr();
                }
                acc / n as f64
            })
            .collect())
    }
}

/// Single-window convenience over an explicit cycle list.
pub fn morlet_power(x: &[f64], freqs: &[f64], cycles: &[usize], fs: f64) -> Result<Vec<f64>> {
    MorletBank::new(freqs, cycles, fs, x.len())?.power(x)
}
