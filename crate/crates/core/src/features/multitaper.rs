//! Multitaper PSD with discrete prolate spheroidal (Slepian) tapers.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::{num_complex::Complex64, Fft, FftPlanner};

use crate::error::{Error, Result};

/// First `k` DPSS tapers of length `n` for time-bandwidth product `nw`,
/// each of unit energy.
///
/// Taken as the leading eigenvectors of the symmetric tridiagonal matrix that
/// commutes with the time-frequency concentration operator. Signs follow the
/// usual convention: symmetric tapers sum positive, antisymmetric tapers start
/// positive.
pub fn dpss(n: usize, nw: f64, k: usize) -> Result<Vec<Vec<f64>>> {
    if n < 2 || k == 0 || k > n {
        return Err(Error::Parameter(format!(
            "dpss needs n ≥ 2 and 1 ≤ k ≤ n, got n={n}, k={k}"
        )));
    }
    if !(nw > 0.0 && nw < n as f64 / 2.0) {
        return Err(Error::Parameter(format!(
            "time-bandwidth {nw} outside (0, n/2)"
        )));
    }
    let w = nw / n as f64;
    let cos = (2.0 * std::f64::consts::PI * w).cos();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let c = (n as f64 - 1.0 - 2.0 * i as f64) / 2.0;
        m[(i, i)] = c * c * cos;
        if i + 1 < n {
            let off = (i + 1) as f64 * (n - i - 1) as f64 / 2.0;
            m[(i, i + 1)] = off;
            m[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut out = Vec::with_capacity(k);
    for (rank, &idx) in order.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(idx);
        let norm = col.norm();
        let mut v: Vec<f64> = col.iter().map(|x| x / norm).collect();
        let flip = if rank % 2 == 0 {
            v.iter().sum::<f64>() < 0.0
        } else {
            v.iter().find(|x| x.abs() > 1e-12).is_some_and(|x| *x < 0.0)
        };
        if flip {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        out.push(v);
    }
    Ok(out)
}

/// Reusable multitaper estimator for a fixed window length.
#[derive(Clone)]
pub struct Multitaper {
    tapers: Vec<Vec<f64>>,
    nfft: usize,
    fs: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Multitaper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Multitaper")
            .field("n", &self.window_len())
            .field("tapers", &self.tapers.len())
            .field("nfft", &self.nfft)
            .field("fs", &self.fs)
            .finish()
    }
}

impl Multitaper {
    pub fn new(n: usize, nw: f64, k: usize, fs: f64) -> Result<Self> {
        let tapers = dpss(n, nw, k)?;
        let nfft = 2 * n;
        let fft = FftPlanner::new().plan_fft_forward(nfft);
        Ok(Self {
            tapers,
            nfft,
            fs,
            fft,
        })
    }

    pub fn window_len(&self) -> usize {
        self.tapers.first().map_or(0, Vec::len)
    }

    pub fn tapers(&self) -> &[Vec<f64>] {
        &self.tapers
    }

    /// Bin frequencies of [`Multitaper::psd`] in Hz.
    pub fn freqs(&self) -> Vec<f64> {
        (0..=self.nfft / 2)
            .map(|i| i as f64 * self.fs / self.nfft as f64)
            .collect()
    }

    pub fn bin_width(&self) -> f64 {
        self.fs / self.nfft as f64
    }

    /// One-sided spectral density at [`Multitaper::freqs`].
    ///
    /// Bin `i` stands for the cell `[f_i − df/2, f_i + df/2]` clipped to
    /// `[0, fs/2]`, so the DC and Nyquist cells are half width. Integrating
    /// the piecewise-constant density over `[0, fs/2]` gives the taper-weighted
    /// mean square of the window.
    pub fn psd(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.window_len() {
            return Err(Error::Length(format!(
                "multitaper window has {} samples, expected {}",
                x.len(),
                self.window_len()
            )));
        }
        let half = self.nfft / 2;
        let mut acc = vec![0.0; half + 1];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nfft];
        for taper in &self.tapers {
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for (b, (v, t)) in buf.iter_mut().zip(x.iter().zip(taper)) {
                b.re = v * t;
            }
            self.fft.process(&mut buf);
            for (a, c) in acc.iter_mut().zip(&buf) {
                *a += c.norm_sqr();
            }
        }
        let scale = 2.0 / (self.tapers.len() as f64 * self.fs);
        acc.iter_mut().for_each(|a| *a *= scale);
        Ok(acc)
    }

    /// Integral of the density over `[0, fs/2]`.
    pub fn total_power(&self, x: &[f64]) -> Result<f64> {
        let nyq = self.fs / 2.0;
        Ok(self.band_power(x, &[(0.0, nyq)])?[0])
    }

    /// Integral of the piecewise-constant density over each `[lo, hi]` band.
    pub fn band_power(&self, x: &[f64], bands: &[(f64, f64)]) -> Result<Vec<f64>> {
        let nyq = self.fs / 2.0;
        for &(lo, hi) in bands {
            if !(lo >= 0.0 && lo < hi && hi <= nyq) {
                return Err(Error::Parameter(format!(
                    "band [{lo}, {hi}] outside [0, {nyq}]"
                )));
            }
        }
        let psd = self.psd(x)?;
        let half_df = self.bin_width() / 2.0;
        let freqs = self.freqs();
        Ok(bands
            .iter()
            .map(|&(lo, hi)| {
                freqs
                    .iter()
                    .zip(&psd)
                    .map(|(f, p)| {
                        let a = (f - half_df).max(lo).max(0.0);
                        let b = (f + half_df).min(hi).min(nyq);
                        p * (b - a).max(0.0)
                    })
                    .sum()
            })
            .collect())
    }
}

/// `count` equal-width bands spanning `[lo, hi]`.
pub fn equal_bands(lo: f64, hi: f64, count: usize) -> Vec<(f64, f64)> {
    let w = (hi - lo) / count as f64;
    (0..count)
        .map(|i| {
            (
                lo + w * i as f64,
                if i + 1 == count {
                    hi
                } else {
                    lo + w * (i + 1) as f64
                },
            )
        })
        .collect()
}
