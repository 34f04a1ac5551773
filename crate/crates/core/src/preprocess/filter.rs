//! Digital Butterworth design (bilinear transform, pre-warped edges) and
//! zero-phase application over cascaded biquads.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let num = self.b[0] + zi * (self.b[1] + zi * self.b[2]);
        let den = self.a[0] + zi * (self.a[1] + zi * self.a[2]);
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Transposed direct-form II state reached after a unit step has settled.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        [g - self.b[0], self.b[2] - self.a[2] * g]
    }
}

/// Cascade of biquads designed from an analog prototype of order `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
    pub order: usize,
}

fn prototype_poles(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

fn warp(f_hz: f64, fs: f64) -> f64 {
    (PI * f_hz / fs).tan()
}

fn bilinear(s: Complex64) -> Complex64 {
    (1.0 + s) / (1.0 - s)
}

fn section_from_pole(p: Complex64, b: [f64; 3]) -> Biquad {
    Biquad {
        b,
        a: [1.0, -2.0 * p.re, p.norm_sqr()],
    }
}

fn check_order(order: usize) -> Result<()> {
    if order < 2 || order % 2 != 0 {
        return Err(Error::Parameter(format!(
            "filter order must be even and at least 2, got {order}"
        )));
    }
    Ok(())
}

impl Sos {
    /// Band-pass of prototype order `order`; the digital filter has `2·order` poles.
    pub fn bandpass(order: usize, low_hz: f64, high_hz: f64, fs: f64) -> Result<Self> {
        check_order(order)?;
        if !(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0) {
            return Err(Error::Parameter(format!(
                "band edges must satisfy 0 < {low_hz} < {high_hz} < {}",
                fs / 2.0
            )));
        }
        let w1 = warp(low_hz, fs);
        let w2 = warp(high_hz, fs);
        let bw = w2 - w1;
        let w0sq = w1 * w2;

        let mut sections = Vec::with_capacity(order);
        for p in prototype_poles(order) {
            let half = p * (bw / 2.0);
            let root = (half * half - w0sq).sqrt();
            for s in [half + root, half - root] {
                let z = bilinear(s);
                if z.im > 0.0 {
                    sections.push(section_from_pole(z, [1.0, 0.0, -1.0]));
                }
            }
        }
        if sections.len() != order {
            return Err(Error::Parameter("band-pass design lost a pole pair".into()));
        }

        // Unit gain at the geometric centre of the warped band.
        let zc = bilinear(Complex64::new(0.0, w0sq.sqrt()));
        let mut sos = Self { sections, order };
        let g = sos.response_at(zc).norm();
        for v in &mut sos.sections[0].b {
            *v /= g;
        }
        Ok(sos)
    }

    pub fn lowpass(order: usize, cut_hz: f64, fs: f64) -> Result<Self> {
        check_order(order)?;
        if !(cut_hz > 0.0 && cut_hz < fs / 2.0) {
            return Err(Error::Parameter(format!(
                "cutoff {cut_hz} Hz outside (0, {})",
                fs / 2.0
            )));
        }
        let wc = warp(cut_hz, fs);
        let sections: Vec<Biquad> = prototype_poles(order)
            .into_iter()
            .map(|p| bilinear(p * wc))
            .filter(|z| z.im > 0.0)
            .map(|z| section_from_pole(z, [1.0, 2.0, 1.0]))
            .collect();
        let mut sos = Self { sections, order };
        let g: f64 = sos.sections.iter().map(Biquad::dc_gain).product();
        for v in &mut sos.sections[0].b {
            *v /= g;
        }
        Ok(sos)
    }

    pub fn response_at(&self, z: Complex64) -> Complex64 {
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z))
    }

    /// Single-pass magnitude at `f_hz`.
    pub fn magnitude(&self, f_hz: f64, fs: f64) -> f64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * f_hz / fs);
        self.response_at(z).norm()
    }

    /// Expanded transfer function coefficients `(b, a)`.
    pub fn to_tf(&self) -> (Vec<f64>, Vec<f64>) {
        let mut b = vec![1.0];
        let mut a = vec![1.0];
        for s in &self.sections {
            b = poly_mul(&b, &s.b);
            a = poly_mul(&a, &s.a);
        }
        (b, a)
    }

    fn steady_state(&self) -> Vec<[f64; 2]> {
        let mut gain = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let st = s.step_state();
                let out = [st[0] * gain, st[1] * gain];
                gain *= s.dc_gain();
                out
            })
            .collect()
    }

    /// Causal filtering starting from the steady state for a constant input `x[0]`.
    pub fn filter_steady(&self, x: &[f64]) -> Vec<f64> {
        let x0 = x.first().copied().unwrap_or(0.0);
        let mut state: Vec<[f64; 2]> = self
            .steady_state()
            .into_iter()
            .map(|[a, b]| [a * x0, b * x0])
            .collect();
        let mut y = x.to_vec();
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            for v in y.iter_mut() {
                let xin = *v;
                let out = s.b[0] * xin + z[0];
                z[0] = s.b[1] * xin - s.a[1] * out + z[1];
                z[1] = s.b[2] * xin - s.a[2] * out;
                *v = out;
            }
        }
        y
    }

    fn forward_backward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.filter_steady(x);
        y.reverse();
        let mut y = self.filter_steady(&y);
        y.reverse();
        y
    }

    /// Zero-phase filtering with odd-reflection padding of `3·(order+1)` samples.
    ///
    /// The result averages the forward-backward and backward-forward passes,
    /// which makes it exactly symmetric under time reversal.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        if n <= 3 * self.order {
            return Err(Error::Length(format!(
                "signal of {n} samples too short for zero-phase filtering of order {} (need > {})",
                self.order,
                3 * self.order
            )));
        }
        let pad = (3 * (self.order + 1)).min(n - 1);
        let ext = odd_extend(x, pad);

        let fb = self.forward_backward(&ext);
        let mut rev = ext;
        rev.reverse();
        let mut bf = self.forward_backward(&rev);
        bf.reverse();

        Ok(fb[pad..pad + n]
            .iter()
            .zip(&bf[pad..pad + n])
            .map(|(a, b)| 0.5 * (a + b))
            .collect())
    }
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn odd_extend(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    let first = x[0];
    let last = x[n - 1];
    out.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
    out.extend_from_slice(x);
    out.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));
    out
}
