//! Second-order neural activation dynamics with a pure electromechanical delay,
//! and a derivative-free fit of its coefficients.

use log::warn;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub delay: usize,
}

impl ActivationParams {
    pub const IDENTITY: ActivationParams = ActivationParams {
        alpha: 1.0,
        beta1: 0.0,
        beta2: 0.0,
        delay: 0,
    };

    pub fn new(alpha: f64, beta1: f64, beta2: f64, delay: usize) -> Result<Self> {
        let p = Self {
            alpha,
            beta1,
            beta2,
            delay,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let c = [self.alpha, self.beta1, self.beta2];
        if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parameter(format!(
                "activation coefficients must be non-negative, got {c:?}"
            )));
        }
        if (c.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "activation coefficients must sum to 1, got {c:?}"
            )));
        }
        Ok(())
    }
}

fn run(e: &[f64], a: f64, b1: f64, b2: f64, d: usize, out: &mut Vec<f64>) {
    out.clear();
    let (mut p1, mut p2) = (0.0, 0.0);
    for t in 0..e.len() {
        let drive = if t >= d { e[t - d] } else { 0.0 };
        let p = a * drive + b1 * p1 + b2 * p2;
        out.push(p);
        p2 = p1;
        p1 = p;
    }
}

/// `p(t) = α·e(t−d) + β1·p(t−1) + β2·p(t−2)` with zero initial state.
pub fn activate(e: &[f64], params: &ActivationParams) -> Result<Vec<f64>> {
    params.validate()?;
    if let Some(t) = e.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Parameter(format!(
            "activation input must lie in [0, 1], got {} at sample {t}",
            e[t]
        )));
    }
    let mut out = Vec::with_capacity(e.len());
    run(
        e,
        params.alpha,
        params.beta1,
        params.beta2,
        params.delay,
        &mut out,
    );
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationFit {
    pub params: ActivationParams,
    /// Mean squared error over all fitted samples.
    pub objective: f64,
    /// Set when the target carried no information and the identity was returned.
    pub degenerate: bool,
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: [f64; 3]) -> [f64; 3] {
    let mut u = v;
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    let mut w = v.map(|x| (x - theta).max(0.0));
    let s: f64 = w.iter().sum();
    for x in &mut w {
        *x /= s;
    }
    w
}

struct Objective<'a> {
    segments: &'a [(&'a [f64], &'a [f64])],
    n: usize,
    scratch: Vec<f64>,
}

impl Objective<'_> {
    fn eval(&mut self, c: [f64; 3], d: usize) -> f64 {
        let mut sse = 0.0;
        for (e, target) in self.segments {
            run(e, c[0], c[1], c[2], d, &mut self.scratch);
            sse += self
                .scratch
                .iter()
                .zip(target.iter())
                .map(|(p, y)| (p - y) * (p - y))
                .sum::<f64>();
        }
        sse / self.n as f64
    }

    fn eval_free(&mut self, x: [f64; 2], d: usize) -> (f64, [f64; 3]) {
        let c = project_simplex([x[0], x[1], 1.0 - x[0] - x[1]]);
        (self.eval(c, d), c)
    }

    /// Nelder–Mead over (α, β1); β2 follows from the simplex constraint.
    fn refine(&mut self, start: [f64; 3], d: usize) -> ([f64; 3], f64) {
        let mut pts: Vec<[f64; 2]> = vec![
            [start[0], start[1]],
            [start[0] + 0.05, start[1]],
            [start[0], start[1] + 0.05],
        ];
        let mut vals: Vec<f64> = pts.iter().map(|p| self.eval_free(*p, d).0).collect();
        for _ in 0..400 {
            let mut idx = [0usize, 1, 2];
            idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            pts = idx.iter().map(|&i| pts[i]).collect();
            vals = idx.iter().map(|&i| vals[i]).collect();
            if (vals[2] - vals[0]).abs() <= 1e-16 + 1e-12 * vals[0].abs() {
                let spread = (pts[2][0] - pts[0][0]).abs() + (pts[2][1] - pts[0][1]).abs();
                if spread < 1e-10 {
                    break;
                }
            }
            let centroid = [(pts[0][0] + pts[1][0]) / 2.0, (pts[0][1] + pts[1][1]) / 2.0];
            let along = |t: f64| {
                [
                    centroid[0] + t * (pts[2][0] - centroid[0]),
                    centroid[1] + t * (pts[2][1] - centroid[1]),
                ]
            };
            let xr = along(-1.0);
            let fr = self.eval_free(xr, d).0;
            if fr < vals[0] {
                let xe = along(-2.0);
                let fe = self.eval_free(xe, d).0;
                if fe < fr {
                    pts[2] = xe;
                    vals[2] = fe;
                } else {
                    pts[2] = xr;
                    vals[2] = fr;
                }
            } else if fr < vals[1] {
                pts[2] = xr;
                vals[2] = fr;
            } else {
                let xc = if fr < vals[2] {
                    along(-0.5)
                } else {
                    along(0.5)
                };
                let fc = self.eval_free(xc, d).0;
                if fc < vals[2].min(fr) {
                    pts[2] = xc;
                    vals[2] = fc;
                } else {
                    for i in 1..3 {
                        pts[i] = [
                            pts[0][0] + 0.5 * (pts[i][0] - pts[0][0]),
                            pts[0][1] + 0.5 * (pts[i][1] - pts[0][1]),
                        ];
                        vals[i] = self.eval_free(pts[i], d).0;
                    }
                }
            }
        }
        let best = (0..3)
            .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
            .unwrap_or(0);
        let (f, c) = self.eval_free(pts[best], d);
        (c, f)
    }
}

/// Fit one parameter set to several independent recordings, each starting
/// from rest. Searches a 0.1 grid on the simplex for every delay in
/// `0..=max_delay`, then refines the most promising delays.
pub fn fit_activation_segments(
    segments: &[(&[f64], &[f64])],
    max_delay: usize,
) -> Result<ActivationFit> {
    let mut n = 0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (e, y) in segments {
        if e.len() != y.len() {
            return Err(Error::Length(format!(
                "activation input has {} samples, target {}",
                e.len(),
                y.len()
            )));
        }
        n += e.len();
        for v in y.iter() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        if e.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Parameter(
                "non-finite sample in activation fit".into(),
            ));
        }
    }
    if n == 0 {
        return Err(Error::Empty("activation fit needs samples".into()));
    }
    let mut obj = Objective {
        segments,
        n,
        scratch: Vec::new(),
    };
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        warn!("activation target is constant; falling back to identity dynamics");
        let objective = obj.eval([1.0, 0.0, 0.0], 0);
        return Ok(ActivationFit {
            params: ActivationParams::IDENTITY,
            objective,
            degenerate: true,
        });
    }

    let mut grid = Vec::new();
    for i in 0..=10 {
        for j in 0..=(10 - i) {
            let a = i as f64 / 10.0;
            let b1 = j as f64 / 10.0;
            grid.push([a, b1, ((10 - i - j) as f64 / 10.0).max(0.0)]);
        }
    }
    let mut per_delay: Vec<(f64, [f64; 3], usize)> = (0..=max_delay)
        .map(|d| {
            grid.iter()
                .map(|&c| (obj.eval(c, d), c, d))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap_or((f64::INFINITY, [1.0, 0.0, 0.0], d))
        })
        .collect();
    per_delay.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));

    let mut best = per_delay[0];
    for &(f0, c0, d) in per_delay.iter().take(4) {
        let (c, f) = obj.refine(c0, d);
        let cand = if f < f0 { (f, c, d) } else { (f0, c0, d) };
        if cand.0 < best.0 {
            best = cand;
        }
    }
    let (objective, c, delay) = best;
    // The simplex projection renormalizes, but guard against rounding.
    let c = project_simplex(c);
    Ok(ActivationFit {
        params: ActivationParams {
            alpha: c[0],
            beta1: c[1],
            beta2: c[2],
            delay,
        },
        objective,
        degenerate: false,
    })
}

pub fn fit_activation_params(e: &[f64], target: &[f64], max_delay: usize) -> Result<ActivationFit> {
    fit_activation_segments(&[(e, target)], max_delay)
}
