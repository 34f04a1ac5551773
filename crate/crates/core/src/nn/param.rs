use ndarray::{ArrayD, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Ix1, Ix2, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A trainable tensor with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: ArrayD<f64>,
    pub grad: ArrayD<f64>,
    m: ArrayD<f64>,
    v: ArrayD<f64>,
    /// Whether the L2 penalty applies.
    pub decay: bool,
}

impl Param {
    pub fn new(value: ArrayD<f64>, decay: bool) -> Self {
        let z = ArrayD::zeros(value.raw_dim());
        Self {
            grad: z.clone(),
            m: z.clone(),
            v: z,
            value,
            decay,
        }
    }

    pub fn zeros(shape: &[usize], decay: bool) -> Self {
        Self::new(ArrayD::zeros(IxDyn(shape)), decay)
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Self::new(ArrayD::from_elem(IxDyn(shape), v), false)
    }

    /// Uniform in `[-limit, limit]` with `limit = sqrt(scale / fan_in)`.
    pub fn uniform(shape: &[usize], fan_in: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let limit = (scale / fan_in as f64).sqrt();
        let value = ArrayD::from_shape_simple_fn(IxDyn(shape), || rng.random_range(-limit..=limit));
        Self::new(value, true)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn mat(&self) -> ArrayView2<'_, f64> {
        self.value
            .view()
            .into_dimensionality::<Ix2>()
            .expect("2-d parameter")
    }

    pub fn vec(&self) -> ArrayView1<'_, f64> {
        self.value
            .view()
            .into_dimensionality::<Ix1>()
            .expect("1-d parameter")
    }

    pub fn grad_mat(&mut self) -> ArrayViewMut2<'_, f64> {
        self.grad
            .view_mut()
            .into_dimensionality::<Ix2>()
            .expect("2-d parameter")
    }

    pub fn grad_vec(&mut self) -> ArrayViewMut1<'_, f64> {
        self.grad
            .view_mut()
            .into_dimensionality::<Ix1>()
            .expect("1-d parameter")
    }

    pub fn sum_squares(&self) -> f64 {
        self.value.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [&mut Param]) {
        self.t += 1;
        let lr_t =
            self.lr * (1.0 - self.beta2.powi(self.t)).sqrt() / (1.0 - self.beta1.powi(self.t));
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for p in params.iter_mut() {
            let Param {
                value, grad, m, v, ..
            } = &mut **p;
            ndarray::Zip::from(value)
                .and(&*grad)
                .and(m)
                .and(v)
                .for_each(|x, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *x -= lr_t * *m / (v.sqrt() + eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = Param::filled(&[3], 1.0);
        p.grad.assign(&ndarray::arr1(&[0.5, -2.0, 1e3]).into_dyn());
        let mut opt = Adam::new(0.01);
        opt.step(&mut [&mut p]);
        for (v, want) in p.value.iter().zip([0.99, 1.01, 0.99]) {
            assert!((v - want).abs() < 1e-6);
        }
    }
}
