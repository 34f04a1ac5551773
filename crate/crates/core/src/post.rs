//! Train/validation/test split, standardization, PCA, history stacking,
//! one-hot condition encoding and shuffling. Every fitted statistic is
//! learned from training rows only.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Condition, Movement};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub val_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.10,
            val_fraction: 0.15,
        }
    }
}

impl SplitSpec {
    pub fn new(test_fraction: f64, val_fraction: f64) -> Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::config(
                "test_fraction",
                format!("must lie in (0, 1), got {test_fraction}"),
            ));
        }
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(Error::config(
                "val_fraction",
                format!("must lie in (0, 1), got {val_fraction}"),
            ));
        }
        Ok(Self {
            test_fraction,
            val_fraction,
        })
    }
}

/// Row indices of each partition, in original order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per condition, the last `test_fraction` of its rows form the test block and
/// the last `val_fraction` of the remainder the validation block.
pub fn split(conditions: &[Condition], spec: &SplitSpec) -> Result<Split> {
    let spec = SplitSpec::new(spec.test_fraction, spec.val_fraction)?;
    let mut conds: Vec<Condition> = conditions.to_vec();
    conds.sort();
    conds.dedup();
    if conds.is_empty() {
        return Err(Error::Split("no rows to split".into()));
    }
    let mut out = Split::default();
    for c in conds {
        let idx: Vec<usize> = (0..conditions.len())
            .filter(|&i| conditions[i] == c)
            .collect();
        let n = idx.len();
        let n_test = (n as f64 * spec.test_fraction).round() as usize;
        let rest = n.saturating_sub(n_test);
        let n_val = (rest as f64 * spec.val_fraction).round() as usize;
        let n_train = rest.saturating_sub(n_val);
        if n_test == 0 || n_val == 0 || n_train == 0 {
            return Err(Error::Split(format!(
                "condition {c} has {n} windows, too few for a train/val/test split"
            )));
        }
        out.train.extend_from_slice(&idx[..n_train]);
        out.val.extend_from_slice(&idx[n_train..rest]);
        out.test.extend_from_slice(&idx[rest..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Column-wise z-scoring with population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
    /// Columns with no spread; passed through untouched.
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Empty("standardizer needs at least one row".into()));
        }
        let mean = x
            .mean_axis(Axis(0))
            .unwrap_or_else(|| Array1::zeros(x.ncols()));
        let std = x.std_axis(Axis(0), 0.0);
        let constant = std
            .iter()
            .zip(mean.iter())
            .map(|(s, m)| !(*s > 1e-12 * m.abs().max(1.0)))
            .collect();
        Ok(Self {
            mean,
            std,
            constant,
        })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.width() {
            return Err(Error::Shape(format!(
                "standardizer fitted on {} columns, got {}",
                self.width(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            if !self.constant[j] {
                let (m, s) = (self.mean[j], self.std[j]);
                col.mapv_inplace(|v| (v - m) / s);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Array1<f64>,
    /// `k × p`, orthonormal rows.
    pub components: Array2<f64>,
    /// Variance fraction of every component, not only the retained ones.
    pub explained_ratio: Vec<f64>,
}

impl Pca {
    pub fn fit(x: ArrayView2<f64>, retain: f64) -> Result<Self> {
        if !(retain > 0.0 && retain <= 1.0) {
            return Err(Error::config(
                "pca_retain",
                format!("must lie in (0, 1], got {retain}"),
            ));
        }
        let (n, p) = x.dim();
        if n < 2 {
            return Err(Error::Empty("PCA needs at least two rows".into()));
        }
        let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(p));
        let centred = &x - &mean;
        let cov = centred.t().dot(&centred) / (n as f64 - 1.0);
        let cov = DMatrix::from_fn(p, p, |i, j| 0.5 * (cov[[i, j]] + cov[[j, i]]));
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let total: f64 = vals.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Parameter("PCA input has no variance".into()));
        }
        let explained_ratio: Vec<f64> = vals.iter().map(|v| v / total).collect();
        let mut k = p;
        let mut cum = 0.0;
        for (i, r) in explained_ratio.iter().enumerate() {
            cum += r;
            if cum >= retain - 1e-10 {
                k = i + 1;
                break;
            }
        }
        let mut components = Array2::zeros((k, p));
        for (row, &idx) in order.iter().take(k).enumerate() {
            let v = eig.eigenvectors.column(idx);
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for j in 0..p {
                components[[row, j]] = sign * v[j];
            }
        }
        Ok(Self {
            mean,
            components,
            explained_ratio,
        })
    }

    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "PCA fitted on {} columns, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        Ok((&x - &self.mean).dot(&self.components.t()))
    }

    pub fn inverse_transform(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.k() {
            return Err(Error::Shape(format!(
                "PCA has {} components, got {} columns",
                self.k(),
                z.ncols()
            )));
        }
        Ok(z.dot(&self.components) + &self.mean)
    }
}

/// Concatenate each row with its `depth` predecessors (oldest first) inside
/// runs of equal `groups` id. The first rows of a run repeat the run's first row.
pub fn stack_history(x: ArrayView2<f64>, groups: &[usize], depth: usize) -> Result<Array2<f64>> {
    let (n, k) = x.dim();
    if groups.len() != n {
        return Err(Error::Shape(format!(
            "{} group ids for {n} rows",
            groups.len()
        )));
    }
    let mut out = Array2::zeros((n, (depth + 1) * k));
    let mut run_start = 0;
    for t in 0..n {
        if t > 0 && groups[t] != groups[t - 1] {
            run_start = t;
        }
        for h in 0..=depth {
            let lag = depth - h;
            let src = t.saturating_sub(lag).max(run_start);
            out.slice_mut(s![t, h * k..(h + 1) * k]).assign(&x.row(src));
        }
    }
    Ok(out)
}

/// Weight bits (one per configured mass) followed by movement bits.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHot {
    pub weights_kg: Vec<f64>,
}

impl OneHot {
    pub fn new(weights_kg: &[f64]) -> Self {
        Self {
            weights_kg: weights_kg.to_vec(),
        }
    }

    pub fn width(&self) -> usize {
        self.weights_kg.len() + Movement::ALL.len()
    }

    pub fn encode(&self, c: &Condition) -> Result<Vec<f64>> {
        let key = c.key().0;
        let w = self
            .weights_kg
            .iter()
            .position(|w| (w * 1e6).round() as i64 == key)
            .ok_or_else(|| {
                Error::Encoding(format!(
                    "weight {} kg not in the configured set",
                    c.weight_kg
                ))
            })?;
        let mut v = vec![0.0; self.width()];
        v[w] = 1.0;
        let m = Movement::ALL
            .iter()
            .position(|m| *m == c.movement)
            .unwrap_or(0);
        v[self.weights_kg.len() + m] = 1.0;
        Ok(v)
    }

    pub fn encode_all(&self, conds: &[Condition]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((conds.len(), self.width()));
        for (i, c) in conds.iter().enumerate() {
            let v = self.encode(c)?;
            out.row_mut(i).iter_mut().zip(v).for_each(|(d, s)| *d = s);
        }
        Ok(out)
    }
}

/// Seeded permutation of `0..n`.
pub fn shuffle_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Rows of `x` in a seeded random order.
pub fn shuffle_train(x: ArrayView2<f64>, seed: u64) -> Array2<f64> {
    x.select(Axis(0), &shuffle_indices(x.nrows(), seed))
}

/// Standardize → PCA → re-standardize, fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Reducer {
    pub pre: Standardizer,
    pub pca: Pca,
    pub post: Standardizer,
}

impl Reducer {
    pub fn fit(train: ArrayView2<f64>, retain: f64) -> Result<Self> {
        let pre = Standardizer::fit(train)?;
        let z = pre.apply(train)?;
        let pca = Pca::fit(z.view(), retain)?;
        let r = pca.transform(z.view())?;
        let post = Standardizer::fit(r.view())?;
        Ok(Self { pre, pca, post })
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = self.pre.apply(x)?;
        let r = self.pca.transform(z.view())?;
        self.post.apply(r.view())
    }

    pub fn width(&self) -> usize {
        self.pca.k()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cond(w: f64, m: Movement) -> Condition {
        Condition::new(w, m).unwrap()
    }

    #[test]
    fn stratified_split_arithmetic() {
        let mut conds = Vec::new();
        for w in [0.0, 1.1, 1.85] {
            for m in Movement::ALL {
                conds.extend(std::iter::repeat_n(cond(w, m), 100));
            }
        }
        let s = split(&conds, &SplitSpec::default()).unwrap();
        assert_eq!(s.test.len(), 60);
        assert_eq!(s.train.len() + s.val.len(), 540);
        for c in conds.iter().step_by(100) {
            assert_eq!(s.test.iter().filter(|&&i| conds[i] == *c).count(), 10);
        }
        // test block is the tail of each condition
        assert!(s.test.contains(&99) && !s.test.contains(&89));
    }

    #[test]
    fn zero_test_fraction_is_config_error() {
        let spec = SplitSpec {
            test_fraction: 0.0,
            val_fraction: 0.15,
        };
        assert_eq!(
            split(&[cond(0.0, Movement::Complex)], &spec)
                .unwrap_err()
                .category(),
            "config"
        );
    }

    #[test]
    fn standardize_example() {
        let x = array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        let st = Standardizer::fit(x.view()).unwrap();
        let z = st.apply(x.view()).unwrap();
        assert!((z[[0, 0]] + 1.224_744_871_391_589).abs() < 1e-12);
        assert_eq!(z[[1, 0]], 0.0);
        assert!((z[[2, 0]] - 1.224_744_871_391_589).abs() < 1e-12);
        assert!(st.constant[1]);
        assert_eq!(z.column(1).to_vec(), vec![5.0; 3]);
    }

    #[test]
    fn history_depth_two() {
        let x = array![[1.0], [2.0], [3.0], [10.0], [20.0]];
        let s = stack_history(x.view(), &[0, 0, 0, 1, 1], 2).unwrap();
        assert_eq!(s.row(0).to_vec(), vec![1.0, 1.0, 1.0]);
        assert_eq!(s.row(2).to_vec(), vec![1.0, 2.0, 3.0]);
        assert_eq!(s.row(3).to_vec(), vec![10.0, 10.0, 10.0]);
        assert_eq!(s.row(4).to_vec(), vec![10.0, 10.0, 20.0]);
        assert_eq!(stack_history(x.view(), &[0; 5], 0).unwrap(), x);
    }

    #[test]
    fn one_hot_examples() {
        let oh = OneHot::new(&[0.0, 1.1, 1.85]);
        assert_eq!(
            oh.encode(&cond(1.10, Movement::Grasping)).unwrap(),
            vec![0.0, 1.0, 0.0, 1.0, 0.0]
        );
        assert_eq!(
            oh.encode(&cond(0.0, Movement::Complex)).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0, 1.0]
        );
        assert_eq!(
            oh.encode(&cond(2.5, Movement::Complex))
                .unwrap_err()
                .category(),
            "encoding"
        );
    }

    #[test]
    fn pca_rank_two() {
        let x = Array2::from_shape_fn((40, 5), |(i, j)| {
            let a = (i as f64 * 0.37).sin();
            let b = (i as f64 * 1.3).cos();
            a * (j as f64 + 1.0) + b * (5.0 - j as f64)
        });
        assert_eq!(Pca::fit(x.view(), 0.99).unwrap().k(), 2);
        assert_eq!(Pca::fit(x.view(), 1.0).unwrap().k(), 2);
    }

    #[test]
    fn shuffle_is_seeded() {
        assert_eq!(shuffle_indices(50, 7), shuffle_indices(50, 7));
        assert_ne!(shuffle_indices(50, 7), shuffle_indices(50, 8));
    }
}
