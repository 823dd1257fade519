//! Regularized logistic regression objectives
//! `f_i(z) = sum_j log(1 + exp(-b_ij a_ij'z)) + reg/2 |z|^2`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::libsvm::{shard_dataset, Dataset, DatasetRow, ShardStrategy};
use super::{standard_normal, LocalObjective};
use crate::{Error, Result};

/// Logistic local objective over a dense feature block.
#[derive(Debug, Clone)]
pub struct LogisticLocal {
    features: DMatrix<f64>, // n_i x p, one sample per row
    labels: DVector<f64>,   // entries in {-1, +1}
    reg: f64,
    lip: f64,
}

impl LogisticLocal {
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>, reg: f64) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if !(reg > 0.0) {
            return Err(Error::InvalidArgument("regularizer must be positive".into()));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidArgument("labels must be -1 or +1".into()));
        }
        // 1/4 is the sharp bound on the sigmoid derivative.
        let lip = reg + 0.25 * gram_spectral_norm(&features);
        Ok(LogisticLocal { features, labels, reg, lip })
    }

    pub fn sample_count(&self) -> usize {
        self.features.nrows()
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    /// Per-sample margins `-y_j * (F z)_j`.
    fn margins(&self, z: &DVector<f64>) -> DVector<f64> {
        let fz = &self.features * z;
        DVector::from_fn(fz.len(), |j, _| -self.labels[j] * fz[j])
    }
}

/// log(1 + e^u) without overflow for large |u|.
fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// Logistic sigmoid, stable for large |u|.
fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl LocalObjective for LogisticLocal {
    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn value(&self, z: &DVector<f64>) -> f64 {
        let m = self.margins(z);
        m.iter().map(|&u| softplus(u)).sum::<f64>() + 0.5 * self.reg * z.norm_squared()
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let m = self.margins(z);
        // d/dz softplus(-y a'z) = -y * sigmoid(-y a'z) * a
        let coeff = DVector::from_fn(m.len(), |j, _| -self.labels[j] * sigmoid(m[j]));
        self.features.tr_mul(&coeff) + self.reg * z
    }

    fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let m = self.margins(z);
        let p = self.dim();
        let mut h = DMatrix::<f64>::identity(p, p) * self.reg;
        for j in 0..m.len() {
            let s = sigmoid(m[j]);
            let w = s * (1.0 - s);
            let row = self.features.row(j);
            for a in 0..p {
                for b in a..p {
                    let v = w * row[a] * row[b];
                    h[(a, b)] += v;
                    if a != b {
                        h[(b, a)] += v;
                    }
                }
            }
        }
        h
    }

    fn mu(&self) -> f64 {
        self.reg
    }

    fn lip(&self) -> f64 {
        self.lip
    }
}

/// Largest eigenvalue of `F'F` by power iteration (metadata only).
fn gram_spectral_norm(f: &DMatrix<f64>) -> f64 {
    let p = f.ncols();
    if p == 0 || f.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(p, 1.0 / (p as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w = f.tr_mul(&(f * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = w / norm;
        let new_lambda = norm;
        let done = (new_lambda - lambda).abs() <= 1e-10 * new_lambda.max(1.0);
        v = next;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    lambda
}

/// Recipe for a self-contained logistic instance: Gaussian features scaled to
/// unit row norm, a planted separator, and Gaussian label noise.
#[derive(Debug, Clone)]
pub struct SyntheticLogistic {
    pub nodes: usize,
    pub dim: usize,
    pub samples: usize,
    pub noise: f64,
    pub seed: u64,
    pub reg: f64,
}

/// Generates the synthetic dataset and shards it contiguously across nodes.
pub fn make_synthetic_logistic(spec: &SyntheticLogistic) -> Result<Vec<LogisticLocal>> {
    if spec.dim == 0 || spec.samples == 0 {
        return Err(Error::InvalidArgument("need dim >= 1 and samples >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let separator = DVector::from_fn(spec.dim, |_, _| standard_normal(&mut rng));
    let mut rows = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        let mut a = DVector::from_fn(spec.dim, |_, _| standard_normal(&mut rng));
        let norm = a.norm();
        if norm > 0.0 {
            a /= norm;
        }
        let margin = a.dot(&separator) + spec.noise * standard_normal(&mut rng);
        let label = if margin >= 0.0 { 1.0 } else { -1.0 };
        let features = (0..spec.dim).map(|k| (k + 1, a[k])).collect();
        rows.push(DatasetRow { label, features });
    }
    let dataset = Dataset { rows, dim: spec.dim };
    shard_dataset(&dataset, spec.nodes, ShardStrategy::Contiguous, spec.seed, spec.reg)
}
