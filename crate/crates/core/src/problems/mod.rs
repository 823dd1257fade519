//! Local objective functions, problem generators, data ingestion, and the
//! centralized oracle that produces reference solutions.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

mod libsvm;
mod logistic;
mod quadratic;

pub use libsvm::{parse_libsvm, shard_dataset, Dataset, DatasetRow, ParseOptions, ShardStrategy};
pub use logistic::{make_synthetic_logistic, LogisticLocal, SyntheticLogistic};
pub(crate) use quadratic::random_orthogonal;
pub use quadratic::{make_quadratic, make_quadratic_shared_q, QuadraticLocal};

/// A node's private objective: smooth, strongly convex, twice differentiable.
///
/// `mu` and `lip` are the strong-convexity modulus and gradient Lipschitz
/// constant the instance was constructed with (for logistic objectives `lip`
/// is an upper estimate).
pub trait LocalObjective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, z: &DVector<f64>) -> f64;
    fn gradient(&self, z: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64>;
    fn mu(&self) -> f64;
    fn lip(&self) -> f64;

    /// Concrete access for code paths that require the quadratic family
    /// (closed-form solves, exact Hessian modes).
    fn as_quadratic(&self) -> Option<&QuadraticLocal> {
        None
    }
}

/// Solves `min_z sum_i f_i(z)` to high accuracy.
///
/// Quadratic families get a direct symmetric solve of the normal equations;
/// everything else runs damped Newton until the summed gradient norm drops
/// below `tol` (default 1e-12 when `None`).
pub fn centralized_solve(
    objectives: &[std::sync::Arc<dyn LocalObjective>],
    tol: Option<f64>,
) -> Result<DVector<f64>> {
    if objectives.is_empty() {
        return Err(Error::InvalidArgument("no objectives".into()));
    }
    let p = objectives[0].dim();
    for o in objectives.iter() {
        if o.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, got: o.dim() });
        }
    }
    let tol = tol.unwrap_or(1e-12);

    if objectives.iter().all(|o| o.as_quadratic().is_some()) {
        let mut a_sum = DMatrix::<f64>::zeros(p, p);
        let mut b_sum = DVector::<f64>::zeros(p);
        for o in objectives {
            let q = o.as_quadratic().unwrap();
            a_sum += q.matrix();
            b_sum += q.linear();
        }
        let chol = a_sum
            .clone()
            .cholesky()
            .ok_or_else(|| Error::OracleFailure("summed quadratic not positive definite".into()))?;
        return Ok(chol.solve(&(-b_sum)));
    }

    // Damped Newton with step halving on the summed gradient norm.
    let mut z = DVector::<f64>::zeros(p);
    let grad_sum = |z: &DVector<f64>| -> DVector<f64> {
        let mut g = DVector::<f64>::zeros(p);
        for o in objectives {
            g += o.gradient(z);
        }
        g
    };
    let mut g = grad_sum(&z);
    for _ in 0..500 {
        let gnorm = g.norm();
        if gnorm <= tol {
            return Ok(z);
        }
        let mut h = DMatrix::<f64>::zeros(p, p);
        for o in objectives {
            h += o.hessian(&z);
        }
        let chol = h
            .cholesky()
            .ok_or_else(|| Error::OracleFailure("Newton system not positive definite".into()))?;
        let dir = chol.solve(&(-&g));
        let mut step = 1.0;
        loop {
            let z_new = &z + step * &dir;
            let g_new = grad_sum(&z_new);
            if g_new.norm() < gnorm || g_new.norm() <= tol {
                z = z_new;
                g = g_new;
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                return Err(Error::OracleFailure(
                    "Newton step stalled before reaching tolerance".into(),
                ));
            }
        }
    }
    Err(Error::OracleFailure(format!(
        "Newton did not reach {tol:e} within the iteration cap"
    )))
}

/// Central-difference gradient with step `1e-5 * (1 + |z|)`, used by tests as
/// an oracle independent of any analytic gradient.
pub fn finite_difference_gradient<F>(f: F, z: &DVector<f64>) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let h = 1e-5 * (1.0 + z.norm());
    let mut g = DVector::<f64>::zeros(z.len());
    let mut zp = z.clone();
    for k in 0..z.len() {
        let orig = zp[k];
        zp[k] = orig + h;
        let fp = f(&zp);
        zp[k] = orig - h;
        let fm = f(&zp);
        zp[k] = orig;
        g[k] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Standard normal draw via Box-Muller; deterministic under a seeded RNG.
pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
