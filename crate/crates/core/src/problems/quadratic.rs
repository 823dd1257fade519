//! Conditioned quadratic objectives `f_i(z) = 1/2 z'A_i z + b_i'z` with a
//! controlled spectrum: eigenvalues of each `A_i` span exactly `[1, kappa_f]`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{standard_normal, LocalObjective};
use crate::{Error, Result};

/// Quadratic local objective with a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct QuadraticLocal {
    a: DMatrix<f64>,
    b: DVector<f64>,
    kappa_f: f64,
}

impl QuadraticLocal {
    pub fn from_parts(a: DMatrix<f64>, b: DVector<f64>, kappa_f: f64) -> Self {
        QuadraticLocal { a, b, kappa_f }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.b
    }
}

impl LocalObjective for QuadraticLocal {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.a * z)) + self.b.dot(z)
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.a * z + &self.b
    }

    fn hessian(&self, _z: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }

    fn mu(&self) -> f64 {
        1.0
    }

    fn lip(&self) -> f64 {
        self.kappa_f
    }

    fn as_quadratic(&self) -> Option<&QuadraticLocal> {
        Some(self)
    }
}

/// Generates `n` quadratic objectives, each with its own random orthogonal
/// basis and its own interior eigenvalue draws.
///
/// Spectrum per node: smallest eigenvalue exactly 1, largest exactly
/// `kappa_f`, interior values uniform on `(1, 2)`. `b_i` is standard
/// Gaussian. Deterministic for a given seed.
pub fn make_quadratic(n: usize, p: usize, kappa_f: f64, seed: u64) -> Result<Vec<QuadraticLocal>> {
    build_quadratics(n, p, kappa_f, seed, false)
}

/// Same construction with one orthogonal basis shared by all nodes (the
/// diagonal draws and linear terms stay independent).
pub fn make_quadratic_shared_q(
    n: usize,
    p: usize,
    kappa_f: f64,
    seed: u64,
) -> Result<Vec<QuadraticLocal>> {
    build_quadratics(n, p, kappa_f, seed, true)
}

fn build_quadratics(
    n: usize,
    p: usize,
    kappa_f: f64,
    seed: u64,
    shared_q: bool,
) -> Result<Vec<QuadraticLocal>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one node".into()));
    }
    if p < 2 {
        return Err(Error::InvalidArgument("quadratic family needs p >= 2".into()));
    }
    if !(kappa_f >= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "kappa_f = {kappa_f} must be >= 2 so interior draws stay inside the spectrum"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared = if shared_q { Some(random_orthogonal(p, &mut rng)) } else { None };
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let q = match &shared {
            Some(q) => q.clone(),
            None => random_orthogonal(p, &mut rng),
        };
        let mut diag = DVector::<f64>::zeros(p);
        diag[0] = 1.0;
        diag[p - 1] = kappa_f;
        for k in 1..p - 1 {
            diag[k] = 1.0 + rng.random::<f64>();
        }
        // A = Q' * diag * Q, filled symmetrically so A_ij == A_ji bitwise.
        let dq = DMatrix::from_fn(p, p, |r, c| diag[r] * q[(r, c)]);
        let a_raw = q.transpose() * dq;
        let mut a = DMatrix::<f64>::zeros(p, p);
        for i in 0..p {
            a[(i, i)] = a_raw[(i, i)];
            for j in (i + 1)..p {
                let v = 0.5 * (a_raw[(i, j)] + a_raw[(j, i)]);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let b = DVector::from_fn(p, |_, _| standard_normal(&mut rng));
        out.push(QuadraticLocal { a, b, kappa_f });
    }
    Ok(out)
}

/// Haar-uniform random orthogonal matrix: QR of a Gaussian matrix with the
/// sign of R's diagonal folded into Q.
pub(crate) fn random_orthogonal(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| standard_normal(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::finite_difference_gradient;
    use proptest::prelude::*;

    #[test]
    fn p_two_spectrum_is_exact() {
        let objs = make_quadratic(3, 2, 10.0, 1).unwrap();
        for q in &objs {
            let mut eigs: Vec<f64> = q.matrix().symmetric_eigenvalues().iter().copied().collect();
            eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert!((eigs[0] - 1.0).abs() < 1e-12);
            assert!((eigs[1] - 10.0).abs() < 1e-11);
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(make_quadratic(2, 1, 10.0, 0).is_err());
        assert!(make_quadratic(2, 4, 1.5, 0).is_err());
        assert!(make_quadratic(0, 4, 10.0, 0).is_err());
        assert!(make_quadratic(2, 4, f64::NAN, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = make_quadratic(2, 5, 10.0, 77).unwrap();
        let b = make_quadratic(2, 5, 10.0, 77).unwrap();
        assert_eq!(a[1].matrix(), b[1].matrix());
        assert_eq!(a[1].linear(), b[1].linear());
    }

    #[test]
    fn shared_q_mode_shares_the_basis() {
        let objs = make_quadratic_shared_q(3, 4, 10.0, 5).unwrap();
        // All A_i commute when they share an eigenbasis.
        let ab = objs[0].matrix() * objs[1].matrix();
        let ba = objs[1].matrix() * objs[0].matrix();
        assert!((ab - ba).amax() < 1e-9);
    }

    #[test]
    fn matrices_are_exactly_symmetric() {
        let objs = make_quadratic(2, 7, 50.0, 9).unwrap();
        for q in &objs {
            let a = q.matrix();
            for i in 0..7 {
                for j in 0..7 {
                    assert_eq!(a[(i, j)], a[(j, i)]);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn spectrum_spans_one_to_kappa(p in 2usize..12, kappa in 2.0f64..100.0, seed in 0u64..300) {
            let objs = make_quadratic(1, p, kappa, seed).unwrap();
            let mut eigs: Vec<f64> = objs[0].matrix().symmetric_eigenvalues().iter().copied().collect();
            eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assert!((eigs[0] - 1.0).abs() < 1e-10);
            prop_assert!((eigs[p - 1] - kappa).abs() < 1e-10);
        }

        #[test]
        fn gradient_matches_finite_differences(p in 2usize..8, seed in 0u64..100) {
            let objs = make_quadratic(1, p, 10.0, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51ed);
            let z = DVector::from_fn(p, |_, _| standard_normal(&mut rng));
            let analytic = objs[0].gradient(&z);
            let numeric = finite_difference_gradient(|x| objs[0].value(x), &z);
            let denom = 1.0 + analytic.norm();
            prop_assert!((analytic - numeric).norm() / denom < 1e-6);
        }
    }
}
