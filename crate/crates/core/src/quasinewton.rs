//! Quasi-Newton machinery: per-node BFGS inverse-Hessian updates for the
//! primal, and the Barzilai-Borwein / dynamic-average-consensus estimator
//! that produces the per-node dual correction scalars.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative curvature threshold below which a BFGS update is skipped.
const CURVATURE_SKIP: f64 = 1e-12;
/// Step-norm threshold below which a BFGS update is skipped.
const STEP_SKIP: f64 = 1e-14;

/// Maintained inverse Hessian approximation `H_i` (the direct form `B_i`
/// exists only in diagnostics, via dense inversion).
#[derive(Debug, Clone, PartialEq)]
pub struct InverseHessian {
    h: DMatrix<f64>,
}

impl InverseHessian {
    pub fn identity(p: usize) -> Self {
        InverseHessian { h: DMatrix::identity(p, p) }
    }

    /// Scalar matrix `(1/kappa) I`, the fixed-approximation mode.
    pub fn scaled_identity(p: usize, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidArgument("scalar curvature must be positive".into()));
        }
        Ok(InverseHessian { h: DMatrix::identity(p, p) / kappa })
    }

    /// Wraps an explicit SPD matrix (used by the exact-Hessian mode).
    pub fn from_matrix(h: DMatrix<f64>) -> Self {
        InverseHessian { h }
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.h * v
    }
}

/// Inverse-form BFGS update enforcing the secant equation `H' y = s`.
///
/// The update is skipped (input returned unchanged) when the curvature
/// `s'y` is not safely positive relative to `|s||y|` or the step is
/// negligibly small; both guards preserve positive definiteness under
/// floating point.
pub fn bfgs_inverse_update(h: &InverseHessian, s: &DVector<f64>, y: &DVector<f64>) -> InverseHessian {
    let sy = s.dot(y);
    let s_norm = s.norm();
    if sy <= CURVATURE_SKIP * s_norm * y.norm() || s_norm <= STEP_SKIP {
        return h.clone();
    }
    let hy = &h.h * y;
    let yhy = y.dot(&hy);
    let p = h.dim();
    let mut out = h.h.clone();
    let c1 = 1.0 / sy;
    let c2 = (1.0 + yhy / sy) / sy;
    for i in 0..p {
        for j in 0..p {
            out[(i, j)] += -c1 * (hy[i] * s[j] + s[i] * hy[j]) + c2 * s[i] * s[j];
        }
    }
    InverseHessian { h: out }
}

/// Projection interval for the dual spectral ratio plus the regularization
/// schedule `r^t = c_r * eta_r^t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub c_r: f64,
    pub eta_r: f64,
}

impl Default for SpectralBounds {
    fn default() -> Self {
        SpectralBounds { omega_lo: 1e-6, omega_hi: 1e4, c_r: 1.0, eta_r: 0.95 }
    }
}

impl SpectralBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_lo > 0.0 && self.omega_hi > self.omega_lo) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < omega_lo < omega_hi, got [{}, {}]",
                self.omega_lo, self.omega_hi
            )));
        }
        if !(self.c_r > 0.0) {
            return Err(Error::InvalidArgument("c_r must be positive".into()));
        }
        if !(self.eta_r > 0.0 && self.eta_r < 1.0) {
            return Err(Error::InvalidArgument("eta_r must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// `r^t = c_r * eta_r^t`.
    pub fn r_at(&self, t: u64) -> f64 {
        self.c_r * self.eta_r.powi(t as i32)
    }
}

/// Per-node state of the dual spectral estimator.
///
/// `a`/`b` are the dynamic-average-consensus trackers of the local estimates
/// `a_tilde`/`b_tilde`; `p_tilde` is the resulting correction scalar,
/// always inside `[1/(omega_hi + r), 1/(omega_lo + r)]`.
#[derive(Debug, Clone)]
pub struct DualSpectralState {
    pub a_tilde: f64,
    pub b_tilde: f64,
    pub a: f64,
    pub b: f64,
    pub p_tilde: f64,
    pub r: f64,
    pub prev_v: DVector<f64>,
}

impl DualSpectralState {
    /// Initial state: trackers and locals at 1, `p_tilde = 1/(1 + r^0)`.
    pub fn initial(p: usize, bounds: &SpectralBounds) -> Self {
        let r0 = bounds.r_at(0);
        DualSpectralState {
            a_tilde: 1.0,
            b_tilde: 1.0,
            a: 1.0,
            b: 1.0,
            p_tilde: 1.0 / (1.0 + r0),
            r: r0,
            prev_v: DVector::zeros(p),
        }
    }
}

/// Local Barzilai-Borwein estimates from one dual step.
///
/// `a_tilde = gamma (v - prev_v)' (alpha x + p_prev * d * u)` and
/// `b_tilde = (v - prev_v)' H (v - prev_v)`, where `u` is this node's block
/// of `(I - W) x` and `d = 1/(1 - W_ii)`. `b_tilde` is nonnegative whenever
/// `H` is positive semidefinite.
#[allow(clippy::too_many_arguments)]
pub fn bb_local_scalars(
    v: &DVector<f64>,
    prev_v: &DVector<f64>,
    h: &InverseHessian,
    x: &DVector<f64>,
    u: &DVector<f64>,
    p_tilde_prev: f64,
    d_tilde: f64,
    gamma: f64,
    alpha: f64,
) -> (f64, f64) {
    let dv = v - prev_v;
    let direction = alpha * x + (p_tilde_prev * d_tilde) * u;
    let a_tilde = gamma * dv.dot(&direction);
    let b_tilde = dv.dot(&h.apply(&dv));
    (a_tilde, b_tilde)
}

/// One dynamic-average-consensus update:
/// `tracker' = sum_j W_ij tracker_j + local_new - local_old`.
///
/// The network mean of the trackers equals the network mean of the locals
/// after every update, provided both started equal.
pub fn consensus_track(neighbor_weighted_sum: f64, local_new: f64, local_old: f64) -> f64 {
    neighbor_weighted_sum + local_new - local_old
}

/// Resolves the correction scalar from tracked `a`, `b` at a given `r`.
///
/// Three branches: projected ratio when `a` is nonzero (|a| > 1e-14 under
/// floating point), else the upper bound when `b > 0`, else the lower bound.
/// The `0/0` ratio is defined as zero, which the projection sends to
/// `omega_lo`; both readings of that corner agree.
pub fn p_tilde_from(a: f64, b: f64, bounds: &SpectralBounds, r: f64) -> f64 {
    if a.abs() > 1e-14 {
        let ratio = (b / a).clamp(bounds.omega_lo, bounds.omega_hi);
        1.0 / (ratio + r)
    } else if b > 0.0 {
        1.0 / (bounds.omega_hi + r)
    } else {
        1.0 / (bounds.omega_lo + r)
    }
}

/// Correction scalar and regularizer for iteration `t` of the schedule.
pub fn update_p_tilde(a: f64, b: f64, bounds: &SpectralBounds, t: u64) -> (f64, f64) {
    let r = bounds.r_at(t);
    (p_tilde_from(a, b, bounds, r), r)
}
