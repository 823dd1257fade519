//! The primal-dual quasi-Newton engine behind `dpdm`, `gdpdm`, and
//! `gdpdm_plus`.
//!
//! State per node: the primal iterate `x_i`, the transformed dual `v_i`
//! (initialized to zero; the raw multiplier is never materialized), the BFGS
//! inverse Hessian `H_i`, and the dual spectral estimator. One outer
//! iteration runs `S` primal sub-steps against the frozen dual, then a dual
//! ascent step with the spectral correction, then refreshes the
//! Barzilai-Borwein tracker state for the next iteration.
//!
//! Communication per outer iteration at `theta = 0`: the dual step costs two
//! vector rounds (`x` then the corrected direction) plus two scalar rounds
//! for the trackers; primal sub-step 0 reuses the `(I - W) x` block cached by
//! the previous dual step, and each later sub-step adds one vector round.
//! A nonzero `theta` adds one vector round per sub-step.

use std::sync::Arc;

use nalgebra::DVector;

use super::{AlgoConfig, BMode, ConsensusAlgorithm, PMode};
use crate::problems::LocalObjective;
use crate::quasinewton::{
    bb_local_scalars, bfgs_inverse_update, consensus_track, update_p_tilde, DualSpectralState,
    InverseHessian,
};
use crate::topology::{neighbor_exchange, scalar_exchange, MixingMatrix, RoundCounter};
use crate::{Error, Result};

/// Per-node iterate bundle.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub h: InverseHessian,
    pub spectral: DualSpectralState,
    /// Set inside an outer iteration once the node stops its inner loop.
    pub frozen: bool,
    /// Cached block of `(I - W) x`, consistent with `x` between iterations.
    pub u: DVector<f64>,
}

pub struct PrimalDualEngine {
    name: &'static str,
    nodes: Vec<NodeState>,
    /// Gradient of each node at its current `x` (spares one evaluation per
    /// sub-step; frozen nodes keep theirs).
    grads: Vec<DVector<f64>>,
    objectives: Vec<Arc<dyn LocalObjective>>,
    mixing: MixingMatrix,
    cfg: AlgoConfig,
    d_tilde: Vec<f64>,
    t: u64,
}

impl PrimalDualEngine {
    /// Standard construction: `v = 0`, `H = I` (or the configured fixed
    /// approximation), estimator at its initial point.
    ///
    /// Priming the `(I - W) x` cache needs one exchange unless the initial
    /// iterates are identical across nodes (the common all-zero start), in
    /// which case the block is zero without communication.
    pub fn new(
        name: &'static str,
        objectives: &[Arc<dyn LocalObjective>],
        mixing: &MixingMatrix,
        cfg: AlgoConfig,
        initial: Option<&[DVector<f64>]>,
        counter: &mut RoundCounter,
    ) -> Result<Self> {
        let n = mixing.node_count();
        let dim = check_setup(objectives, mixing, &cfg)?;
        let x0: Vec<DVector<f64>> = match initial {
            Some(xs) => {
                if xs.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: xs.len() });
                }
                for x in xs {
                    if x.len() != dim {
                        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
                    }
                }
                xs.to_vec()
            }
            None => vec![DVector::zeros(dim); n],
        };
        let v0 = vec![DVector::zeros(dim); n];
        Self::assemble(name, objectives, mixing, cfg, x0, v0, counter)
    }

    /// Construction with an explicit dual state, for diagnostics and
    /// fixed-point tests; the algorithms themselves always start at `v = 0`.
    pub fn with_state(
        name: &'static str,
        objectives: &[Arc<dyn LocalObjective>],
        mixing: &MixingMatrix,
        cfg: AlgoConfig,
        x0: Vec<DVector<f64>>,
        v0: Vec<DVector<f64>>,
        counter: &mut RoundCounter,
    ) -> Result<Self> {
        let n = mixing.node_count();
        let dim = check_setup(objectives, mixing, &cfg)?;
        if x0.len() != n || v0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x0.len().min(v0.len()) });
        }
        if x0.iter().chain(v0.iter()).any(|z| z.len() != dim) {
            return Err(Error::InternalConsistency("state dimension mismatch".into()));
        }
        Self::assemble(name, objectives, mixing, cfg, x0, v0, counter)
    }

    fn assemble(
        name: &'static str,
        objectives: &[Arc<dyn LocalObjective>],
        mixing: &MixingMatrix,
        cfg: AlgoConfig,
        x0: Vec<DVector<f64>>,
        v0: Vec<DVector<f64>>,
        counter: &mut RoundCounter,
    ) -> Result<Self> {
        let n = mixing.node_count();
        let dim = x0[0].len();
        let d_tilde = if n == 1 { vec![1.0] } else { mixing.diag_correction() };

        let u0 = if all_equal(&x0) {
            // Consensus start: (I - W) x = 0 identically, no round needed.
            vec![DVector::zeros(dim); n]
        } else {
            let sums = neighbor_exchange(&x0, mixing, counter)?;
            x0.iter().zip(sums).map(|(x, s)| x - s).collect()
        };

        let mut nodes = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(n);
        for i in 0..n {
            let h = match cfg.b_mode {
                BMode::Bfgs => InverseHessian::identity(dim),
                BMode::FixedScalar(kappa) => InverseHessian::scaled_identity(dim, kappa)?,
                BMode::ExactHessianPlusEps(eps) => {
                    let q = objectives[i].as_quadratic().ok_or_else(|| {
                        Error::UnsupportedProblem(
                            "exact-hessian mode needs quadratic objectives".into(),
                        )
                    })?;
                    let mut shifted = q.matrix().clone();
                    for k in 0..dim {
                        shifted[(k, k)] += eps;
                    }
                    let chol = shifted.cholesky().ok_or_else(|| {
                        Error::UnsupportedProblem("shifted hessian not positive definite".into())
                    })?;
                    InverseHessian::from_matrix(chol.inverse())
                }
            };
            grads.push(objectives[i].gradient(&x0[i]));
            nodes.push(NodeState {
                x: x0[i].clone(),
                v: v0[i].clone(),
                h,
                spectral: DualSpectralState::initial(dim, &cfg.bounds),
                frozen: false,
                u: u0[i].clone(),
            });
        }
        // with_state starts may carry a nonzero dual; prev_v tracks it
        for node in &mut nodes {
            node.spectral.prev_v = node.v.clone();
        }
        Ok(PrimalDualEngine {
            name,
            nodes,
            grads,
            objectives: objectives.to_vec(),
            mixing: mixing.clone(),
            cfg,
            d_tilde,
            t: 0,
        })
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn config(&self) -> &AlgoConfig {
        &self.cfg
    }

    /// One primal sub-step against the current dual, using the cached
    /// `(I - W) x` blocks. Frozen nodes keep their state but still
    /// contribute to any relaxation exchange.
    pub fn primal_step(&mut self, counter: &mut RoundCounter) -> Result<()> {
        let n = self.nodes.len();
        let alpha = self.cfg.alpha;
        // w_i = H_i (grad f_i + v_i + alpha u_i)
        let mut w = Vec::with_capacity(n);
        for (i, node) in self.nodes.iter().enumerate() {
            let mut g = self.grads[i].clone();
            g += &node.v;
            g.axpy(alpha, &node.u, 1.0);
            w.push(node.h.apply(&g));
        }
        let steps: Vec<DVector<f64>> = if self.cfg.theta != 0.0 {
            let sums = neighbor_exchange(&w, &self.mixing, counter)?;
            self.nodes
                .iter()
                .enumerate()
                .map(|(i, node)| {
                    let zw = &w[i] - &sums[i];
                    let correction = node.h.apply(&zw);
                    self.cfg.beta * (&w[i] - self.cfg.theta * alpha * correction)
                })
                .collect()
        } else {
            w.iter().map(|wi| self.cfg.beta * wi).collect()
        };
        for i in 0..n {
            if self.nodes[i].frozen {
                continue;
            }
            let x_new = &self.nodes[i].x - &steps[i];
            let g_new = self.objectives[i].gradient(&x_new);
            if matches!(self.cfg.b_mode, BMode::Bfgs) {
                let s = &x_new - &self.nodes[i].x;
                let y = &g_new - &self.grads[i];
                self.nodes[i].h = bfgs_inverse_update(&self.nodes[i].h, &s, &y);
            }
            self.nodes[i].x = x_new;
            self.grads[i] = g_new;
        }
        Ok(())
    }

    /// Dual ascent with the spectral correction, then the tracker refresh
    /// that prepares the correction scalar for the next iteration.
    ///
    /// Costs two vector rounds, plus two scalar rounds unless the correction
    /// is disabled.
    pub fn dual_step(&mut self, counter: &mut RoundCounter) -> Result<()> {
        let n = self.nodes.len();
        let (alpha, gamma) = (self.cfg.alpha, self.cfg.gamma);
        let bb = self.cfg.p_mode == PMode::BbConsensus;

        // u_i = x_i - sum_j W_ij x_j, cached for the next primal sub-step 0
        let xs: Vec<DVector<f64>> = self.nodes.iter().map(|nd| nd.x.clone()).collect();
        let sums = neighbor_exchange(&xs, &self.mixing, counter)?;
        let u_new: Vec<DVector<f64>> =
            xs.iter().zip(&sums).map(|(x, s)| x - s).collect();

        let nu: Vec<DVector<f64>> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, node)| {
                let mut dir = alpha * &node.x;
                if bb {
                    dir.axpy(node.spectral.p_tilde * self.d_tilde[i], &u_new[i], 1.0);
                }
                dir
            })
            .collect();
        let nu_sums = neighbor_exchange(&nu, &self.mixing, counter)?;

        let mut v_old = Vec::with_capacity(n);
        for i in 0..n {
            let znu = &nu[i] - &nu_sums[i];
            v_old.push(self.nodes[i].v.clone());
            let node = &mut self.nodes[i];
            node.v.axpy(gamma, &znu, 1.0);
            node.u = u_new[i].clone();
        }

        if bb {
            let mut a_locals = Vec::with_capacity(n);
            let mut b_locals = Vec::with_capacity(n);
            for i in 0..n {
                let node = &self.nodes[i];
                let (a_t, b_t) = bb_local_scalars(
                    &node.v,
                    &v_old[i],
                    &node.h,
                    &node.x,
                    &node.u,
                    node.spectral.p_tilde,
                    self.d_tilde[i],
                    gamma,
                    alpha,
                );
                a_locals.push(a_t);
                b_locals.push(b_t);
            }
            let a_prev: Vec<f64> = self.nodes.iter().map(|nd| nd.spectral.a).collect();
            let b_prev: Vec<f64> = self.nodes.iter().map(|nd| nd.spectral.b).collect();
            let a_sums = scalar_exchange(&a_prev, &self.mixing, counter)?;
            let b_sums = scalar_exchange(&b_prev, &self.mixing, counter)?;
            for i in 0..n {
                let sp = &mut self.nodes[i].spectral;
                let a_new = consensus_track(a_sums[i], a_locals[i], sp.a_tilde);
                let b_new = consensus_track(b_sums[i], b_locals[i], sp.b_tilde);
                let (p_tilde, r) = update_p_tilde(a_new, b_new, &self.cfg.bounds, self.t + 1);
                sp.a = a_new;
                sp.b = b_new;
                sp.a_tilde = a_locals[i];
                sp.b_tilde = b_locals[i];
                sp.p_tilde = p_tilde;
                sp.r = r;
            }
        }
        for (node, v) in self.nodes.iter_mut().zip(v_old) {
            node.spectral.prev_v = v;
        }
        Ok(())
    }

    /// Refreshes the cached `(I - W) x` blocks after the iterates moved
    /// inside the inner loop (one vector round). Public so diagnostics can
    /// drive sub-steps manually; `iterate` handles it on the normal path.
    pub fn refresh_exchange_cache(&mut self, counter: &mut RoundCounter) -> Result<()> {
        let xs: Vec<DVector<f64>> = self.nodes.iter().map(|nd| nd.x.clone()).collect();
        let sums = neighbor_exchange(&xs, &self.mixing, counter)?;
        for (node, (x, s)) in self.nodes.iter_mut().zip(xs.iter().zip(sums)) {
            node.u = x - s;
        }
        Ok(())
    }
}

fn check_setup(
    objectives: &[Arc<dyn LocalObjective>],
    mixing: &MixingMatrix,
    cfg: &AlgoConfig,
) -> Result<usize> {
    cfg.validate()?;
    let n = mixing.node_count();
    if objectives.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: objectives.len() });
    }
    let dim = objectives[0].dim();
    if dim == 0 {
        return Err(Error::InvalidArgument("objectives must have dimension >= 1".into()));
    }
    for o in objectives {
        if o.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: o.dim() });
        }
    }
    Ok(dim)
}

fn all_equal(xs: &[DVector<f64>]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

impl ConsensusAlgorithm for PrimalDualEngine {
    fn name(&self) -> &'static str {
        self.name
    }

    fn iterate(&mut self, counter: &mut RoundCounter) -> Result<()> {
        let freeze = self.cfg.freeze_c.filter(|_| self.t >= 1);
        for node in &mut self.nodes {
            node.frozen = false;
        }
        let x_outer: Option<Vec<DVector<f64>>> =
            freeze.map(|_| self.nodes.iter().map(|nd| nd.x.clone()).collect());
        for s in 0..self.cfg.inner_steps {
            if freeze.is_some() && self.nodes.iter().all(|nd| nd.frozen) {
                break;
            }
            if s > 0 {
                self.refresh_exchange_cache(counter)?;
            }
            self.primal_step(counter)?;
            if let (Some(c), Some(outer)) = (freeze, &x_outer) {
                for (i, node) in self.nodes.iter_mut().enumerate() {
                    if !node.frozen {
                        let moved = (&node.x - &outer[i]).norm();
                        let dual_gap = (&node.v - &node.spectral.prev_v).norm();
                        if moved <= c * dual_gap {
                            node.frozen = true;
                        }
                    }
                }
            }
        }
        self.dual_step(counter)?;
        self.t += 1;
        Ok(())
    }

    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn position(&self, i: usize) -> &DVector<f64> {
        &self.nodes[i].x
    }

    fn iteration(&self) -> u64 {
        self.t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::AlgoConfig;
    use crate::problems::{centralized_solve, make_quadratic};
    use crate::topology::{generate_graph, metropolis_weights, GraphKind};
    use nalgebra::DMatrix;

    fn quad_setup(
        n: usize,
        p: usize,
        kappa: f64,
        seed: u64,
    ) -> (Vec<Arc<dyn LocalObjective>>, MixingMatrix, DVector<f64>) {
        let objs = make_quadratic(n, p, kappa, seed).unwrap();
        let arcs: Vec<Arc<dyn LocalObjective>> =
            objs.into_iter().map(|q| Arc::new(q) as Arc<dyn LocalObjective>).collect();
        let g = if n == 1 {
            generate_graph(1, GraphKind::Line, 0.0, 0).unwrap()
        } else {
            generate_graph(n, GraphKind::Random, (2.0 / n as f64).max(0.5), 7).unwrap()
        };
        let mixing = metropolis_weights(&g);
        let zstar = centralized_solve(&arcs, None).unwrap();
        (arcs, mixing, zstar)
    }

    fn rel_error(engine: &PrimalDualEngine, zstar: &DVector<f64>) -> f64 {
        let n = engine.node_count();
        let denom = zstar.norm() + 1.0;
        (0..n).map(|i| (engine.position(i) - zstar).norm() / denom).sum::<f64>() / n as f64
    }

    fn desk_cfg() -> AlgoConfig {
        AlgoConfig {
            alpha: 1.5,
            beta: 0.35,
            gamma: 1.0,
            theta: 0.32,
            bounds: crate::quasinewton::SpectralBounds {
                omega_lo: 0.2,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn single_node_reduces_to_quasi_newton_descent() {
        let (objs, mixing, zstar) = quad_setup(1, 4, 10.0, 3);
        let mut counter = RoundCounter::new();
        let cfg = AlgoConfig { alpha: 1.5, beta: 0.35, ..Default::default() };
        let mut engine =
            PrimalDualEngine::new("dpdm", &objs, &mixing, cfg, None, &mut counter).unwrap();
        for _ in 0..60 {
            engine.iterate(&mut counter).unwrap();
        }
        assert!(rel_error(&engine, &zstar) < 1e-8, "rel = {}", rel_error(&engine, &zstar));
        // v stays exactly zero on a single node: (I - W) = 0
        assert!(engine.nodes()[0].v.amax() == 0.0);
    }

    #[test]
    fn converges_on_desk_scale_quadratic() {
        let (objs, mixing, zstar) = quad_setup(6, 8, 10.0, 42);
        let mut counter = RoundCounter::new();
        let mut engine =
            PrimalDualEngine::new("dpdm", &objs, &mixing, desk_cfg(), None, &mut counter).unwrap();
        let mut hit = None;
        for t in 1..=400 {
            engine.iterate(&mut counter).unwrap();
            if rel_error(&engine, &zstar) <= 1e-10 {
                hit = Some(t);
                break;
            }
        }
        assert!(hit.is_some(), "no convergence; rel = {}", rel_error(&engine, &zstar));
    }

    #[test]
    fn communication_counts_match_contract() {
        let (objs, mixing, _) = quad_setup(6, 5, 10.0, 1);
        let edges = mixing.edge_count() as u64;
        // theta = 0: two vector rounds and two scalar rounds per iteration
        let mut counter = RoundCounter::new();
        let cfg = AlgoConfig { theta: 0.0, ..desk_cfg() };
        let mut engine =
            PrimalDualEngine::new("dpdm", &objs, &mixing, cfg, None, &mut counter).unwrap();
        assert_eq!(counter, RoundCounter::new(), "consensus start must not communicate");
        for k in 1..=5u64 {
            engine.iterate(&mut counter).unwrap();
            assert_eq!(counter.vector_rounds, 2 * k);
            assert_eq!(counter.scalar_rounds, 2 * k);
            assert_eq!(counter.vector_entries, 2 * k * edges * 5);
            assert_eq!(counter.scalar_entries, 2 * k * edges);
        }
        // theta != 0 adds one vector round per sub-step
        let mut counter = RoundCounter::new();
        let mut engine =
            PrimalDualEngine::new("dpdm", &objs, &mixing, desk_cfg(), None, &mut counter).unwrap();
        engine.iterate(&mut counter).unwrap();
        assert_eq!(counter.vector_rounds, 3);
        // gdpdm with S = 3, theta = 0: S + 1 vector rounds per iteration
        let mut counter = RoundCounter::new();
        let cfg = AlgoConfig { theta: 0.0, inner_steps: 3, ..desk_cfg() };
        let mut engine =
            PrimalDualEngine::new("gdpdm", &objs, &mixing, cfg, None, &mut counter).unwrap();
        engine.iterate(&mut counter).unwrap();
        assert_eq!(counter.vector_rounds, 4);
        assert_eq!(counter.scalar_rounds, 2);
    }

    #[test]
    fn gdpdm_with_one_step_matches_dpdm_exactly() {
        let (objs, mixing, _) = quad_setup(5, 6, 10.0, 9);
        let cfg = desk_cfg();
        let mut c1 = RoundCounter::new();
        let mut a =
            PrimalDualEngine::new("dpdm", &objs, &mixing, cfg.clone(), None, &mut c1).unwrap();
        let mut c2 = RoundCounter::new();
        let cfg2 = AlgoConfig { inner_steps: 1, ..cfg };
        let mut b =
            PrimalDualEngine::new("gdpdm", &objs, &mixing, cfg2, None, &mut c2).unwrap();
        for _ in 0..25 {
            a.iterate(&mut c1).unwrap();
            b.iterate(&mut c2).unwrap();
        }
        for i in 0..5 {
            assert_eq!(a.position(i), b.position(i), "iterates must be bit-identical");
        }
        assert_eq!(c1, c2);
    }

    #[test]
    fn dual_mean_is_conserved() {
        let (objs, mixing, _) = quad_setup(6, 5, 10.0, 11);
        let mut counter = RoundCounter::new();
        let mut engine =
            PrimalDualEngine::new("dpdm", &objs, &mixing, desk_cfg(), None, &mut counter).unwrap();
        for _ in 0..100 {
            engine.iterate(&mut counter).unwrap();
            let mut sum = DVector::<f64>::zeros(5);
            for node in engine.nodes() {
                sum += &node.v;
            }
            let scale: f64 = engine.nodes().iter().map(|nd| nd.v.norm()).sum();
            assert!(sum.norm() <= 1e-10 * (1.0 + scale), "mean drift {}", sum.norm());
        }
    }

    #[test]
    fn non_consensus_start_pays_one_priming_exchange() {
        let (objs, mixing, _) = quad_setup(5, 4, 10.0, 21);
        let mut x0: Vec<DVector<f64>> = vec![DVector::zeros(4); 5];
        x0[2][0] = 1.0;
        let mut counter = RoundCounter::new();
        let engine =
            PrimalDualEngine::new("dpdm", &objs, &mixing, desk_cfg(), Some(&x0), &mut counter)
                .unwrap();
        assert_eq!(counter.vector_rounds, 1);
        // the primed cache matches the dense product
        let w = mixing.dense();
        for i in 0..5 {
            let mut wx = DVector::<f64>::zeros(4);
            for j in 0..5 {
                wx.axpy(w[(i, j)], &x0[j], 1.0);
            }
            assert!((&engine.nodes()[i].u - (&x0[i] - wx)).amax() < 1e-15);
        }
    }

    #[test]
    fn optimum_with_matching_dual_is_a_fixed_point() {
        let (objs, mixing, zstar) = quad_setup(5, 4, 10.0, 21);
        let x0: Vec<DVector<f64>> = vec![zstar.clone(); 5];
        let v0: Vec<DVector<f64>> = objs.iter().map(|o| -o.gradient(&zstar)).collect();
        let mut counter = RoundCounter::new();
        let mut engine = PrimalDualEngine::with_state(
            "dpdm",
            &objs,
            &mixing,
            desk_cfg(),
            x0.clone(),
            v0,
            &mut counter,
        )
        .unwrap();
        for _ in 0..50 {
            engine.iterate(&mut counter).unwrap();
        }
        for i in 0..5 {
            assert!((engine.position(i) - &zstar).norm() <= 1e-10);
        }
    }

    #[test]
    fn freeze_constant_zero_matches_plain_gdpdm() {
        let (objs, mixing, _) = quad_setup(5, 6, 10.0, 33);
        let cfg_plain = AlgoConfig { inner_steps: 3, theta: 0.0, ..desk_cfg() };
        let cfg_plus = AlgoConfig { freeze_c: Some(0.0), ..cfg_plain.clone() };
        let mut c1 = RoundCounter::new();
        let mut plain =
            PrimalDualEngine::new("gdpdm", &objs, &mixing, cfg_plain, None, &mut c1).unwrap();
        let mut c2 = RoundCounter::new();
        let mut plus =
            PrimalDualEngine::new("gdpdm_plus", &objs, &mixing, cfg_plus, None, &mut c2).unwrap();
        for _ in 0..20 {
            plain.iterate(&mut c1).unwrap();
            plus.iterate(&mut c2).unwrap();
        }
        for i in 0..5 {
            assert_eq!(plain.position(i), plus.position(i));
        }
        assert_eq!(c1, c2);
    }

    #[test]
    fn huge_freeze_constant_degenerates_to_single_step() {
        let (objs, mixing, _) = quad_setup(5, 6, 10.0, 33);
        let cfg_plus =
            AlgoConfig { inner_steps: 4, theta: 0.0, freeze_c: Some(1e12), ..desk_cfg() };
        let mut c_plus = RoundCounter::new();
        let mut plus = PrimalDualEngine::new(
            "gdpdm_plus",
            &objs,
            &mixing,
            cfg_plus.clone(),
            None,
            &mut c_plus,
        )
        .unwrap();
        // Warm up past t = 0 (where the freeze test is skipped), then compare
        // one outer iteration against DPDM started from the same state.
        for _ in 0..3 {
            plus.iterate(&mut c_plus).unwrap();
        }
        let x_snap: Vec<DVector<f64>> = plus.nodes().iter().map(|nd| nd.x.clone()).collect();
        let v_snap: Vec<DVector<f64>> = plus.nodes().iter().map(|nd| nd.v.clone()).collect();
        let mut c_ref = RoundCounter::new();
        let cfg_ref = AlgoConfig { inner_steps: 1, freeze_c: None, ..cfg_plus };
        let mut reference = PrimalDualEngine::with_state(
            "dpdm",
            &objs,
            &mixing,
            cfg_ref,
            x_snap,
            v_snap,
            &mut c_ref,
        )
        .unwrap();
        // Align the scalar estimator and BFGS state with the warmed engine.
        for (r, p) in reference.nodes.iter_mut().zip(plus.nodes()) {
            r.spectral = p.spectral.clone();
            r.h = p.h.clone();
            r.u = p.u.clone();
        }
        reference.t = plus.t;
        let before = c_plus;
        plus.iterate(&mut c_plus).unwrap();
        reference.iterate(&mut c_ref).unwrap();
        for i in 0..5 {
            assert_eq!(plus.position(i), reference.position(i));
        }
        // every node froze after sub-step 0, so the iteration cost DPDM's rounds
        assert_eq!(c_plus.vector_rounds - before.vector_rounds, 2);
    }

    #[test]
    fn frozen_node_keeps_its_iterate_while_neighbors_move() {
        // Three-node line; crafted freeze constant freezes fast on some node
        let objs = make_quadratic(3, 4, 10.0, 2).unwrap();
        let arcs: Vec<Arc<dyn LocalObjective>> =
            objs.into_iter().map(|q| Arc::new(q) as Arc<dyn LocalObjective>).collect();
        let g = generate_graph(3, GraphKind::Line, 0.0, 0).unwrap();
        let mixing = metropolis_weights(&g);
        let cfg = AlgoConfig { inner_steps: 4, theta: 0.0, freeze_c: Some(5.0), ..desk_cfg() };
        let mut counter = RoundCounter::new();
        let mut engine =
            PrimalDualEngine::new("gdpdm_plus", &arcs, &mixing, cfg, None, &mut counter).unwrap();
        for _ in 0..6 {
            engine.iterate(&mut counter).unwrap();
        }
        let frozen_any = engine.nodes().iter().any(|nd| nd.frozen);
        assert!(frozen_any, "freeze never triggered; weak test setup");
        // with a partial freeze the synchronous rounds still run in full:
        // frozen nodes keep transmitting, so active neighbors see them
        let before = counter;
        engine.iterate(&mut counter).unwrap();
        let frozen_count = engine.nodes().iter().filter(|nd| nd.frozen).count();
        if frozen_count > 0 && frozen_count < 3 {
            assert_eq!(counter.vector_rounds - before.vector_rounds, 4 + 1);
        }
    }

    #[test]
    fn exact_hessian_mode_requires_quadratics() {
        let features = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let labels = DVector::from_vec(vec![1.0, -1.0]);
        let logi = crate::problems::LogisticLocal::new(features, labels, 1.0).unwrap();
        let arcs: Vec<Arc<dyn LocalObjective>> = vec![Arc::new(logi)];
        let g = generate_graph(1, GraphKind::Line, 0.0, 0).unwrap();
        let mixing = metropolis_weights(&g);
        let cfg = AlgoConfig {
            b_mode: BMode::ExactHessianPlusEps(0.1),
            ..Default::default()
        };
        let mut counter = RoundCounter::new();
        let err = PrimalDualEngine::new("dpdm", &arcs, &mixing, cfg, None, &mut counter);
        assert!(matches!(err, Err(Error::UnsupportedProblem(_))));
    }

    #[test]
    fn fixed_scalar_mode_never_updates_h() {
        let (objs, mixing, _) = quad_setup(4, 3, 10.0, 8);
        let cfg = AlgoConfig {
            b_mode: BMode::FixedScalar(4.0),
            p_mode: PMode::Zero,
            theta: 0.0,
            beta: 1.0,
            gamma: 1.0,
            alpha: 2.0,
            ..Default::default()
        };
        let mut counter = RoundCounter::new();
        let mut engine =
            PrimalDualEngine::new("dpdm", &objs, &mixing, cfg, None, &mut counter).unwrap();
        let h0 = engine.nodes()[0].h.clone();
        for _ in 0..5 {
            engine.iterate(&mut counter).unwrap();
        }
        assert_eq!(engine.nodes()[0].h.matrix(), h0.matrix());
        // p_mode = Zero does not run the scalar trackers
        assert_eq!(counter.scalar_rounds, 0);
    }

    /// The pure dual-ascent reduction: with the correction off and
    /// `gamma = 1`, the dual update is exactly `v += alpha (I - W) x`.
    #[test]
    fn zero_mode_dual_is_classical_ascent() {
        let (objs, mixing, _) = quad_setup(4, 3, 10.0, 15);
        let cfg = AlgoConfig {
            p_mode: PMode::Zero,
            theta: 0.0,
            gamma: 1.0,
            alpha: 2.0,
            beta: 0.2,
            ..Default::default()
        };
        let mut counter = RoundCounter::new();
        let mut engine =
            PrimalDualEngine::new("dpdm", &objs, &mixing, cfg, None, &mut counter).unwrap();
        let v_before: Vec<DVector<f64>> =
            engine.nodes().iter().map(|nd| nd.v.clone()).collect();
        engine.iterate(&mut counter).unwrap();
        let w = mixing.dense();
        // reconstruct alpha (I - W) x^{t+1} densely
        for i in 0..4 {
            let mut wx = DVector::<f64>::zeros(3);
            for j in 0..4 {
                wx += w[(i, j)] * engine.position(j);
            }
            let expected = &v_before[i] + 2.0 * (engine.position(i) - &wx);
            assert!((&engine.nodes()[i].v - expected).amax() < 1e-12);
        }
    }
}
