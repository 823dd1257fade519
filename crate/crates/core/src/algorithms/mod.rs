//! Iteration engines behind a common trait, selected by name at runtime.
//!
//! Every algorithm advances one synchronous outer iteration per
//! [`ConsensusAlgorithm::iterate`] call, draws all inter-node traffic through
//! the exchange primitives (so the shared counter stays exact), and exposes
//! its per-node iterates for error reporting.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DVector;

use crate::problems::LocalObjective;
use crate::quasinewton::SpectralBounds;
use crate::topology::{MixingMatrix, RoundCounter};
use crate::{Error, Result};

mod first_order;
mod primal_dual;

pub use first_order::{Extra, GradientTracking};
pub use primal_dual::{NodeState, PrimalDualEngine};

/// Primal Hessian approximation mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BMode {
    /// Per-node BFGS inverse updates (the default).
    Bfgs,
    /// Fixed `H = (1/kappa) I`; `FixedScalar(2 alpha)` with `p_mode = Zero`,
    /// `theta = 0`, `beta = gamma = 1` reproduces EXTRA.
    FixedScalar(f64),
    /// `H = (hessian + eps I)^-1`, quadratic problems only.
    ExactHessianPlusEps(f64),
}

/// Dual correction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PMode {
    /// Barzilai-Borwein ratio tracked by dynamic average consensus.
    BbConsensus,
    /// No correction: classical augmented-Lagrangian dual ascent.
    Zero,
}

/// Tunables shared by the primal-dual engines; `eta` only feeds the
/// first-order baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    /// Penalty parameter of the augmented Lagrangian.
    pub alpha: f64,
    /// Primal stepsize.
    pub beta: f64,
    /// Dual stepsize.
    pub gamma: f64,
    /// Jacobi relaxation weight in [0, 1).
    pub theta: f64,
    pub bounds: SpectralBounds,
    /// Primal sub-steps per outer iteration (S >= 1).
    pub inner_steps: usize,
    /// Adaptive inner-loop freeze constant; enables the early-stopping
    /// variant. Values in (0, 1) are the documented operating range; 0 and
    /// large values are the degenerate limits (never/immediately frozen).
    pub freeze_c: Option<f64>,
    pub b_mode: BMode,
    pub p_mode: PMode,
    /// Stepsize for `extra` / `gt`; `extra` defaults to `1/(2 alpha)`.
    pub eta: Option<f64>,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            alpha: 1.0,
            beta: 0.5,
            gamma: 1.0,
            theta: 0.0,
            bounds: SpectralBounds::default(),
            inner_steps: 1,
            freeze_c: None,
            b_mode: BMode::Bfgs,
            p_mode: PMode::BbConsensus,
            eta: None,
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.theta >= 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "theta must lie in [0, 1), got {}",
                self.theta
            )));
        }
        self.bounds.validate()?;
        if self.inner_steps == 0 {
            return Err(Error::InvalidArgument("inner_steps must be >= 1".into()));
        }
        if let Some(c) = self.freeze_c {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "freeze constant must be finite and nonnegative, got {c}"
                )));
            }
        }
        match self.b_mode {
            BMode::FixedScalar(k) if !(k > 0.0) => {
                return Err(Error::InvalidArgument("fixed scalar curvature must be positive".into()))
            }
            BMode::ExactHessianPlusEps(e) if !(e >= 0.0) => {
                return Err(Error::InvalidArgument("hessian shift must be nonnegative".into()))
            }
            _ => {}
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
            }
        }
        Ok(())
    }
}

/// A decentralized iterative method driven one outer iteration at a time.
pub trait ConsensusAlgorithm: Send {
    fn name(&self) -> &'static str;

    /// Runs one outer iteration; all communication goes through `counter`.
    fn iterate(&mut self, counter: &mut RoundCounter) -> Result<()>;

    fn node_count(&self) -> usize;

    /// Current iterate of node `i`.
    fn position(&self, i: usize) -> &DVector<f64>;

    /// Outer iterations completed so far.
    fn iteration(&self) -> u64;
}

/// Everything a factory needs to assemble an engine. Priming an engine's
/// exchange cache may itself communicate, which is why the counter is here.
pub struct BuildArgs<'a> {
    pub objectives: &'a [Arc<dyn LocalObjective>],
    pub mixing: &'a MixingMatrix,
    pub cfg: &'a AlgoConfig,
    /// Initial iterates; all-zero when absent.
    pub initial: Option<&'a [DVector<f64>]>,
    pub counter: &'a mut RoundCounter,
}

pub type AlgorithmFactory = fn(BuildArgs<'_>) -> Result<Box<dyn ConsensusAlgorithm>>;

/// Name-keyed registry of algorithm factories.
///
/// [`AlgorithmRegistry::standard`] registers the built-in family; callers
/// may add their own variants under new names.
pub struct AlgorithmRegistry {
    entries: BTreeMap<String, AlgorithmFactory>,
}

impl AlgorithmRegistry {
    pub fn empty() -> Self {
        AlgorithmRegistry { entries: BTreeMap::new() }
    }

    /// Registry with the built-in algorithms: `dpdm`, `gdpdm`, `gdpdm_plus`,
    /// `extra`, `gt`.
    pub fn standard() -> Self {
        let mut reg = Self::empty();
        reg.register("dpdm", build_dpdm);
        reg.register("gdpdm", build_gdpdm);
        reg.register("gdpdm_plus", build_gdpdm_plus);
        reg.register("extra", build_extra);
        reg.register("gt", build_gt);
        reg
    }

    pub fn register(&mut self, name: &str, factory: AlgorithmFactory) {
        self.entries.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(|s| s.as_str()).collect()
    }

    pub fn build(&self, name: &str, args: BuildArgs<'_>) -> Result<Box<dyn ConsensusAlgorithm>> {
        let factory = self.entries.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown algorithm {name:?}; available: {}",
                self.names().join(", ")
            ))
        })?;
        factory(args)
    }
}

fn build_dpdm(args: BuildArgs<'_>) -> Result<Box<dyn ConsensusAlgorithm>> {
    if args.cfg.inner_steps != 1 {
        return Err(Error::Config(format!(
            "dpdm runs exactly one primal step per iteration; got S = {} (use gdpdm)",
            args.cfg.inner_steps
        )));
    }
    let mut cfg = args.cfg.clone();
    cfg.freeze_c = None;
    let engine = PrimalDualEngine::new(
        "dpdm",
        args.objectives,
        args.mixing,
        cfg,
        args.initial,
        args.counter,
    )?;
    Ok(Box::new(engine))
}

fn build_gdpdm(args: BuildArgs<'_>) -> Result<Box<dyn ConsensusAlgorithm>> {
    let mut cfg = args.cfg.clone();
    cfg.freeze_c = None;
    let engine = PrimalDualEngine::new(
        "gdpdm",
        args.objectives,
        args.mixing,
        cfg,
        args.initial,
        args.counter,
    )?;
    Ok(Box::new(engine))
}

fn build_gdpdm_plus(args: BuildArgs<'_>) -> Result<Box<dyn ConsensusAlgorithm>> {
    if args.cfg.freeze_c.is_none() {
        return Err(Error::Config("gdpdm_plus needs the freeze constant c".into()));
    }
    let engine = PrimalDualEngine::new(
        "gdpdm_plus",
        args.objectives,
        args.mixing,
        args.cfg.clone(),
        args.initial,
        args.counter,
    )?;
    Ok(Box::new(engine))
}

fn build_extra(args: BuildArgs<'_>) -> Result<Box<dyn ConsensusAlgorithm>> {
    args.cfg.validate()?;
    let eta = args.cfg.eta.unwrap_or(1.0 / (2.0 * args.cfg.alpha));
    let engine = Extra::new(args.objectives, args.mixing, eta, args.initial)?;
    Ok(Box::new(engine))
}

fn build_gt(args: BuildArgs<'_>) -> Result<Box<dyn ConsensusAlgorithm>> {
    args.cfg.validate()?;
    let eta = args
        .cfg
        .eta
        .ok_or_else(|| Error::Config("gt needs an explicit stepsize eta".into()))?;
    let engine = GradientTracking::new(args.objectives, args.mixing, eta, args.initial)?;
    Ok(Box::new(engine))
}
