//! Decentralized consensus optimization over simulated networks.
//!
//! The crate simulates `n` nodes that cooperatively minimize `sum_i f_i(z)`
//! while only ever exchanging data with their graph neighbors. The solver
//! family combines a quasi-Newton primal update (per-node BFGS with a Jacobi
//! relaxation of the network coupling) with a dual ascent step that carries a
//! spectral second-order correction estimated by Barzilai-Borwein ratios and
//! dynamic average consensus. First-order baselines (EXTRA, gradient
//! tracking) run behind the same algorithm trait for comparison.
//!
//! Layout:
//! - [`topology`]: graphs, Metropolis mixing matrices, the neighbor-exchange
//!   primitive and its communication accounting.
//! - [`problems`]: quadratic and logistic local objectives, LIBSVM parsing,
//!   sharding, and the centralized oracle used for error reporting.
//! - [`quasinewton`]: BFGS inverse updates and the dual spectral estimator.
//! - [`algorithms`]: the iteration engines and the name-keyed registry.
//! - [`diagnostics`]: dense reference computations that check the solver's
//!   structural identities at small scale.
//! - [`runner`]: experiment configs, trace capture, CSV output, sweeps.

pub mod algorithms;
pub mod diagnostics;
mod error;
pub mod problems;
pub mod quasinewton;
pub mod runner;
pub mod topology;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
