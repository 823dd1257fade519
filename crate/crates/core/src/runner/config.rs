//! Experiment configuration: TOML `[section] key = value` files, named
//! parameter presets, and the resolution into engine tunables.

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgoConfig, BMode, PMode};
use crate::quasinewton::SpectralBounds;
use crate::topology::GraphKind;
use crate::{Error, Result};

/// Full experiment description; parses from and serializes to TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub graph: GraphConfig,
    pub algo: AlgoSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Conditioned quadratics; regenerated from the recipe, never stored.
    Quadratic {
        n: usize,
        p: usize,
        kappa_f: f64,
        seed: u64,
        #[serde(default)]
        shared_q: bool,
    },
    /// Logistic regression over a LIBSVM file or a synthetic instance.
    Logistic {
        n: usize,
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
        #[serde(default)]
        zero_one_labels: bool,
        #[serde(default = "default_strategy")]
        strategy: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        noise: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

fn default_strategy() -> String {
    "contiguous".to_string()
}

impl ProblemConfig {
    pub fn node_count(&self) -> usize {
        match self {
            ProblemConfig::Quadratic { n, .. } | ProblemConfig::Logistic { n, .. } => *n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// `line`, `complete`, or `random`.
    pub kind: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl GraphConfig {
    pub fn kind_enum(&self) -> Result<GraphKind> {
        match self.kind.as_str() {
            "line" => Ok(GraphKind::Line),
            "complete" => Ok(GraphKind::Complete),
            "random" => Ok(GraphKind::Random),
            other => Err(Error::Config(format!("unknown graph kind {other:?}"))),
        }
    }
}

/// Algorithm selection plus tunable overrides. Any field left unset falls
/// back to the preset (when named), then to the engine defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AlgoSection {
    /// `dpdm`, `gdpdm`, `gdpdm_plus`, `extra`, or `gt`.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_r: Option<f64>,
    /// Inner primal steps per iteration (S).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    /// Freeze constant for `gdpdm_plus`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Stepsize for `extra` / `gt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// `bfgs` (default), `fixed_scalar`, or `exact_hessian`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_mode: Option<String>,
    /// Scalar curvature for `fixed_scalar`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_scalar: Option<f64>,
    /// Diagonal shift for `exact_hessian`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_eps: Option<f64>,
    /// `bb_consensus` (default) or `zero`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_mode: Option<String>,
}

impl AlgoSection {
    /// Resolves the section into engine tunables: defaults, then preset,
    /// then explicit overrides.
    pub fn resolve(&self) -> Result<AlgoConfig> {
        let mut cfg = AlgoConfig::default();
        let s = self.s.unwrap_or(1);
        if let Some(preset_name) = &self.preset {
            let preset = lookup_preset(preset_name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset {preset_name:?}; available: {}",
                    preset_names().join(", ")
                ))
            })?;
            preset.apply(&mut cfg, s, self.name == "gdpdm_plus");
        }
        cfg.inner_steps = s;
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.theta {
            cfg.theta = v;
        }
        if let Some(v) = self.omega_lo {
            cfg.bounds.omega_lo = v;
        }
        if let Some(v) = self.omega_hi {
            cfg.bounds.omega_hi = v;
        }
        if let Some(v) = self.c_r {
            cfg.bounds.c_r = v;
        }
        if let Some(v) = self.eta_r {
            cfg.bounds.eta_r = v;
        }
        if self.name == "gdpdm_plus" {
            cfg.freeze_c = self.c.or(cfg.freeze_c);
            if cfg.freeze_c.is_none() {
                return Err(Error::Config("gdpdm_plus needs c (freeze constant)".into()));
            }
        } else {
            cfg.freeze_c = None;
        }
        cfg.eta = self.eta;
        cfg.b_mode = match self.b_mode.as_deref() {
            None | Some("bfgs") => BMode::Bfgs,
            Some("fixed_scalar") => BMode::FixedScalar(self.b_scalar.ok_or_else(|| {
                Error::Config("b_mode = fixed_scalar needs b_scalar".into())
            })?),
            Some("exact_hessian") => BMode::ExactHessianPlusEps(self.b_eps.ok_or_else(|| {
                Error::Config("b_mode = exact_hessian needs b_eps".into())
            })?),
            Some(other) => return Err(Error::Config(format!("unknown b_mode {other:?}"))),
        };
        cfg.p_mode = match self.p_mode.as_deref() {
            None | Some("bb_consensus") => PMode::BbConsensus,
            Some("zero") => PMode::Zero,
            Some(other) => return Err(Error::Config(format!("unknown p_mode {other:?}"))),
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Max outer iterations.
    pub budget: u64,
    /// Relative-error stop threshold; run the full budget when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    /// Trace CSV output path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.problem.node_count() != self.graph.n {
            return Err(Error::Config(format!(
                "problem has n = {} nodes but the graph has n = {}",
                self.problem.node_count(),
                self.graph.n
            )));
        }
        self.graph.kind_enum()?;
        if self.graph.kind == "random" && self.graph.density.is_none() {
            return Err(Error::Config("random graphs need a density".into()));
        }
        if let ProblemConfig::Logistic { path, p, samples, seed, lambda, .. } = &self.problem {
            if !(lambda > &0.0) {
                return Err(Error::Config("lambda must be positive".into()));
            }
            let synthetic = p.is_some() || samples.is_some() || seed.is_some();
            match (path, synthetic) {
                (Some(_), true) => {
                    return Err(Error::Config(
                        "logistic problem: give either a path or a synthetic recipe, not both"
                            .into(),
                    ))
                }
                (None, false) => {
                    return Err(Error::Config(
                        "logistic problem: give a path or a synthetic recipe (p, samples, seed)"
                            .into(),
                    ))
                }
                (None, true) if p.is_none() || samples.is_none() => {
                    return Err(Error::Config(
                        "synthetic logistic recipe needs both p and samples".into(),
                    ))
                }
                _ => {}
            }
        }
        if self.run.budget == 0 {
            return Err(Error::Config("budget must be >= 1".into()));
        }
        self.algo.resolve()?;
        Ok(())
    }
}

/// A named parameter bundle; `beta` varies with the inner step count the way
/// the experiment tables tune it.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub alpha: f64,
    pub gamma: f64,
    pub theta: f64,
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub c_r: f64,
    pub eta_r: f64,
    pub freeze_c: f64,
    pub beta_default: f64,
    pub beta_by_s: &'static [(usize, f64)],
    /// Stepsize for the adaptive-freeze variant, when tuned separately.
    pub beta_plus: Option<f64>,
}

impl Preset {
    fn apply(&self, cfg: &mut AlgoConfig, s: usize, plus: bool) {
        cfg.alpha = self.alpha;
        cfg.gamma = self.gamma;
        cfg.theta = self.theta;
        cfg.bounds = SpectralBounds {
            omega_lo: self.omega_lo,
            omega_hi: self.omega_hi,
            c_r: self.c_r,
            eta_r: self.eta_r,
        };
        cfg.freeze_c = Some(self.freeze_c);
        cfg.beta = if plus {
            self.beta_plus.unwrap_or(self.beta_default)
        } else {
            self.beta_by_s
                .iter()
                .find(|(k, _)| *k == s)
                .map(|(_, b)| *b)
                .unwrap_or(self.beta_default)
        };
    }
}

/// Named parameter bundles. The dataset-named entries carry the reference
/// experiment settings for those workloads; the `-desk` bundles are tuned
/// for the small self-contained instances the test suite runs.
static PRESETS: &[Preset] = &[
    Preset {
        name: "linreg-k10",
        alpha: 2.8,
        gamma: 1.0,
        theta: 0.32,
        omega_lo: 0.32,
        omega_hi: 1e4,
        c_r: 1.0,
        eta_r: 0.95,
        freeze_c: 0.4,
        beta_default: 0.49,
        beta_by_s: &[(1, 0.49), (2, 0.31), (3, 0.22), (4, 0.17)],
        beta_plus: Some(0.57),
    },
    Preset {
        name: "linreg-desk",
        alpha: 1.5,
        gamma: 1.0,
        theta: 0.32,
        omega_lo: 0.2,
        omega_hi: 1e4,
        c_r: 1.0,
        eta_r: 0.95,
        freeze_c: 0.4,
        beta_default: 0.35,
        beta_by_s: &[],
        beta_plus: None,
    },
    Preset {
        name: "mushroom",
        alpha: 3.6,
        gamma: 1.0,
        theta: 0.18,
        omega_lo: 0.18,
        omega_hi: 1e4,
        c_r: 1.0,
        eta_r: 0.95,
        freeze_c: 0.6,
        beta_default: 0.48,
        beta_by_s: &[(1, 0.48), (2, 0.3), (4, 0.17)],
        beta_plus: Some(0.51),
    },
    Preset {
        name: "ijcnn1",
        alpha: 4.0,
        gamma: 1.0,
        theta: 0.15,
        omega_lo: 0.15,
        omega_hi: 1e4,
        c_r: 1.0,
        eta_r: 0.95,
        freeze_c: 0.3,
        beta_default: 0.41,
        beta_by_s: &[(1, 0.41), (2, 0.33), (4, 0.22)],
        beta_plus: Some(0.44),
    },
    Preset {
        name: "w8a",
        alpha: 3.6,
        gamma: 1.0,
        theta: 0.17,
        omega_lo: 0.17,
        omega_hi: 1e4,
        c_r: 1.0,
        eta_r: 0.95,
        freeze_c: 0.6,
        beta_default: 0.47,
        beta_by_s: &[(1, 0.47), (2, 0.38), (4, 0.22)],
        beta_plus: Some(0.45),
    },
    Preset {
        name: "a9a",
        alpha: 4.0,
        gamma: 1.0,
        theta: 0.15,
        omega_lo: 0.15,
        omega_hi: 1e4,
        c_r: 1.0,
        eta_r: 0.95,
        freeze_c: 0.45,
        beta_default: 0.38,
        beta_by_s: &[(1, 0.38), (2, 0.34), (4, 0.19)],
        beta_plus: Some(0.42),
    },
    Preset {
        name: "logistic-desk",
        alpha: 3.6,
        gamma: 1.0,
        theta: 0.18,
        omega_lo: 0.18,
        omega_hi: 1e4,
        c_r: 1.0,
        eta_r: 0.95,
        freeze_c: 0.6,
        beta_default: 0.35,
        beta_by_s: &[],
        beta_plus: Some(0.45),
    },
];

pub fn lookup_preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}
