//! Experiment orchestration: problem/graph assembly, the oracle, the
//! iteration loop with metric capture, and sweep drivers.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;

use crate::algorithms::{AlgorithmRegistry, BuildArgs, ConsensusAlgorithm};
use crate::problems::{
    centralized_solve, make_quadratic, make_quadratic_shared_q, make_synthetic_logistic,
    parse_libsvm, shard_dataset, LocalObjective, ParseOptions, ShardStrategy, SyntheticLogistic,
};
use crate::topology::{generate_graph, metropolis_weights, Graph, RoundCounter};
use crate::{Error, Result};

mod config;
mod trace;

pub use config::{
    lookup_preset, preset_names, AlgoSection, ExperimentConfig, GraphConfig, Preset,
    ProblemConfig, RunSection,
};
pub use trace::{emit_csv, parse_csv, write_csv_file, TraceRecord, CSV_HEADER};

/// Result of one experiment run.
pub struct RunOutcome {
    pub trace: Vec<TraceRecord>,
    /// True when the stop threshold was reached within budget (always true
    /// when no target is set).
    pub reached_target: bool,
    pub final_error: f64,
    pub kappa_g: f64,
}

/// Mean relative error against the oracle solution:
/// `(1/n) sum_i |x_i - z*| / (|z*| + 1)`.
pub fn relative_error(algo: &dyn ConsensusAlgorithm, zstar: &DVector<f64>) -> f64 {
    let n = algo.node_count();
    let denom = zstar.norm() + 1.0;
    (0..n).map(|i| (algo.position(i) - zstar).norm() / denom).sum::<f64>() / n as f64
}

/// Builds the objective set described by the problem section.
pub fn build_objectives(problem: &ProblemConfig) -> Result<Vec<Arc<dyn LocalObjective>>> {
    match problem {
        ProblemConfig::Quadratic { n, p, kappa_f, seed, shared_q } => {
            let quads = if *shared_q {
                make_quadratic_shared_q(*n, *p, *kappa_f, *seed)?
            } else {
                make_quadratic(*n, *p, *kappa_f, *seed)?
            };
            Ok(quads.into_iter().map(|q| Arc::new(q) as Arc<dyn LocalObjective>).collect())
        }
        ProblemConfig::Logistic {
            n,
            lambda,
            path,
            zero_one_labels,
            strategy,
            p,
            samples,
            noise,
            seed,
        } => {
            let strategy = match strategy.as_str() {
                "contiguous" => ShardStrategy::Contiguous,
                "round_robin" => ShardStrategy::RoundRobin,
                other => return Err(Error::Config(format!("unknown shard strategy {other:?}"))),
            };
            let locals = if let Some(path) = path {
                // "-" follows the usual stdin convention
                let text = if path == "-" {
                    let mut buf = String::new();
                    std::io::Read::read_to_string(&mut std::io::stdin(), &mut buf)?;
                    buf
                } else {
                    std::fs::read_to_string(path)?
                };
                let dataset =
                    parse_libsvm(&text, ParseOptions { zero_one_labels: *zero_one_labels })?;
                shard_dataset(&dataset, *n, strategy, seed.unwrap_or(0), *lambda)?
            } else {
                let spec = SyntheticLogistic {
                    nodes: *n,
                    dim: p.expect("validated"),
                    samples: samples.expect("validated"),
                    noise: noise.unwrap_or(0.1),
                    seed: seed.unwrap_or(0),
                    reg: *lambda,
                };
                make_synthetic_logistic(&spec)?
            };
            Ok(locals.into_iter().map(|o| Arc::new(o) as Arc<dyn LocalObjective>).collect())
        }
    }
}

/// Builds the graph described by the graph section.
pub fn build_graph(graph: &GraphConfig) -> Result<Graph> {
    let kind = graph.kind_enum()?;
    generate_graph(graph.n, kind, graph.density.unwrap_or(0.0), graph.seed)
}

/// Runs one experiment: oracle, zero-initialized iterates, per-iteration
/// trace capture, stop at target or budget. Deterministic per seed in every
/// column except the wall-clock one.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let objectives = build_objectives(&cfg.problem)?;
    let graph = build_graph(&cfg.graph)?;
    let mixing = metropolis_weights(&graph);
    let algo_cfg = cfg.algo.resolve()?;
    let zstar = centralized_solve(&objectives, None)?;

    let registry = AlgorithmRegistry::standard();
    let mut counter = RoundCounter::new();
    let mut algo = registry.build(
        &cfg.algo.name,
        BuildArgs {
            objectives: &objectives,
            mixing: &mixing,
            cfg: &algo_cfg,
            initial: None,
            counter: &mut counter,
        },
    )?;

    let started = Instant::now();
    let mut trace = Vec::with_capacity(cfg.run.budget as usize + 1);
    let record = |algo: &dyn ConsensusAlgorithm, counter: &RoundCounter, started: &Instant| {
        TraceRecord {
            iter: algo.iteration(),
            rel_error: relative_error(algo, &zstar),
            comm_vector_entries: counter.vector_entries,
            comm_scalar_entries: counter.scalar_entries,
            rounds: counter.total_rounds(),
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        }
    };
    trace.push(record(algo.as_ref(), &counter, &started));
    let mut reached = cfg.run.target.is_none();
    for _ in 0..cfg.run.budget {
        algo.iterate(&mut counter)?;
        let rec = record(algo.as_ref(), &counter, &started);
        let hit = cfg.run.target.map_or(false, |t| rec.rel_error <= t);
        trace.push(rec);
        if hit {
            reached = true;
            break;
        }
    }
    let final_error = trace.last().expect("at least the initial record").rel_error;
    if let Some(out) = &cfg.run.out {
        write_csv_file(&trace, Path::new(out))?;
    }
    Ok(RunOutcome { trace, reached_target: reached, final_error, kappa_g: mixing.kappa_g() })
}

/// Sweep axes: objective conditioning, network density, or inner step count.
#[derive(Debug, Clone)]
pub enum SweepAxis {
    KappaF(Vec<f64>),
    Density(Vec<f64>),
    InnerSteps(Vec<usize>),
}

/// One row of a sweep summary.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub kappa_g: f64,
    pub iterations_to_target: Option<u64>,
    pub final_rel_error: f64,
    pub total_vector_entries: u64,
    pub total_rounds: u64,
}

/// Runs the base experiment once per axis value (shared seeds) and returns
/// the summary rows; traces land in `out_dir` when given.
///
/// A density sweep maps its end points onto the structured graphs the
/// density ladder represents: the minimum feasible density is the line
/// graph and density one is the complete graph.
pub fn sweep(
    base: &ExperimentConfig,
    axis: &SweepAxis,
    out_dir: Option<&Path>,
) -> Result<Vec<SweepPoint>> {
    base.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut points = Vec::new();
    match axis {
        SweepAxis::KappaF(values) => {
            for &kf in values {
                let mut cfg = base.clone();
                match &mut cfg.problem {
                    ProblemConfig::Quadratic { kappa_f, .. } => *kappa_f = kf,
                    _ => {
                        return Err(Error::Config(
                            "kappa_f sweeps need a quadratic problem".into(),
                        ))
                    }
                }
                points.push(run_point(&cfg, format!("kappa_f={kf}"), out_dir)?);
            }
        }
        SweepAxis::Density(values) => {
            let n = base.graph.n;
            let min_density = 2.0 / n as f64;
            for &d in values {
                let mut cfg = base.clone();
                if (d - min_density).abs() <= 1e-9 {
                    cfg.graph.kind = "line".into();
                    cfg.graph.density = None;
                } else if (d - 1.0).abs() <= 1e-9 {
                    cfg.graph.kind = "complete".into();
                    cfg.graph.density = None;
                } else {
                    cfg.graph.kind = "random".into();
                    cfg.graph.density = Some(d);
                }
                points.push(run_point(&cfg, format!("density={d}"), out_dir)?);
            }
        }
        SweepAxis::InnerSteps(values) => {
            for &s in values {
                let mut cfg = base.clone();
                cfg.algo.s = Some(s);
                points.push(run_point(&cfg, format!("s={s}"), out_dir)?);
            }
        }
    }
    Ok(points)
}

fn run_point(cfg: &ExperimentConfig, label: String, out_dir: Option<&Path>) -> Result<SweepPoint> {
    let mut cfg = cfg.clone();
    cfg.run.out = out_dir.map(|dir| {
        dir.join(format!("{}.csv", label.replace('=', "_")))
            .to_string_lossy()
            .into_owned()
    });
    let outcome = run_experiment(&cfg)?;
    let last = outcome.trace.last().expect("non-empty trace");
    let iterations_to_target = match cfg.run.target {
        Some(t) if outcome.reached_target => {
            outcome.trace.iter().find(|r| r.rel_error <= t).map(|r| r.iter)
        }
        _ => None,
    };
    Ok(SweepPoint {
        label,
        kappa_g: outcome.kappa_g,
        iterations_to_target,
        final_rel_error: outcome.final_error,
        total_vector_entries: last.comm_vector_entries,
        total_rounds: last.rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_config(algo: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            r#"
[problem]
kind = "quadratic"
n = 6
p = 8
kappa_f = 10.0
seed = 42

[graph]
kind = "random"
n = 6
density = 0.5
seed = 7

[algo]
name = "{algo}"
preset = "linreg-desk"

[run]
budget = 400
target = 1e-10
"#
        ))
        .unwrap()
    }

    #[test]
    fn run_experiment_reaches_target_and_records_monotone_counters() {
        let outcome = run_experiment(&quad_config("dpdm")).unwrap();
        assert!(outcome.reached_target);
        assert!(outcome.final_error <= 1e-10);
        let trace = &outcome.trace;
        assert_eq!(trace[0].iter, 0);
        // first record is the zero iterate: rel = |z*|/(|z*|+1), in (0, 1)
        assert!(trace[0].rel_error > 0.0 && trace[0].rel_error < 1.0);
        assert_eq!(trace[0].rounds, 0, "zero-initialized start costs no rounds");
        for w in trace.windows(2) {
            assert!(w[1].comm_vector_entries >= w[0].comm_vector_entries);
            assert!(w[1].rounds > w[0].rounds);
            assert_eq!(w[1].iter, w[0].iter + 1);
        }
        // stop-condition correctness: only the last record meets the target
        for r in &trace[..trace.len() - 1] {
            assert!(r.rel_error > 1e-10);
        }
        // dpdm with theta != 0: 3 vector + 2 scalar rounds per iteration
        let last = trace.last().unwrap();
        assert_eq!(last.rounds, 5 * last.iter);
    }

    #[test]
    fn traces_are_deterministic_per_seed() {
        let a = run_experiment(&quad_config("dpdm")).unwrap();
        let b = run_experiment(&quad_config("dpdm")).unwrap();
        assert_eq!(a.trace.len(), b.trace.len());
        for (x, y) in a.trace.iter().zip(&b.trace) {
            // bit-identical in every deterministic column
            assert_eq!(x.iter, y.iter);
            assert_eq!(x.rel_error.to_bits(), y.rel_error.to_bits());
            assert_eq!(x.comm_vector_entries, y.comm_vector_entries);
            assert_eq!(x.comm_scalar_entries, y.comm_scalar_entries);
            assert_eq!(x.rounds, y.rounds);
        }
    }

    #[test]
    fn budget_exhaustion_reports_not_reached() {
        let mut cfg = quad_config("dpdm");
        cfg.run.budget = 3;
        let outcome = run_experiment(&cfg).unwrap();
        assert!(!outcome.reached_target);
        assert_eq!(outcome.trace.len(), 4);
    }

    #[test]
    fn synthetic_logistic_path_works_end_to_end() {
        let cfg = ExperimentConfig::from_toml(
            r#"
[problem]
kind = "logistic"
n = 4
lambda = 1.0
p = 6
samples = 60
seed = 5

[graph]
kind = "complete"
n = 4

[algo]
name = "gdpdm"
preset = "logistic-desk"
s = 2

[run]
budget = 200
target = 1e-8
"#,
        )
        .unwrap();
        let outcome = run_experiment(&cfg).unwrap();
        assert!(outcome.reached_target, "final error {}", outcome.final_error);
    }

    #[test]
    fn libsvm_file_problems_run_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("toy.libsvm");
        // 0/1-labeled file exercises the label-mapping flag
        let mut text = String::new();
        for k in 0..24 {
            let label = k % 2;
            text.push_str(&format!("{label} 1:{} 3:{}\n", 0.1 * k as f64 - 1.0, 1.0));
        }
        std::fs::write(&data, text).unwrap();
        let cfg = ExperimentConfig::from_toml(&format!(
            r#"
[problem]
kind = "logistic"
n = 4
lambda = 1.0
path = "{}"
zero_one_labels = true
strategy = "round_robin"

[graph]
kind = "complete"
n = 4

[algo]
name = "dpdm"
preset = "logistic-desk"

[run]
budget = 300
target = 1e-8
"#,
            data.display()
        ))
        .unwrap();
        let outcome = run_experiment(&cfg).unwrap();
        assert!(outcome.reached_target, "final error {}", outcome.final_error);
    }

    #[test]
    fn shared_q_recipe_builds_commuting_matrices() {
        let problem = ProblemConfig::Quadratic {
            n: 3,
            p: 4,
            kappa_f: 10.0,
            seed: 5,
            shared_q: true,
        };
        let objs = build_objectives(&problem).unwrap();
        let a = objs[0].as_quadratic().unwrap().matrix().clone();
        let b = objs[1].as_quadratic().unwrap().matrix().clone();
        assert!((&a * &b - &b * &a).amax() < 1e-9, "shared basis means commuting matrices");
    }

    #[test]
    fn kappa_sweep_produces_one_row_per_value() {
        let mut base = quad_config("dpdm");
        base.run.budget = 300;
        base.run.target = Some(1e-6);
        let points = sweep(&base, &SweepAxis::KappaF(vec![10.0, 100.0]), None).unwrap();
        assert_eq!(points.len(), 2);
        for p in &points {
            assert!(p.iterations_to_target.is_some(), "{}: {}", p.label, p.final_rel_error);
        }
    }

    #[test]
    fn density_sweep_maps_ladder_ends_to_line_and_complete() {
        let mut base = quad_config("dpdm");
        base.problem = ProblemConfig::Quadratic {
            n: 10,
            p: 4,
            kappa_f: 10.0,
            seed: 1,
            shared_q: false,
        };
        base.graph = GraphConfig { kind: "random".into(), n: 10, density: Some(0.36), seed: 7 };
        base.run.budget = 5;
        base.run.target = None;
        let points = sweep(&base, &SweepAxis::Density(vec![0.2, 0.36, 1.0]), None).unwrap();
        assert_eq!(points.len(), 3);
        assert!((points[0].kappa_g - 39.8).abs() < 0.5, "line end: {}", points[0].kappa_g);
        assert!((points[2].kappa_g - 1.0).abs() < 1e-9, "complete end: {}", points[2].kappa_g);
        assert!(points[0].kappa_g > points[1].kappa_g && points[1].kappa_g > points[2].kappa_g);
    }

    #[test]
    fn sweep_writes_traces_when_given_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut base = quad_config("dpdm");
        base.run.budget = 5;
        base.run.target = None;
        sweep(&base, &SweepAxis::InnerSteps(vec![1]), Some(dir.path())).unwrap();
        let text = std::fs::read_to_string(dir.path().join("s_1.csv")).unwrap();
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.len(), 6);
    }
}
