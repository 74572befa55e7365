use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::cache::DiskCache;
use super::config::{ExperimentConfig, Method, OracleKind, PolicyKind};
use super::trace::{emit_csv, ConvergenceTrace, TraceRow};
use crate::data::{parse_libsvm, Dataset};
use crate::error::{Error, Result};
use crate::objectives::{dist_sq, CompositeObjective};
use crate::reductions::{
    adapt_reg_with, adapt_smooth_with, classical_reg, classical_smooth, direct, joint_adapt_with,
    ClassicalParams, EpochRecord, ReductionObserver, ReductionParams,
};
use crate::solvers::{
    reference_solution, Apg, Checkpoint, HoodOracle, ProxGd, Reference, Sdca, Svrg,
    TerminationPolicy,
};

/// Epoch cap when neither `epochs` nor `epsilon` is configured (σ_t stays a normal float).
pub const UNLIMITED_EPOCHS: usize = 1000;

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: ConvergenceTrace,
    pub x: Vec<f64>,
    pub reference: Reference,
    pub params: ReductionParams,
    pub epochs: Vec<EpochRecord>,
}

/// Reads a LibSVM file; every failure is a data error.
pub fn load_dataset(path: &Path, dim: Option<usize>) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    parse_libsvm(std::io::BufReader::new(file), dim).map_err(|e| match e {
        Error::Io(io) => Error::Data(format!("cannot read {}: {io}", path.display())),
        other => other,
    })
}

/// The objective a config describes, on the given (already loaded) data.
pub fn build_objective(cfg: &ExperimentConfig, data: Dataset) -> Result<CompositeObjective> {
    let data = if cfg.normalize {
        data.normalize_rows()?
    } else {
        data
    };
    let reg = cfg.task.regularizer(cfg.l1_weight, cfg.l2_weight)?;
    Ok(CompositeObjective::new(
        Arc::new(data),
        cfg.task.loss(),
        reg,
    ))
}

fn make_oracle(cfg: &ExperimentConfig) -> Box<dyn HoodOracle> {
    match cfg.oracle {
        OracleKind::ProxGd => Box::new(ProxGd),
        OracleKind::Apg => Box::new(Apg),
        OracleKind::Svrg => Box::new(Svrg { seed: cfg.seed }),
        OracleKind::Sdca => Box::new(Sdca { seed: cfg.seed }),
    }
}

fn reference_for(cfg: &ExperimentConfig, f: &CompositeObjective) -> Result<Reference> {
    let dir = cfg
        .cache_dir
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(|d| d.join(".reference")));
    match dir {
        Some(d) => DiskCache::new(d).get_or_compute(f, cfg.reference_tol),
        None => reference_solution(f, cfg.reference_tol),
    }
}

/// `σ0 = Δ/Θ`, `λ0 = Δ/G²` from the reference unless overridden; `T` from `epochs`, else
/// `ceil(log₂(Δ/ε))`, else [`UNLIMITED_EPOCHS`].
pub fn resolve_params(
    cfg: &ExperimentConfig,
    f: &CompositeObjective,
    x0: &[f64],
    r: &Reference,
) -> ReductionParams {
    let delta = (f.value(x0) - r.value).max(0.0);
    let theta = dist_sq(x0, &r.x);
    let g = f.lipschitz();
    let ratio = |a: f64, b: f64| {
        if a > 0.0 && b > 0.0 && (a / b).is_finite() {
            a / b
        } else {
            1.0
        }
    };
    let mut p = ReductionParams::new(
        cfg.sigma0.unwrap_or_else(|| ratio(delta, theta)),
        cfg.lambda0.unwrap_or_else(|| ratio(delta, g * g)),
        UNLIMITED_EPOCHS,
    );
    p.delta = Some(delta);
    p.theta = Some(theta);
    p.lipschitz = Some(g);
    p.epsilon = cfg.epsilon;
    p.epochs = match (cfg.epochs, cfg.epsilon) {
        (Some(t), _) => t,
        (None, Some(eps)) if delta > eps => (delta / eps).log2().ceil() as usize,
        (None, Some(_)) => {
            p.warning = Some("F(x0) − F* ≤ ε: epoch count clamped to 1".into());
            1
        }
        (None, None) => UNLIMITED_EPOCHS,
    };
    p
}

struct TraceObserver<'a> {
    f: &'a CompositeObjective,
    fstar: f64,
    budget: f64,
    epsilon: Option<f64>,
    done_passes: f64,
    rows: Vec<TraceRow>,
    start: Option<Instant>,
}

impl TraceObserver<'_> {
    fn wall(&self) -> u64 {
        self.start.map_or(0, |s| s.elapsed().as_millis() as u64)
    }

    fn push(&mut self, mut row: TraceRow) {
        if self.rows.last().is_some_and(|l| row.passes <= l.passes) {
            return;
        }
        row.wall_ms = self.wall();
        self.rows.push(row);
    }
}

impl ReductionObserver for TraceObserver<'_> {
    fn checkpoint(
        &mut self,
        t: usize,
        sigma_t: Option<f64>,
        lambda_t: Option<f64>,
        cp: &Checkpoint<'_>,
    ) {
        let objective = self.f.value(cp.x);
        self.push(TraceRow {
            epoch: t,
            passes: self.done_passes + cp.passes,
            objective,
            subopt: objective - self.fstar,
            stat: Some(cp.stat),
            sigma_t,
            lambda_t,
            wall_ms: 0,
        });
    }

    fn epoch(&mut self, rec: &EpochRecord, _: &CompositeObjective) -> bool {
        self.done_passes += rec.report.data_passes;
        let objective = self.f.value(&rec.x_hat);
        let subopt = objective - self.fstar;
        self.push(TraceRow {
            epoch: rec.t,
            passes: self.done_passes,
            objective,
            subopt,
            stat: rec.report.final_stat,
            sigma_t: rec.sigma_t,
            lambda_t: rec.lambda_t,
            wall_ms: 0,
        });
        let reached = self.epsilon.is_some_and(|e| subopt <= e);
        !reached && self.done_passes < self.budget
    }

    fn remaining_passes(&self) -> f64 {
        self.budget - self.done_passes
    }
}

/// Runs a config on in-memory data (the config's `data_path` is not read).
pub fn run_on_dataset(cfg: &ExperimentConfig, data: Dataset) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    if cfg.data_path.is_none() {
        cfg.data_path = Some("<memory>".into());
    }
    cfg.validate()?;
    let f = build_objective(&cfg, data)?;
    let reference = reference_for(&cfg, &f)?;
    let x0 = vec![0.0; f.d()];
    let params = resolve_params(&cfg, &f, &x0, &reference);
    let oracle = make_oracle(&cfg);
    let policy = match cfg.policy {
        PolicyKind::Practical => TerminationPolicy::new(oracle.practical_rule()),
        PolicyKind::Theory => TerminationPolicy::theory(),
    };

    let mut obs = TraceObserver {
        f: &f,
        fstar: reference.value,
        budget: cfg.pass_budget,
        epsilon: cfg.epsilon,
        done_passes: 0.0,
        rows: Vec::new(),
        start: cfg.wall_clock.then(Instant::now),
    };
    let f0 = f.value(&x0);
    let (s0, l0) = match cfg.method {
        Method::AdaptReg => (Some(params.sigma0), None),
        Method::AdaptSmooth => (None, Some(params.lambda0)),
        Method::Joint => (Some(params.sigma0), Some(params.lambda0)),
        Method::ClassicalReg => (cfg.sigma, None),
        Method::ClassicalSmooth => (None, cfg.lambda),
        Method::Direct => (None, None),
    };
    obs.rows.push(TraceRow {
        epoch: 0,
        passes: 0.0,
        objective: f0,
        subopt: f0 - reference.value,
        stat: None,
        sigma_t: s0,
        lambda_t: l0,
        wall_ms: 0,
    });

    let o = oracle.as_ref();
    let fixed = ClassicalParams {
        target: 0.0,
        max_calls: cfg.epochs.unwrap_or(usize::MAX),
    };
    let (x, epochs) = match cfg.method {
        Method::AdaptReg => adapt_reg_with(&f, o, &x0, &params, &policy, &mut obs)?,
        Method::AdaptSmooth => adapt_smooth_with(&f, o, &x0, &params, &policy, &mut obs)?,
        Method::Joint => joint_adapt_with(&f, o, &x0, &params, &policy, &mut obs)?,
        Method::ClassicalReg => {
            let s = cfg.sigma.expect("validated");
            classical_reg(&f, o, &x0, s, fixed, &policy, &mut obs)?
        }
        Method::ClassicalSmooth => {
            let l = cfg.lambda.expect("validated");
            classical_smooth(&f, o, &x0, l, fixed, &policy, &mut obs)?
        }
        Method::Direct => direct(&f, o, &x0, fixed, &policy, &mut obs)?,
    };
    let trace = ConvergenceTrace { rows: obs.rows };
    if let Some(path) = cfg.trace_path() {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        emit_csv(&trace, &path)?;
    }
    Ok(RunOutcome {
        trace,
        x,
        reference,
        params,
        epochs,
    })
}

/// Loads the config's data file, runs it, and writes the trace when `out_dir` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceTrace> {
    cfg.validate()?;
    let data = load_dataset(cfg.data_path.as_deref().expect("validated"), cfg.dim)?;
    run_on_dataset(cfg, data).map(|o| o.trace)
}

/// One line of a sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub name: String,
    pub method: Method,
    pub oracle: OracleKind,
    /// The tuned parameter, e.g. `sigma=0.1`.
    pub parameter: String,
    pub final_subopt: Option<f64>,
    pub best_subopt: Option<f64>,
    pub passes: Option<f64>,
    pub error: Option<String>,
}

fn parameter_label(cfg: &ExperimentConfig) -> String {
    let f = |k: &str, v: Option<f64>| v.map(|v| format!("{k}={v:?}"));
    let parts: Vec<String> = match cfg.method {
        Method::ClassicalReg => vec![f("sigma", cfg.sigma)],
        Method::ClassicalSmooth => vec![f("lambda", cfg.lambda)],
        _ => vec![f("sigma0", cfg.sigma0), f("lambda0", cfg.lambda0)],
    }
    .into_iter()
    .flatten()
    .collect();
    if parts.is_empty() {
        "default".into()
    } else {
        parts.join(";")
    }
}

/// Runs every config (in parallel); individual failures are recorded, not fatal. Fails before
/// running anything if two configs would write the same trace file.
pub fn sweep(configs: &[ExperimentConfig]) -> Result<Vec<SweepEntry>> {
    let mut seen = HashSet::new();
    for c in configs {
        if let Some(p) = c.trace_path() {
            if !seen.insert(p.clone()) {
                return Err(Error::Config(format!(
                    "duplicate output path {}",
                    p.display()
                )));
            }
        }
    }
    Ok(configs
        .par_iter()
        .map(|c| {
            let res = run_experiment(c);
            let (trace, error) = match res {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let last = trace.as_ref().and_then(|t| t.last().copied());
            SweepEntry {
                name: c.trace_name(),
                method: c.method,
                oracle: c.oracle,
                parameter: parameter_label(c),
                final_subopt: last.map(|r| r.subopt),
                best_subopt: trace.as_ref().and_then(|t| t.best_subopt()),
                passes: last.map(|r| r.passes),
                error,
            }
        })
        .collect())
}

pub const SUMMARY_HEADER: &str =
    "name,method,oracle,parameter,final_subopt,best_subopt,passes,error";

pub fn summary_csv(entries: &[SweepEntry]) -> String {
    let o = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for e in entries {
        let err = e.error.as_deref().unwrap_or("").replace([',', '\n'], " ");
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            e.name,
            e.method,
            e.oracle,
            e.parameter,
            o(e.final_subopt),
            o(e.best_subopt),
            o(e.passes),
            err
        ));
    }
    s
}
