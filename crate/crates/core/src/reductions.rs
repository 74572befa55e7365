//! AdaptReg, AdaptSmooth and JointAdaptRegSmooth, plus the fixed-parameter baselines.

use crate::error::{Error, Result};
use crate::objectives::{Case, CompositeObjective};
use crate::solvers::{
    reference_solution, Checkpoint, HoodOracle, Monitor, OracleReport, TerminationPolicy,
    STAT_FLOOR,
};

/// Parameters of an adaptive reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionParams {
    pub sigma0: f64,
    pub lambda0: f64,
    /// Number of epochs `T`.
    pub epochs: usize,
    /// Bound on `F(x0) − F*`.
    pub delta: Option<f64>,
    /// Bound on `‖x0 − x*‖²`.
    pub theta: Option<f64>,
    /// Loss Lipschitz constant `G`.
    pub lipschitz: Option<f64>,
    pub epsilon: Option<f64>,
    /// When set, every epoch also solves its objective to this tolerance and records `D_t`.
    pub reference_tol: Option<f64>,
    pub warning: Option<String>,
}

impl ReductionParams {
    pub fn new(sigma0: f64, lambda0: f64, epochs: usize) -> Self {
        ReductionParams {
            sigma0,
            lambda0,
            epochs,
            delta: None,
            theta: None,
            lipschitz: None,
            epsilon: None,
            reference_tol: None,
            warning: None,
        }
    }

    pub fn with_reference_tol(mut self, tol: f64) -> Self {
        self.reference_tol = Some(tol);
        self
    }

    /// `σ_t = σ0 · 2^{−t}`
    pub fn sigma_at(&self, t: usize) -> f64 {
        halve(self.sigma0, t)
    }

    /// `λ_t = λ0 · 2^{−t}`
    pub fn lambda_at(&self, t: usize) -> f64 {
        halve(self.lambda0, t)
    }
}

fn halve(v: f64, t: usize) -> f64 {
    v * 0.5f64.powi(t.min(i32::MAX as usize) as i32)
}

/// `σ0 = Δ/Θ`, `λ0 = Δ/G²`, `T = ceil(log₂(Δ/ε))` (clamped to 1 with a warning if `Δ ≤ ε`).
/// An infinite `G` leaves `λ0 = 0`, which the smoothing reductions reject.
pub fn default_params(delta: f64, theta: f64, g: f64, epsilon: f64) -> Result<ReductionParams> {
    for (name, v) in [("Δ", delta), ("Θ", theta), ("ε", epsilon)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::contract(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if !(g > 0.0) {
        return Err(Error::contract(format!("G must be positive, got {g}")));
    }
    let ratio = (delta / epsilon).log2().ceil();
    let (epochs, warning) = if ratio >= 1.0 {
        (ratio as usize, None)
    } else {
        (
            1,
            Some(format!(
                "Δ = {delta} ≤ ε = {epsilon}: epoch count clamped to 1"
            )),
        )
    };
    Ok(ReductionParams {
        sigma0: delta / theta,
        lambda0: if g.is_finite() { delta / (g * g) } else { 0.0 },
        epochs,
        delta: Some(delta),
        theta: Some(theta),
        lipschitz: Some(g),
        epsilon: Some(epsilon),
        reference_tol: None,
        warning,
    })
}

/// One oracle call of a reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub t: usize,
    pub sigma_t: Option<f64>,
    pub lambda_t: Option<f64>,
    /// Output of this epoch (`x̂_{t+1}`).
    pub x_hat: Vec<f64>,
    pub report: OracleReport,
    /// `F_t(x̂_t) − min F_t`, only in reference mode.
    pub d_t_estimate: Option<f64>,
}

/// Receives progress from a running reduction.
pub trait ReductionObserver {
    /// A statistic evaluation inside epoch `t`.
    fn checkpoint(
        &mut self,
        _t: usize,
        _sigma_t: Option<f64>,
        _lambda_t: Option<f64>,
        _cp: &Checkpoint<'_>,
    ) {
    }

    /// A finished epoch and the objective it minimized. Return false to stop the reduction.
    fn epoch(&mut self, _record: &EpochRecord, _objective: &CompositeObjective) -> bool {
        true
    }

    /// Data passes still available; each oracle call is capped by this.
    fn remaining_passes(&self) -> f64 {
        f64::INFINITY
    }
}

/// Observer that records nothing.
pub struct NoObserver;

impl ReductionObserver for NoObserver {}

struct EpochMonitor<'a> {
    t: usize,
    sigma: Option<f64>,
    lambda: Option<f64>,
    inner: &'a mut dyn ReductionObserver,
}

impl Monitor for EpochMonitor<'_> {
    fn checkpoint(&mut self, cp: &Checkpoint<'_>) {
        self.inner.checkpoint(self.t, self.sigma, self.lambda, cp);
    }
}

type Build<'a> = dyn Fn(usize) -> Result<(CompositeObjective, Option<f64>, Option<f64>)> + 'a;

/// Shared epoch loop. `build(t)` yields the epoch objective and its `(σ_t, λ_t)`.
#[allow(clippy::too_many_arguments)]
fn run_epochs(
    oracle: &dyn HoodOracle,
    x0: &[f64],
    epochs: usize,
    policy: &TerminationPolicy,
    reference_tol: Option<f64>,
    build: &Build<'_>,
    stop_on_stall: Option<f64>,
    observer: &mut dyn ReductionObserver,
) -> Result<(Vec<f64>, Vec<EpochRecord>)> {
    let mut x = x0.to_vec();
    let mut records = Vec::new();
    let mut last_stat = policy.last_stat;
    for t in 0..epochs {
        let remaining = observer.remaining_passes();
        if remaining <= 0.0 {
            break;
        }
        let (ft, sigma, lambda) = build(t)?;
        let call_policy = policy
            .with_last_stat(last_stat)
            .with_max_passes(policy.max_passes.min(remaining));
        let d_t = match reference_tol {
            Some(tol) => Some(ft.value(&x) - reference_solution(&ft, tol)?.value),
            None => None,
        };
        let mut mon = EpochMonitor {
            t,
            sigma,
            lambda,
            inner: observer,
        };
        let report = oracle.run(&ft, &x, &call_policy, t as u64, &mut mon)?;
        if report.x_out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "{} produced a non-finite iterate in epoch {t}",
                oracle.name()
            )));
        }
        if report.final_stat.is_some() {
            last_stat = report.final_stat;
        }
        let stalled = report.x_out == x;
        x = report.x_out.clone();
        let rec = EpochRecord {
            t,
            sigma_t: sigma,
            lambda_t: lambda,
            x_hat: x.clone(),
            report,
            d_t_estimate: d_t,
        };
        let go_on = observer.epoch(&rec, &ft);
        let stat = rec.report.final_stat;
        records.push(rec);
        if !go_on {
            break;
        }
        if let Some(target) = stop_on_stall {
            let done = stat.is_some_and(|s| s <= target || s < STAT_FLOOR);
            if done || stalled {
                break;
            }
        }
    }
    Ok((x, records))
}

fn require_case(f: &CompositeObjective, want: Case, who: &str) -> Result<()> {
    let got = f.case();
    if got != want {
        return Err(Error::contract(format!(
            "{who} requires a {want} objective, got {got}"
        )));
    }
    Ok(())
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::contract(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// AdaptReg: epoch `t` minimizes `F + (σ_t/2)‖x − x0‖²` from `x̂_t`.
pub fn adapt_reg(
    f: &CompositeObjective,
    oracle: &dyn HoodOracle,
    x0: &[f64],
    params: &ReductionParams,
    policy: &TerminationPolicy,
) -> Result<(Vec<f64>, Vec<EpochRecord>)> {
    adapt_reg_with(f, oracle, x0, params, policy, &mut NoObserver)
}

pub fn adapt_reg_with(
    f: &CompositeObjective,
    oracle: &dyn HoodOracle,
    x0: &[f64],
    params: &ReductionParams,
    policy: &TerminationPolicy,
    observer: &mut dyn ReductionObserver,
) -> Result<(Vec<f64>, Vec<EpochRecord>)> {
    require_case(f, Case::Case2, "adapt_reg")?;
    require_positive("σ0", params.sigma0)?;
    let build = |t: usize| {
        let s = params.sigma_at(t);
        Ok((f.regularize(s, x0)?, Some(s), None))
    };
    run_epochs(
        oracle,
        x0,
        params.epochs,
        policy,
        params.reference_tol,
        &build,
        None,
        observer,
    )
}

/// AdaptSmooth: epoch `t` minimizes `F` with every loss replaced by `f_i^(λ_t)`.
pub fn adapt_smooth(
    f: &CompositeObjective,
    oracle: &dyn HoodOracle,
    x0: &[f64],
    params: &ReductionParams,
    policy: &TerminationPolicy,
) -> Result<(Vec<f64>, Vec<EpochRecord>)> {
    adapt_smooth_with(f, oracle, x0, params, policy, &mut NoObserver)
}

pub fn adapt_smooth_with(
    f: &CompositeObjective,
    oracle: &dyn HoodOracle,
    x0: &[f64],
    params: &ReductionParams,
    policy: &TerminationPolicy,
    observer: &mut dyn ReductionObserver,
) -> Result<(Vec<f64>, Vec<EpochRecord>)> {
    require_case(f, Case::Case3, "adapt_smooth")?;
    require_positive("λ0", params.lambda0)?;
    let build = |t: usize| {
        let l = params.lambda_at(t);
        Ok((f.smooth(l)?, None, Some(l)))
    };
    run_epochs(
        oracle,
        x0,
        params.epochs,
        policy,
        params.reference_tol,
        &build,
        None,
        observer,
    )
}

/// JointAdaptRegSmooth: epoch `t` minimizes the `λ_t`-smoothed losses plus
/// `ψ + (σ_t/2)‖x − x0‖²`.
pub fn joint_adapt(
    f: &CompositeObjective,
    oracle: &dyn HoodOracle,
    x0: &[f64],
    params: &ReductionParams,
    policy: &TerminationPolicy,
) -> Result<(Vec<f64>, Vec<EpochRecord>)> {
    joint_adapt_with(f, oracle, x0, params, policy, &mut NoObserver)
}

pub fn joint_adapt_with(
    f: &CompositeObjective,
    oracle: &dyn HoodOracle,
    x0: &[f64],
    params: &ReductionParams,
    policy: &TerminationPolicy,
    observer: &mut dyn ReductionObserver,
) -> Result<(Vec<f64>, Vec<EpochRecord>)> {
    require_case(f, Case::Case4, "joint_adapt")?;
    require_positive("σ0", params.sigma0)?;
    require_positive("λ0", params.lambda0)?;
    let build = |t: usize| {
        let (s, l) = (params.sigma_at(t), params.lambda_at(t));
        Ok((f.smooth(l)?.regularize(s, x0)?, Some(s), Some(l)))
    };
    run_epochs(
        oracle,
        x0,
        params.epochs,
        policy,
        params.reference_tol,
        &build,
        None,
        observer,
    )
}

/// Settings of a fixed-parameter run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalParams {
    /// Stop once the oracle statistic on the modified objective is at most this.
    pub target: f64,
    /// Upper bound on oracle calls.
    pub max_calls: usize,
}

impl ClassicalParams {
    pub fn new(target: f64) -> Self {
        ClassicalParams {
            target,
            max_calls: 10_000,
        }
    }
}

/// Classical regularization: repeated oracle calls on the fixed `F + (σ/2)‖x − x0‖²`.
pub fn classical_reg(
    f: &CompositeObjective,
    oracle: &dyn HoodOracle,
    x0: &[f64],
    sigma: f64,
    params: ClassicalParams,
    policy: &TerminationPolicy,
    observer: &mut dyn ReductionObserver,
) -> Result<(Vec<f64>, Vec<EpochRecord>)> {
    require_positive("σ", sigma)?;
    let fixed = f.regularize(sigma, x0)?;
    let build = |_| Ok((fixed.clone(), Some(sigma), None));
    run_epochs(
        oracle,
        x0,
        params.max_calls,
        policy,
        None,
        &build,
        Some(params.target),
        observer,
    )
}

/// Classical smoothing: repeated oracle calls on the fixed `λ`-smoothed objective.
pub fn classical_smooth(
    f: &CompositeObjective,
    oracle: &dyn HoodOracle,
    x0: &[f64],
    lambda: f64,
    params: ClassicalParams,
    policy: &TerminationPolicy,
    observer: &mut dyn ReductionObserver,
) -> Result<(Vec<f64>, Vec<EpochRecord>)> {
    require_positive("λ", lambda)?;
    let fixed = f.smooth(lambda)?;
    let build = |_| Ok((fixed.clone(), None, Some(lambda)));
    run_epochs(
        oracle,
        x0,
        params.max_calls,
        policy,
        None,
        &build,
        Some(params.target),
        observer,
    )
}

/// Repeated oracle calls on `F` itself (Case 1 only).
pub fn direct(
    f: &CompositeObjective,
    oracle: &dyn HoodOracle,
    x0: &[f64],
    params: ClassicalParams,
    policy: &TerminationPolicy,
    observer: &mut dyn ReductionObserver,
) -> Result<(Vec<f64>, Vec<EpochRecord>)> {
    require_case(f, Case::Case1, "direct")?;
    let build = |_| Ok((f.clone(), None, None));
    run_epochs(
        oracle,
        x0,
        params.max_calls,
        policy,
        None,
        &build,
        Some(params.target),
        observer,
    )
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::data::Dataset;
    use crate::losses::LossKind;
    use crate::regularizers::Regularizer;
    use crate::solvers::{Apg, ExactOracle, ProxGd};

    fn lasso() -> CompositeObjective {
        let rows = vec![
            vec![1.0, 0.5],
            vec![-0.3, 2.0],
            vec![0.7, -1.1],
            vec![0.2, 0.4],
        ];
        let ds = Dataset::from_dense(&rows, vec![1.0, -0.5, 0.3, 2.0]).unwrap();
        CompositeObjective::new(Arc::new(ds), LossKind::Squared, Regularizer::l1(0.05))
    }

    fn svm() -> CompositeObjective {
        let rows = vec![
            vec![1.0, 0.5],
            vec![-0.3, 2.0],
            vec![0.7, -1.1],
            vec![0.2, 0.4],
        ];
        let ds = Dataset::from_dense(&rows, vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        CompositeObjective::new(Arc::new(ds), LossKind::Hinge, Regularizer::l2(0.1))
    }

    #[test]
    fn defaults() {
        let p = default_params(1.0, 1.0, 1.0, 2f64.powi(-10)).unwrap();
        assert_eq!((p.sigma0, p.lambda0, p.epochs), (1.0, 1.0, 10));
        assert_eq!(default_params(4.0, 1.0, 1.0, 1.0).unwrap().epochs, 2);
        let c = default_params(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.epochs, 1);
        assert!(c.warning.is_some());
        assert!(default_params(0.0, 1.0, 1.0, 1.0).is_err());
        assert_eq!(
            default_params(1.0, 1.0, f64::INFINITY, 0.1)
                .unwrap()
                .lambda0,
            0.0
        );
    }

    #[test]
    fn sigma_schedule_halves() {
        let f = lasso();
        let p = ReductionParams::new(1.0, 0.0, 4);
        let (_, recs) = adapt_reg(&f, &Apg, &[0.0, 0.0], &p, &TerminationPolicy::theory()).unwrap();
        let s: Vec<_> = recs.iter().map(|r| r.sigma_t.unwrap()).collect();
        assert_eq!(s, vec![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn lambda_schedule_halves() {
        let f = svm();
        let p = ReductionParams::new(0.0, 0.4, 3);
        let (_, recs) =
            adapt_smooth(&f, &Apg, &[0.0, 0.0], &p, &TerminationPolicy::theory()).unwrap();
        let l: Vec<_> = recs.iter().map(|r| r.lambda_t.unwrap()).collect();
        assert_eq!(l, vec![0.4, 0.2, 0.1]);
    }

    #[test]
    fn joint_schedule_halves() {
        let mut f = svm();
        f = f.with_regularizer(Regularizer::l1(0.05));
        let p = ReductionParams::new(1.0, 0.4, 3);
        let (_, recs) =
            joint_adapt(&f, &ProxGd, &[0.0, 0.0], &p, &TerminationPolicy::theory()).unwrap();
        let s: Vec<_> = recs
            .iter()
            .map(|r| (r.sigma_t.unwrap(), r.lambda_t.unwrap()))
            .collect();
        assert_eq!(s, vec![(1.0, 0.4), (0.5, 0.2), (0.25, 0.1)]);
    }

    #[test]
    fn case_checks() {
        let p = ReductionParams::new(1.0, 1.0, 2);
        let pol = TerminationPolicy::theory();
        assert!(adapt_reg(&svm(), &Apg, &[0.0, 0.0], &p, &pol).is_err());
        assert!(adapt_smooth(&lasso(), &Apg, &[0.0, 0.0], &p, &pol).is_err());
        assert!(joint_adapt(&lasso(), &Apg, &[0.0, 0.0], &p, &pol).is_err());
        let bad = ReductionParams::new(0.0, 1.0, 2);
        assert!(adapt_reg(&lasso(), &Apg, &[0.0, 0.0], &bad, &pol).is_err());
    }

    #[test]
    fn classical_reg_is_biased() {
        // F = ½x² as one squared sample with label 0; F' adds ½(x − 1)², minimized at 0.5
        let ds = Dataset::from_dense(&[vec![1.0]], vec![0.0]).unwrap();
        let f = CompositeObjective::new(Arc::new(ds), LossKind::Squared, Regularizer::zero());
        let (x, _) = classical_reg(
            &f,
            &ExactOracle::default(),
            &[1.0],
            1.0,
            ClassicalParams::new(1e-12),
            &TerminationPolicy::theory(),
            &mut NoObserver,
        )
        .unwrap();
        assert!((x[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn anytime_prefix_matches_shorter_run() {
        let f = lasso();
        let pol = TerminationPolicy::gap_quarter();
        let (_, long) = adapt_reg(
            &f,
            &Apg,
            &[0.0, 0.0],
            &ReductionParams::new(1.0, 0.0, 6),
            &pol,
        )
        .unwrap();
        let (x3, _) = adapt_reg(
            &f,
            &Apg,
            &[0.0, 0.0],
            &ReductionParams::new(1.0, 0.0, 3),
            &pol,
        )
        .unwrap();
        assert_eq!(long[2].x_hat, x3);
    }

    #[test]
    fn observer_stops_early() {
        struct StopAfter(usize);
        impl ReductionObserver for StopAfter {
            fn epoch(&mut self, r: &EpochRecord, _: &CompositeObjective) -> bool {
                r.t + 1 < self.0
            }
        }
        let f = lasso();
        let (_, recs) = adapt_reg_with(
            &f,
            &Apg,
            &[0.0, 0.0],
            &ReductionParams::new(1.0, 0.0, usize::MAX),
            &TerminationPolicy::theory(),
            &mut StopAfter(5),
        )
        .unwrap();
        assert_eq!(recs.len(), 5);
    }
}
