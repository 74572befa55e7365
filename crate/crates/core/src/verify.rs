//! Independent oracles and bound checks.
//!
//! Nothing here calls the closed-form smoothing or the iterative solvers being checked: values
//! come from grid maximization or direct linear algebra.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::ScalarLoss;
use crate::objectives::{dist_sq, Case, CompositeObjective};
use crate::reductions::{
    adapt_reg, adapt_smooth, default_params, joint_adapt, EpochRecord, ReductionParams,
};
use crate::solvers::{reference_solution, ExactOracle, TerminationPolicy};

/// Golden-section refinement of a concave function on `[lo, hi]`.
fn golden_max(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = g(lo).max(g(hi));
    for _ in 0..100 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        let (ga, gb) = (g(a), g(b));
        best = best.max(ga).max(gb);
        if ga < gb {
            lo = a;
        } else {
            hi = b;
        }
    }
    best
}

/// `max_β βz − f*(β) − (λ/2)β²` by grid search over the conjugate domain with step `grid_step`,
/// refined by golden section around the best grid point. An unbounded domain (squared loss) is
/// cut to `|β| ≤ |z| + |b| + 1`, which contains the maximizer.
pub fn brute_force_smoothed(loss: &ScalarLoss, lambda: f64, z: f64, grid_step: f64) -> Result<f64> {
    if !(grid_step > 0.0) {
        return Err(Error::contract(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    let (mut lo, mut hi) = loss.conjugate_domain();
    if lo > hi {
        return Err(Error::contract("empty conjugate domain"));
    }
    let r = z.abs() + loss.label.abs() + 1.0;
    lo = lo.max(-r);
    hi = hi.min(r);
    let g = |beta: f64| beta * z - loss.conjugate(beta) - 0.5 * lambda * beta * beta;
    let steps = ((hi - lo) / grid_step).ceil() as usize;
    let mut best = f64::NEG_INFINITY;
    let mut arg = lo;
    for k in 0..=steps {
        let beta = (lo + k as f64 * grid_step).min(hi);
        let v = g(beta);
        if v > best {
            best = v;
            arg = beta;
        }
    }
    let refined = golden_max(&g, (arg - grid_step).max(lo), (arg + grid_step).min(hi));
    Ok(best.max(refined))
}

/// `sup_z βz − f(z)` over the grid `z ∈ [−half_width, half_width]` with step `step`.
pub fn grid_conjugate(loss: &ScalarLoss, beta: f64, half_width: f64, step: f64) -> f64 {
    let steps = (2.0 * half_width / step).round() as usize;
    (0..=steps)
        .map(|k| {
            let z = -half_width + k as f64 * step;
            beta * z - loss.value(z)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Ridge minimizer from `(AᵀA/n + σI) x = Aᵀb/n`, solved by LU.
pub fn ridge_normal_equations(data: &Arc<Dataset>, sigma: f64) -> Vec<f64> {
    let (n, d) = (data.n(), data.d());
    let mut q = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for i in 0..n {
        let row = data.row(i);
        for (&j, &v) in row.indices.iter().zip(row.values) {
            rhs[j] += v * data.label(i) / n as f64;
            for (&k, &w) in row.indices.iter().zip(row.values) {
                q[(j, k)] += v * w / n as f64;
            }
        }
    }
    for j in 0..d {
        q[(j, j)] += sigma;
    }
    q.lu()
        .solve(&rhs)
        .expect("normal equations are singular")
        .iter()
        .copied()
        .collect()
}

/// Minimizer and minimum of `½xᵀQx − bᵀx` for positive definite `Q` (checked through its
/// smallest eigenvalue), via Cholesky.
pub fn quadratic_reference(q: &[Vec<f64>], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let d = b.len();
    if q.len() != d || q.iter().any(|r| r.len() != d) {
        return Err(Error::contract("Q must be d×d with d = len(b)"));
    }
    let m = DMatrix::from_fn(d, d, |i, j| q[i][j]);
    if (0..d)
        .any(|i| (0..i).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs())))
    {
        return Err(Error::contract("Q is not symmetric"));
    }
    let eig = m.clone().symmetric_eigenvalues();
    let min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_eig > 0.0) {
        return Err(Error::contract(format!(
            "Q is not positive definite (smallest eigenvalue {min_eig:e})"
        )));
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::contract("Cholesky factorization failed"))?;
    let rhs = DVector::from_column_slice(b);
    let x = chol.solve(&rhs);
    let fstar = -0.5 * rhs.dot(&x);
    Ok((x.iter().copied().collect(), fstar))
}

/// Hessian `AᵀA/n + σ_tot I` and linear term `Aᵀb/n` of a squared-loss objective with pure ℓ2
/// regularization, so `F(x) = ½xᵀQx − cᵀx + ‖b‖²/(2n)`.
pub fn squared_loss_quadratic(f: &CompositeObjective) -> Result<(Vec<Vec<f64>>, Vec<f64>, f64)> {
    let reg = f.regularizer();
    if f.loss_kind() != crate::losses::LossKind::Squared
        || f.smoothing().is_some()
        || reg.l1_weight() != 0.0
        || reg.shift().is_some()
    {
        return Err(Error::contract(
            "expected squared loss with a plain ℓ2 regularizer",
        ));
    }
    let data = f.data();
    let (n, d) = (data.n(), data.d());
    let mut q = vec![vec![0.0; d]; d];
    let mut c = vec![0.0; d];
    let mut constant = 0.0;
    for i in 0..n {
        let row = data.row(i);
        let y = data.label(i);
        constant += 0.5 * y * y / n as f64;
        for (&j, &v) in row.indices.iter().zip(row.values) {
            c[j] += v * y / n as f64;
            for (&k, &w) in row.indices.iter().zip(row.values) {
                q[j][k] += v * w / n as f64;
            }
        }
    }
    for (j, row) in q.iter_mut().enumerate() {
        row[j] += reg.l2_weight();
    }
    Ok((q, c, constant))
}

/// The inequalities checked in exact-oracle mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundName {
    /// `F(x̂_T) − F* ≤ Δ/4^T + 4.5σ_TΘ` (AdaptReg).
    AdaptRegGap,
    /// `F(x̂_T) − F* ≤ Δ/4^T + 2.5λ_TG²` (AdaptSmooth).
    AdaptSmoothGap,
    /// `F(x̂_T) − F* ≤ Δ/4^T + 4.5λ_TG² + 4.5σ_TΘ` (Joint).
    JointGap,
    /// Per-epoch `D_t` recursion of whichever reduction matches the instance's case.
    EpochRecursion,
    /// `‖x_{t+1} − x*‖ ≤ ‖x0 − x*‖` (AdaptReg).
    IterateDistance,
    /// `σ_t/2‖x_{t+1} − x*‖² ≤ σ_t/2‖x0 − x*‖² + λ_tG²/2` (Joint).
    JointIterateDistance,
    /// `D_0 ≤ F(x0) − F* + λ0G²/2` (AdaptSmooth).
    SmoothInitialGap,
}

impl BoundName {
    pub fn parse(s: &str) -> Option<BoundName> {
        Some(match s {
            "adapt-reg-gap" => BoundName::AdaptRegGap,
            "adapt-smooth-gap" => BoundName::AdaptSmoothGap,
            "joint-gap" => BoundName::JointGap,
            "epoch-recursion" => BoundName::EpochRecursion,
            "iterate-distance" => BoundName::IterateDistance,
            "joint-iterate-distance" => BoundName::JointIterateDistance,
            "adapt-smooth-initial" => BoundName::SmoothInitialGap,
            _ => return None,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            BoundName::AdaptRegGap => "adapt-reg-gap",
            BoundName::AdaptSmoothGap => "adapt-smooth-gap",
            BoundName::JointGap => "joint-gap",
            BoundName::EpochRecursion => "epoch-recursion",
            BoundName::IterateDistance => "iterate-distance",
            BoundName::JointIterateDistance => "joint-iterate-distance",
            BoundName::SmoothInitialGap => "adapt-smooth-initial",
        }
    }

    fn tolerance(self) -> f64 {
        match self {
            BoundName::IterateDistance => 1e-9,
            _ => BOUND_SLACK,
        }
    }
}

/// Slack allowed in the exact-oracle inequalities.
pub const BOUND_SLACK: f64 = 1e-7;

/// Reference tolerance of the exact oracle.
pub const EXACT_TOL: f64 = 1e-12;

/// Problem plus starting point.
#[derive(Debug, Clone)]
pub struct BoundInstance {
    pub f: CompositeObjective,
    pub x0: Vec<f64>,
}

/// One measured inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub t: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundRow {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub name: BoundName,
    pub rows: Vec<BoundRow>,
    pub tolerance: f64,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.slack() >= -self.tolerance)
    }

    pub fn min_slack(&self) -> f64 {
        self.rows
            .iter()
            .map(BoundRow::slack)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Quantities of the analysis for one instance.
struct Analysis {
    fstar: f64,
    xstar: Vec<f64>,
    delta: f64,
    theta: f64,
    g: f64,
    params: ReductionParams,
}

fn analyze(inst: &BoundInstance, epochs: usize) -> Result<Analysis> {
    let r = reference_solution(&inst.f, EXACT_TOL)?;
    let delta = inst.f.value(&inst.x0) - r.value;
    let theta = dist_sq(&inst.x0, &r.x);
    let g = inst.f.lipschitz();
    let mut params = default_params(delta, theta, if g.is_finite() { g } else { 1.0 }, delta)?;
    params.epochs = epochs;
    params.reference_tol = Some(EXACT_TOL);
    Ok(Analysis {
        fstar: r.value,
        xstar: r.x,
        delta,
        theta,
        g,
        params,
    })
}

fn run_reduction(inst: &BoundInstance, a: &Analysis) -> Result<Vec<EpochRecord>> {
    let oracle = ExactOracle { tol: EXACT_TOL };
    let pol = TerminationPolicy::theory();
    let (_, recs) = match inst.f.case() {
        Case::Case2 => adapt_reg(&inst.f, &oracle, &inst.x0, &a.params, &pol)?,
        Case::Case3 => adapt_smooth(&inst.f, &oracle, &inst.x0, &a.params, &pol)?,
        Case::Case4 => joint_adapt(&inst.f, &oracle, &inst.x0, &a.params, &pol)?,
        Case::Case1 => {
            return Err(Error::contract(
                "bound checks need a Case2, Case3 or Case4 instance",
            ))
        }
    };
    Ok(recs)
}

fn require(inst: &BoundInstance, want: Case, name: BoundName) -> Result<()> {
    let got = inst.f.case();
    if got != want {
        return Err(Error::contract(format!(
            "{} needs a {want} instance, got {got}",
            name.label()
        )));
    }
    Ok(())
}

/// Runs the reduction matching `name` with the exact oracle for `epochs` epochs and measures
/// the inequality at every epoch. `epochs = 0` is a trivial pass.
pub fn verify_bound(name: BoundName, inst: &BoundInstance, epochs: usize) -> Result<BoundReport> {
    let mut report = BoundReport {
        name,
        rows: Vec::new(),
        tolerance: name.tolerance(),
    };
    if epochs == 0 {
        return Ok(report);
    }
    match name {
        BoundName::AdaptRegGap | BoundName::IterateDistance => require(inst, Case::Case2, name)?,
        BoundName::AdaptSmoothGap | BoundName::SmoothInitialGap => {
            require(inst, Case::Case3, name)?
        }
        BoundName::JointGap | BoundName::JointIterateDistance => require(inst, Case::Case4, name)?,
        BoundName::EpochRecursion => {}
    }
    let a = analyze(inst, epochs)?;
    let recs = run_reduction(inst, &a)?;
    let f = &inst.f;
    let g2 = a.g * a.g;
    let p = &a.params;
    let gap = |x: &[f64]| f.value(x) - a.fstar;
    for rec in &recs {
        let t = rec.t;
        let big_t = t + 1;
        let decay = a.delta / 4f64.powi(big_t as i32);
        let row = match name {
            BoundName::AdaptRegGap => BoundRow {
                t: big_t,
                lhs: gap(&rec.x_hat),
                rhs: decay + 4.5 * p.sigma_at(big_t) * a.theta,
            },
            BoundName::AdaptSmoothGap => BoundRow {
                t: big_t,
                lhs: gap(&rec.x_hat),
                rhs: decay + 2.5 * p.lambda_at(big_t) * g2,
            },
            BoundName::JointGap => BoundRow {
                t: big_t,
                lhs: gap(&rec.x_hat),
                rhs: decay + 4.5 * p.lambda_at(big_t) * g2 + 4.5 * p.sigma_at(big_t) * a.theta,
            },
            BoundName::IterateDistance => BoundRow {
                t,
                lhs: dist_sq(&rec.x_hat, &a.xstar).sqrt(),
                rhs: a.theta.sqrt(),
            },
            BoundName::JointIterateDistance => BoundRow {
                t,
                lhs: 0.5 * p.sigma_at(t) * dist_sq(&rec.x_hat, &a.xstar),
                rhs: 0.5 * p.sigma_at(t) * a.theta + 0.5 * p.lambda_at(t) * g2,
            },
            BoundName::SmoothInitialGap => {
                if t > 0 {
                    break;
                }
                BoundRow {
                    t,
                    lhs: rec.d_t_estimate.unwrap_or(f64::NAN),
                    rhs: a.delta + 0.5 * p.lambda0 * g2,
                }
            }
            BoundName::EpochRecursion => {
                if t == 0 {
                    continue;
                }
                let prev = recs[t - 1].d_t_estimate.unwrap_or(f64::NAN);
                let extra = match f.case() {
                    Case::Case2 => 2.0 * p.sigma_at(t) * a.theta,
                    Case::Case3 => 0.5 * p.lambda_at(t - 1) * g2,
                    _ => 2.0 * p.sigma_at(t) * a.theta + 2.0 * p.lambda_at(t) * g2,
                };
                BoundRow {
                    t,
                    lhs: rec.d_t_estimate.unwrap_or(f64::NAN),
                    rhs: prev / 4.0 + extra,
                }
            }
        };
        report.rows.push(row);
    }
    Ok(report)
}
