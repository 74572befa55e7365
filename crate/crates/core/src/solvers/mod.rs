//! Inner solvers for Case 1 objectives satisfying (or approximating) homogeneous objective
//! decrease: each call should shrink `F(x) − F*` by a factor of 4.

mod apg;
mod proxgd;
pub mod reference;
mod sdca;
mod svrg;

pub use apg::{apg_hood, apg_theory_iterations, Apg};
pub use proxgd::{prox_gd_hood, prox_gd_theory_iterations, ProxGd};
pub use reference::{
    reference_cache_hits, reference_minimize, reference_solution, ExactOracle, Reference,
};
pub use sdca::{sdca_hood, sdca_theory_iterations, Sdca};
pub use svrg::{svrg_hood, svrg_theory_schedule, Svrg, SvrgSchedule};

use crate::error::{Error, Result};
use crate::objectives::{Case, CompositeObjective};

/// Numerical floor: a statistic below this always ends the call.
pub const STAT_FLOOR: f64 = 1e-14;

/// How a solver call decides to stop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Run the explicit iteration count derived from `(L, σ, n)`.
    TheoryBudget,
    /// Stop once the duality gap drops below a quarter of the reference statistic. The gap is
    /// evaluated every `check_interval` iterations (default: `n/3` for stochastic solvers,
    /// every iteration for full-gradient solvers).
    GapQuarter {
        check_interval: Option<usize>,
    },
    /// Stop once the gradient norm drops below a third of the reference statistic, checked
    /// every `snapshot_interval` iterations (default: `2n` for SVRG, every iteration otherwise).
    GradThird {
        snapshot_interval: Option<usize>,
    },
    FixedIterations(usize),
}

impl StopRule {
    pub fn is_practical(&self) -> bool {
        matches!(
            self,
            StopRule::GapQuarter { .. } | StopRule::GradThird { .. }
        )
    }

    fn factor(&self) -> f64 {
        match self {
            StopRule::GapQuarter { .. } => 0.25,
            StopRule::GradThird { .. } => 1.0 / 3.0,
            _ => 0.0,
        }
    }
}

/// A stop rule plus the statistic carried over from the previous call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminationPolicy {
    pub rule: StopRule,
    /// Previous epoch's final statistic; `None` on the first epoch.
    pub last_stat: Option<f64>,
    /// Hard cap on data passes for this call.
    pub max_passes: f64,
}

impl TerminationPolicy {
    pub fn new(rule: StopRule) -> Self {
        TerminationPolicy {
            rule,
            last_stat: None,
            max_passes: f64::INFINITY,
        }
    }

    pub fn theory() -> Self {
        Self::new(StopRule::TheoryBudget)
    }

    pub fn fixed(iterations: usize) -> Self {
        Self::new(StopRule::FixedIterations(iterations))
    }

    pub fn gap_quarter() -> Self {
        Self::new(StopRule::GapQuarter {
            check_interval: None,
        })
    }

    pub fn grad_third() -> Self {
        Self::new(StopRule::GradThird {
            snapshot_interval: None,
        })
    }

    pub fn with_last_stat(mut self, last: Option<f64>) -> Self {
        self.last_stat = last;
        self
    }

    pub fn with_max_passes(mut self, passes: f64) -> Self {
        self.max_passes = passes;
        self
    }
}

/// Result of one oracle call.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub x_out: Vec<f64>,
    pub iterations: usize,
    /// Gradient work in units of full passes over the data.
    pub data_passes: f64,
    /// Passes spent evaluating the termination statistic (not counted in `data_passes`).
    pub monitor_passes: f64,
    /// Last recorded statistic (gap or gradient norm), when the rule computes one.
    pub final_stat: Option<f64>,
    /// Iterations allotted by the theory budget, when that rule is active.
    pub budget_used: Option<usize>,
    /// True if the call ended because the pass cap was reached.
    pub hit_pass_limit: bool,
}

/// A statistic evaluation inside a solver call.
#[derive(Debug, Clone, Copy)]
pub struct Checkpoint<'a> {
    /// Passes consumed by this call so far (including the evaluation itself).
    pub passes: f64,
    pub iterations: usize,
    pub x: &'a [f64],
    pub stat: f64,
}

pub trait Monitor {
    fn checkpoint(&mut self, cp: &Checkpoint<'_>);
}

impl<F: FnMut(&Checkpoint<'_>)> Monitor for F {
    fn checkpoint(&mut self, cp: &Checkpoint<'_>) {
        self(cp)
    }
}

/// Monitor that ignores everything.
pub struct Silent;

impl Monitor for Silent {
    fn checkpoint(&mut self, _: &Checkpoint<'_>) {}
}

/// A Case 1 solver usable as the inner algorithm of a reduction.
pub trait HoodOracle: Send + Sync {
    fn name(&self) -> &str;

    /// Runs one call from `x0`. `stream` selects an independent random stream (reductions pass
    /// the epoch index) so repeated calls with equal arguments are reproducible.
    fn run(
        &self,
        f: &CompositeObjective,
        x0: &[f64],
        policy: &TerminationPolicy,
        stream: u64,
        monitor: &mut dyn Monitor,
    ) -> Result<OracleReport>;

    /// The practical stop rule this solver uses by default.
    fn practical_rule(&self) -> StopRule {
        StopRule::GapQuarter {
            check_interval: None,
        }
    }
}

pub(crate) fn require_case1(f: &CompositeObjective, who: &str) -> Result<()> {
    match f.case() {
        Case::Case1 => Ok(()),
        c => Err(Error::contract(format!(
            "{who} requires a Case1 objective, got {c}"
        ))),
    }
}

/// Pass counter: a full gradient costs 1, a stochastic gradient `1/n`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PassMeter {
    inv_n: f64,
    stochastic: u64,
    full: u64,
    monitor: u64,
}

impl PassMeter {
    pub fn new(n: usize) -> Self {
        PassMeter {
            inv_n: 1.0 / n as f64,
            stochastic: 0,
            full: 0,
            monitor: 0,
        }
    }

    pub fn full(&mut self) {
        self.full += 1;
    }

    /// A full pass spent on a termination statistic.
    pub fn monitor(&mut self) {
        self.monitor += 1;
    }

    pub fn monitor_total(&self) -> f64 {
        self.monitor as f64
    }

    pub fn stochastic(&mut self) {
        self.stochastic += 1;
    }

    /// Integer bookkeeping keeps the total exact and order-independent.
    pub fn total(&self) -> f64 {
        self.full as f64 + self.stochastic as f64 * self.inv_n
    }
}

/// Shared logic of the practical rules: keeps the reference statistic and decides when a
/// check ends the call.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StatGate {
    factor: f64,
    reference: Option<f64>,
    pub last: Option<f64>,
}

impl StatGate {
    pub fn new(policy: &TerminationPolicy) -> Self {
        StatGate {
            factor: policy.rule.factor(),
            reference: policy.last_stat,
            last: None,
        }
    }

    /// True when no reference exists yet, i.e. the statistic at `x0` must be recorded first.
    pub fn needs_initial(&self) -> bool {
        self.reference.is_none()
    }

    /// Records a statistic. Returns true if the call should stop.
    pub fn observe(&mut self, stat: f64) -> bool {
        self.last = Some(stat);
        if stat < STAT_FLOOR {
            return true;
        }
        match self.reference {
            None => {
                self.reference = Some(stat);
                false
            }
            Some(r) => stat < self.factor * r,
        }
    }
}

/// Which statistic a practical rule measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StatKind {
    Gap,
    GradNorm,
}

pub(crate) fn stat_kind(rule: &StopRule) -> Option<StatKind> {
    match rule {
        StopRule::GapQuarter { .. } => Some(StatKind::Gap),
        StopRule::GradThird { .. } => Some(StatKind::GradNorm),
        _ => None,
    }
}

/// Statistic at `x` using the derivative dual point (gap) or the smooth-part gradient.
pub(crate) fn evaluate_stat(f: &CompositeObjective, x: &[f64], kind: StatKind) -> Result<f64> {
    match kind {
        StatKind::Gap => Ok(f.duality_gap(x)?.max(0.0)),
        StatKind::GradNorm => Ok(crate::objectives::norm2(&f.smooth_part_gradient(x)?)),
    }
}

/// Effective smoothness used for step sizes; guards the all-zero-data corner.
pub(crate) fn step_smoothness(f: &CompositeObjective) -> f64 {
    let l = f.smoothness();
    if l > 0.0 {
        l
    } else {
        f.strong_convexity().max(1.0)
    }
}
