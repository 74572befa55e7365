use super::{
    evaluate_stat, require_case1, stat_kind, step_smoothness, HoodOracle, Monitor, OracleReport,
    PassMeter, StatGate, StatKind, StopRule, TerminationPolicy,
};
use crate::error::Result;
use crate::objectives::{norm2, CompositeObjective};

/// `ceil(ln 4 · L/σ)`: from `(1 − σ/L)^k ≤ e^{−kσ/L} ≤ 1/4`.
pub fn prox_gd_theory_iterations(smoothness: f64, strong_convexity: f64) -> usize {
    (4f64.ln() * smoothness / strong_convexity).ceil().max(1.0) as usize
}

/// Proximal gradient descent with step `1/L`.
pub fn prox_gd_hood(
    f: &CompositeObjective,
    x0: &[f64],
    policy: &TerminationPolicy,
    monitor: &mut dyn Monitor,
) -> Result<OracleReport> {
    require_case1(f, "prox_gd_hood")?;
    let l = step_smoothness(f);
    let step = 1.0 / l;
    let theory = prox_gd_theory_iterations(l, f.strong_convexity());
    let (max_iters, interval) = match policy.rule {
        StopRule::TheoryBudget => (theory, 0),
        StopRule::FixedIterations(k) => (k, 0),
        StopRule::GapQuarter { check_interval } => (usize::MAX, check_interval.unwrap_or(1)),
        StopRule::GradThird { snapshot_interval } => (usize::MAX, snapshot_interval.unwrap_or(1)),
    };
    let interval = interval.max(1);
    let kind = stat_kind(&policy.rule);
    let mut gate = StatGate::new(policy);
    let mut meter = PassMeter::new(f.n());
    let mut x = x0.to_vec();
    let mut k = 0usize;
    let mut hit_pass_limit = false;

    loop {
        if k >= max_iters {
            break;
        }
        if meter.total() >= policy.max_passes {
            hit_pass_limit = true;
            break;
        }
        let mut grad = None;
        if let Some(kind) = kind {
            let due = if k == 0 {
                gate.needs_initial()
            } else {
                k.is_multiple_of(interval)
            };
            if due {
                let stat = match kind {
                    StatKind::GradNorm => {
                        // the iterate gradient is needed for the step anyway
                        let g = f.full_gradient(&x)?;
                        meter.full();
                        let mut s = g.clone();
                        for (si, qi) in s.iter_mut().zip(f.regularizer().quadratic_gradient(&x)) {
                            *si += qi;
                        }
                        grad = Some(g);
                        norm2(&s)
                    }
                    StatKind::Gap => {
                        meter.monitor();
                        evaluate_stat(f, &x, kind)?
                    }
                };
                monitor.checkpoint(&super::Checkpoint {
                    passes: meter.total(),
                    iterations: k,
                    x: &x,
                    stat,
                });
                if gate.observe(stat) {
                    break;
                }
            }
        }
        let g = match grad {
            Some(g) => g,
            None => {
                meter.full();
                f.full_gradient(&x)?
            }
        };
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= step * gi;
        }
        f.regularizer().prox_in_place(&mut x, step)?;
        k += 1;
    }

    Ok(OracleReport {
        x_out: x,
        iterations: k,
        data_passes: meter.total(),
        monitor_passes: meter.monitor_total(),
        final_stat: gate.last,
        budget_used: matches!(policy.rule, StopRule::TheoryBudget).then_some(theory),
        hit_pass_limit,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ProxGd;

impl HoodOracle for ProxGd {
    fn name(&self) -> &str {
        "proxgd"
    }

    fn run(
        &self,
        f: &CompositeObjective,
        x0: &[f64],
        policy: &TerminationPolicy,
        _stream: u64,
        monitor: &mut dyn Monitor,
    ) -> Result<OracleReport> {
        prox_gd_hood(f, x0, policy, monitor)
    }
}
