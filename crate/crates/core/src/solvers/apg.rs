use super::{
    evaluate_stat, require_case1, stat_kind, step_smoothness, Checkpoint, HoodOracle, Monitor,
    OracleReport, PassMeter, StatGate, StopRule, TerminationPolicy,
};
use crate::error::Result;
use crate::objectives::CompositeObjective;

/// `q = σ/(L+σ)`: the inverse condition number once the quadratic part of ψ is counted in the
/// smooth part (`L + σ`-smooth, `σ`-strongly convex).
fn inverse_condition(smoothness: f64, strong_convexity: f64) -> f64 {
    strong_convexity / (smoothness + strong_convexity)
}

/// `ceil(ln 8 / √q)`: the constant-momentum rate `F(x_k) − F* ≤ (1 − √q)^k · 2(F(x0) − F*)`
/// is at most a quarter of the initial gap after that many steps.
pub fn apg_theory_iterations(smoothness: f64, strong_convexity: f64) -> usize {
    let q = inverse_condition(smoothness, strong_convexity);
    (8f64.ln() / q.sqrt()).ceil().max(1.0) as usize
}

/// Accelerated proximal gradient for strongly convex composites, fixed momentum
/// `(1 − √q)/(1 + √q)`.
pub fn apg_hood(
    f: &CompositeObjective,
    x0: &[f64],
    policy: &TerminationPolicy,
    monitor: &mut dyn Monitor,
) -> Result<OracleReport> {
    require_case1(f, "apg_hood")?;
    let l = step_smoothness(f);
    let sigma = f.strong_convexity();
    let step = 1.0 / l;
    let q = inverse_condition(l, sigma);
    let momentum = (1.0 - q.sqrt()) / (1.0 + q.sqrt());
    let theory = apg_theory_iterations(l, sigma);
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
    let d = f.d();
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut x_next = vec![0.0; d];
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
        if let Some(kind) = kind {
            let due = if k == 0 {
                gate.needs_initial()
            } else {
                k.is_multiple_of(interval)
            };
            if due {
                meter.monitor();
                let stat = evaluate_stat(f, &x, kind)?;
                monitor.checkpoint(&Checkpoint {
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
        let g = f.full_gradient(&y)?;
        meter.full();
        for j in 0..d {
            x_next[j] = y[j] - step * g[j];
        }
        f.regularizer().prox_in_place(&mut x_next, step)?;
        for j in 0..d {
            y[j] = x_next[j] + momentum * (x_next[j] - x[j]);
        }
        std::mem::swap(&mut x, &mut x_next);
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
pub struct Apg;

impl HoodOracle for Apg {
    fn name(&self) -> &str {
        "apg"
    }

    fn run(
        &self,
        f: &CompositeObjective,
        x0: &[f64],
        policy: &TerminationPolicy,
        _stream: u64,
        monitor: &mut dyn Monitor,
    ) -> Result<OracleReport> {
        apg_hood(f, x0, policy, monitor)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::data::Dataset;
    use crate::losses::LossKind;
    use crate::regularizers::Regularizer;
    use crate::solvers::{prox_gd_theory_iterations, Silent};

    #[test]
    fn budget_constants() {
        // L/σ = 10⁴ → ≈ 208 iterations
        assert_eq!(apg_theory_iterations(1e4, 1.0), 208);
        assert_eq!(apg_theory_iterations(1.0, 1.0), 3);
        assert_eq!(prox_gd_theory_iterations(1.0, 1.0), 2);
    }

    #[test]
    fn equal_constants_quadratic_is_hood() {
        let ds = Dataset::from_dense(&[vec![1.0]], vec![3.0]).unwrap();
        let f = CompositeObjective::new(Arc::new(ds), LossKind::Squared, Regularizer::zero())
            .regularize(1.0, &[3.0])
            .unwrap();
        let rep = apg_hood(&f, &[0.0], &TerminationPolicy::theory(), &mut Silent).unwrap();
        assert!(f.value(&rep.x_out) <= f.value(&[0.0]) / 4.0);
    }

    #[test]
    fn fixed_zero_returns_input() {
        let ds = Dataset::from_dense(&[vec![1.0, 2.0]], vec![3.0]).unwrap();
        let f = CompositeObjective::new(Arc::new(ds), LossKind::Squared, Regularizer::l2(1.0));
        let rep = apg_hood(&f, &[0.5, 0.1], &TerminationPolicy::fixed(0), &mut Silent).unwrap();
        assert_eq!(rep.x_out, vec![0.5, 0.1]);
    }
}
