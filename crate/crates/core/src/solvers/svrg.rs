use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    evaluate_stat, require_case1, step_smoothness, Checkpoint, HoodOracle, Monitor, OracleReport,
    PassMeter, StatGate, StatKind, StopRule, TerminationPolicy,
};
use crate::error::Result;
use crate::objectives::{norm2, CompositeObjective};

/// Step, epoch length and epoch count of a prox-SVRG run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrgSchedule {
    pub step: f64,
    /// Inner iterations between snapshots.
    pub inner: usize,
    /// Outer epochs (snapshots) allotted by the theory budget.
    pub outer: usize,
    /// Per-epoch expected contraction factor.
    pub rho: f64,
}

/// `ρ = 1/(σ η (1 − 4Lη) m) + 4Lη(m + 1)/((1 − 4Lη) m)`, infinite when `4Lη ≥ 1`.
fn contraction(l: f64, sigma: f64, step: f64, m: usize) -> f64 {
    let c = 1.0 - 4.0 * l * step;
    if c <= 0.0 {
        return f64::INFINITY;
    }
    let m = m as f64;
    1.0 / (sigma * step * c * m) + 4.0 * l * step * (m + 1.0) / (c * m)
}

/// Theory schedule: the prox-SVRG contraction bound at `(η = 1/L, m = 2n)` if it certifies,
/// otherwise `η = 1/(10L)` with the smallest `m ≥ 2n` giving `ρ ≤ 0.9`.
pub fn svrg_theory_schedule(smoothness: f64, strong_convexity: f64, n: usize) -> SvrgSchedule {
    let (l, sigma) = (smoothness, strong_convexity);
    let base = 2 * n.max(1);
    let mut step = 1.0 / l;
    let mut inner = base;
    let mut rho = contraction(l, sigma, step, inner);
    if !(rho < 1.0) {
        step = 0.1 / l;
        let c = 1.0 - 4.0 * l * step;
        let a = 1.0 / (sigma * step * c);
        let b = 4.0 * l * step / c;
        let need = ((a + b) / (0.9 - b)).ceil();
        inner = if need.is_finite() && need > base as f64 {
            need as usize
        } else {
            base
        };
        rho = contraction(l, sigma, step, inner);
    }
    let outer = (4f64.ln() / (1.0 / rho).ln()).ceil().max(1.0) as usize;
    SvrgSchedule {
        step,
        inner,
        outer,
        rho,
    }
}

/// Proximal SVRG with last-iterate snapshots. Practical rules use `η = 1/L`, `m = 2n`.
pub fn svrg_hood(
    f: &CompositeObjective,
    x0: &[f64],
    policy: &TerminationPolicy,
    seed: u64,
    stream: u64,
    monitor: &mut dyn Monitor,
) -> Result<OracleReport> {
    require_case1(f, "svrg_hood")?;
    let n = f.n();
    let d = f.d();
    let l = step_smoothness(f);
    let theory = svrg_theory_schedule(l, f.strong_convexity(), n);
    let (step, inner, max_iters, check_every) = match policy.rule {
        StopRule::TheoryBudget => (theory.step, theory.inner, theory.outer * theory.inner, 0),
        StopRule::FixedIterations(k) => (1.0 / l, 2 * n, k, 0),
        StopRule::GapQuarter { check_interval } => (
            1.0 / l,
            2 * n,
            usize::MAX,
            check_interval.unwrap_or((n / 3).max(1)),
        ),
        StopRule::GradThird { snapshot_interval } => {
            let m = snapshot_interval.unwrap_or(2 * n).max(1);
            (1.0 / l, m, usize::MAX, 0)
        }
    };
    let check_every = check_every.max(1);
    let kind = super::stat_kind(&policy.rule);
    let mut gate = StatGate::new(policy);
    let mut meter = PassMeter::new(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let data = f.data();
    let mut x = x0.to_vec();
    let mut snap_derivs: Vec<f64>;
    let mut snap_grad: Vec<f64>;
    let mut v = vec![0.0; d];
    let mut k = 0usize;
    let mut hit_pass_limit = false;

    let mut check = |gate: &mut StatGate,
                     x: &[f64],
                     k: usize,
                     meter: &mut PassMeter,
                     stat: Option<f64>|
     -> Result<bool> {
        let stat = match stat {
            Some(s) => s,
            None => {
                meter.monitor();
                evaluate_stat(f, x, StatKind::Gap)?
            }
        };
        monitor.checkpoint(&Checkpoint {
            passes: meter.total(),
            iterations: k,
            x,
            stat,
        });
        Ok(gate.observe(stat))
    };

    'outer: loop {
        if k >= max_iters {
            break;
        }
        if meter.total() >= policy.max_passes {
            hit_pass_limit = true;
            break;
        }
        // snapshot
        snap_derivs = f.derivatives(&x);
        snap_grad = f.gradient_from_derivatives(&snap_derivs);
        meter.full();
        match kind {
            Some(StatKind::GradNorm) if k > 0 || gate.needs_initial() => {
                let mut s = snap_grad.clone();
                for (si, qi) in s.iter_mut().zip(f.regularizer().quadratic_gradient(&x)) {
                    *si += qi;
                }
                if check(&mut gate, &x, k, &mut meter, Some(norm2(&s)))? {
                    break;
                }
            }
            Some(StatKind::Gap)
                if k == 0 && gate.needs_initial() && check(&mut gate, &x, k, &mut meter, None)? =>
            {
                break;
            }
            _ => {}
        }
        for _ in 0..inner {
            if k >= max_iters {
                break 'outer;
            }
            if meter.total() >= policy.max_passes {
                hit_pass_limit = true;
                break 'outer;
            }
            let i = rng.gen_range(0..n);
            let row = data.row(i);
            let diff = f.loss_derivative(i, row.dot(&x)) - snap_derivs[i];
            meter.stochastic();
            v.copy_from_slice(&snap_grad);
            row.axpy(diff, &mut v);
            for (xj, vj) in x.iter_mut().zip(&v) {
                *xj -= step * vj;
            }
            f.regularizer().prox_in_place(&mut x, step)?;
            k += 1;
            if kind == Some(StatKind::Gap)
                && k.is_multiple_of(check_every)
                && check(&mut gate, &x, k, &mut meter, None)?
            {
                break 'outer;
            }
        }
    }

    Ok(OracleReport {
        x_out: x,
        iterations: k,
        data_passes: meter.total(),
        monitor_passes: meter.monitor_total(),
        final_stat: gate.last,
        budget_used: matches!(policy.rule, StopRule::TheoryBudget).then_some(theory.outer),
        hit_pass_limit,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Svrg {
    pub seed: u64,
}

impl HoodOracle for Svrg {
    fn name(&self) -> &str {
        "svrg"
    }

    fn run(
        &self,
        f: &CompositeObjective,
        x0: &[f64],
        policy: &TerminationPolicy,
        stream: u64,
        monitor: &mut dyn Monitor,
    ) -> Result<OracleReport> {
        svrg_hood(f, x0, policy, self.seed, stream, monitor)
    }

    fn practical_rule(&self) -> StopRule {
        StopRule::GradThird {
            snapshot_interval: None,
        }
    }
}
