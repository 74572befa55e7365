use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    require_case1, Checkpoint, HoodOracle, Monitor, OracleReport, PassMeter, StatGate, StopRule,
    TerminationPolicy,
};
use crate::error::{Error, Result};
use crate::objectives::CompositeObjective;

/// `ceil(ln 4 · (n + L/σ))`: iterations of the `(1 − 1/(n + L/σ))^k` dual rate needed for a
/// factor-4 decrease. Not a HOOD certificate.
pub fn sdca_theory_iterations(smoothness: f64, strong_convexity: f64, n: usize) -> usize {
    (4f64.ln() * (n as f64 + smoothness / strong_convexity))
        .ceil()
        .max(1.0) as usize
}

/// Prox-SDCA with exact coordinate maximization (Option I).
pub fn sdca_hood(
    f: &CompositeObjective,
    x0: &[f64],
    policy: &TerminationPolicy,
    seed: u64,
    stream: u64,
    monitor: &mut dyn Monitor,
) -> Result<OracleReport> {
    if f.strong_convexity() <= 0.0 {
        return Err(Error::Unavailable(
            "dual undefined: sdca_hood requires a strongly convex regularizer".into(),
        ));
    }
    require_case1(f, "sdca_hood")?;
    sdca_core(f, x0, None, policy, seed, stream, monitor).map(|(rep, _)| rep)
}

/// SDCA without the Case 1 requirement (nonsmooth losses are fine as long as ψ is strongly
/// convex). Starts from `alpha0` when given, else from the derivatives at `x0`; also returns
/// the final dual point.
pub(crate) fn sdca_core(
    f: &CompositeObjective,
    x0: &[f64],
    alpha0: Option<Vec<f64>>,
    policy: &TerminationPolicy,
    seed: u64,
    stream: u64,
    monitor: &mut dyn Monitor,
) -> Result<(OracleReport, Vec<f64>)> {
    let n = f.n();
    let sigma = f.strong_convexity();
    let theory = sdca_theory_iterations(f.smoothness(), sigma, n);
    let (max_iters, check_every) = match policy.rule {
        StopRule::TheoryBudget => (theory, 0),
        StopRule::FixedIterations(k) => (k, 0),
        StopRule::GapQuarter { check_interval } => (usize::MAX, check_interval.unwrap_or(n / 3)),
        StopRule::GradThird { snapshot_interval } => {
            (usize::MAX, snapshot_interval.unwrap_or(n / 3))
        }
    };
    let check_every = check_every.max(1);
    let practical = policy.rule.is_practical();
    if max_iters == 0 {
        return Ok((
            OracleReport {
                x_out: x0.to_vec(),
                iterations: 0,
                data_passes: 0.0,
                monitor_passes: 0.0,
                final_stat: None,
                budget_used: None,
                hit_pass_limit: false,
            },
            f.derivatives(x0),
        ));
    }

    let data = f.data();
    let reg = f.regularizer();
    let mut gate = StatGate::new(policy);
    let mut meter = PassMeter::new(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let mut alpha = match alpha0 {
        Some(a) => a,
        None => {
            meter.full();
            f.derivatives(x0)
        }
    };
    let mut u = f.dual_direction(&alpha);
    let mut x: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(j, &uj)| reg.conjugate_argmax_coord(uj, j))
        .collect();
    let inv_n = 1.0 / n as f64;
    let q_scale = inv_n / sigma;
    let mut k = 0usize;
    let mut hit_pass_limit = false;

    let mut check = |gate: &mut StatGate,
                     x: &[f64],
                     alpha: &[f64],
                     k: usize,
                     meter: &mut PassMeter|
     -> Result<bool> {
        meter.monitor();
        let stat = f.gap_with_dual(x, alpha)?.max(0.0);
        monitor.checkpoint(&Checkpoint {
            passes: meter.total(),
            iterations: k,
            x,
            stat,
        });
        Ok(gate.observe(stat))
    };

    // the reference statistic is the gap at x0 itself with its derivative dual point
    let stop_now =
        practical && gate.needs_initial() && check(&mut gate, x0, &alpha, 0, &mut meter)?;
    if !stop_now {
        while k < max_iters {
            if meter.total() >= policy.max_passes {
                hit_pass_limit = true;
                break;
            }
            let i = rng.gen_range(0..n);
            let row = data.row(i);
            let r2: f64 = row.values.iter().map(|v| v * v).sum();
            let z = row.dot(&x);
            let beta = f.dual_coordinate_max(i, z, alpha[i], r2 * q_scale);
            meter.stochastic();
            let delta = beta - alpha[i];
            if delta != 0.0 {
                alpha[i] = beta;
                for (&j, &v) in row.indices.iter().zip(row.values) {
                    u[j] -= delta * v * inv_n;
                    x[j] = reg.conjugate_argmax_coord(u[j], j);
                }
            }
            k += 1;
            if practical
                && k.is_multiple_of(check_every)
                && check(&mut gate, &x, &alpha, k, &mut meter)?
            {
                break;
            }
        }
    }
    let x_out = if stop_now { x0.to_vec() } else { x };

    Ok((
        OracleReport {
            x_out,
            iterations: k,
            data_passes: meter.total(),
            monitor_passes: meter.monitor_total(),
            final_stat: gate.last,
            budget_used: matches!(policy.rule, StopRule::TheoryBudget).then_some(theory),
            hit_pass_limit,
        },
        alpha,
    ))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sdca {
    pub seed: u64,
}

impl HoodOracle for Sdca {
    fn name(&self) -> &str {
        "sdca"
    }

    fn run(
        &self,
        f: &CompositeObjective,
        x0: &[f64],
        policy: &TerminationPolicy,
        stream: u64,
        monitor: &mut dyn Monitor,
    ) -> Result<OracleReport> {
        sdca_hood(f, x0, policy, self.seed, stream, monitor)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::data::Dataset;
    use crate::losses::LossKind;
    use crate::regularizers::Regularizer;
    use crate::solvers::Silent;

    #[test]
    fn one_dimensional_ridge_in_one_step() {
        // ½(2x − 3)² + ½x²  →  x* = 6/5
        let ds = Dataset::from_dense(&[vec![2.0]], vec![3.0]).unwrap();
        let f = CompositeObjective::new(Arc::new(ds), LossKind::Squared, Regularizer::l2(1.0));
        let rep = sdca_hood(&f, &[0.0], &TerminationPolicy::fixed(1), 0, 0, &mut Silent).unwrap();
        assert!((rep.x_out[0] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_is_dual_undefined() {
        let ds = Dataset::from_dense(&[vec![1.0]], vec![1.0]).unwrap();
        let f = CompositeObjective::new(Arc::new(ds), LossKind::Squared, Regularizer::l1(0.1));
        let err =
            sdca_hood(&f, &[0.0], &TerminationPolicy::theory(), 0, 0, &mut Silent).unwrap_err();
        assert!(err.to_string().contains("dual undefined"));
    }

    #[test]
    fn deterministic_and_gap_shrinks() {
        let rows = vec![
            vec![1.0, 0.5],
            vec![-0.3, 2.0],
            vec![0.7, -1.1],
            vec![0.2, 0.4],
        ];
        let ds = Dataset::from_dense(&rows, vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let f = CompositeObjective::new(
            Arc::new(ds),
            LossKind::Logistic,
            Regularizer::elastic_net(0.2, 0.05),
        );
        let p = TerminationPolicy::gap_quarter();
        let a = sdca_hood(&f, &[1.0, 1.0], &p, 9, 1, &mut Silent).unwrap();
        let b = sdca_hood(&f, &[1.0, 1.0], &p, 9, 1, &mut Silent).unwrap();
        assert_eq!(a, b);
        let g0 = f.duality_gap(&[1.0, 1.0]).unwrap();
        assert!(a.final_stat.unwrap() < g0 / 4.0);
    }

    #[test]
    fn fixed_zero_returns_input() {
        let ds = Dataset::from_dense(&[vec![1.0, 1.0]], vec![1.0]).unwrap();
        let f = CompositeObjective::new(Arc::new(ds), LossKind::Squared, Regularizer::l2(1.0));
        let rep = sdca_hood(
            &f,
            &[0.4, 0.5],
            &TerminationPolicy::fixed(0),
            0,
            0,
            &mut Silent,
        )
        .unwrap();
        assert_eq!(rep.x_out, vec![0.4, 0.5]);
    }
}
