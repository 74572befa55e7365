//! High-accuracy minimizers used as `x*`/`F*` for traces and bound checks.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use sha2::{Digest, Sha256};

use super::sdca::sdca_core;
use super::{step_smoothness, HoodOracle, Monitor, OracleReport, Silent, TerminationPolicy};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::objectives::{norm2, Case, CompositeObjective};

/// Iteration cap shared by the iterative reference solvers.
pub const MAX_ITERATIONS: usize = 10_000_000;

/// A certified minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x: Vec<f64>,
    pub value: f64,
    /// Optimality certificate at `x` (duality gap or gradient norm; 0 for the LP).
    pub certificate: f64,
}

type Cache = Mutex<HashMap<[u8; 32], Reference>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

static HITS: AtomicUsize = AtomicUsize::new(0);

/// Number of in-memory cache hits so far (process-wide).
pub fn reference_cache_hits() -> usize {
    HITS.load(Ordering::Relaxed)
}

/// Key of `(F, tol)`.
pub fn reference_key(f: &CompositeObjective, tol: f64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(f.digest());
    h.update(tol.to_bits().to_le_bytes());
    h.finalize().into()
}

pub fn reference_minimize(f: &CompositeObjective, tol: f64) -> Result<Vec<f64>> {
    reference_solution(f, tol).map(|r| r.x)
}

/// Minimizes `F` until its certificate is `≤ tol`; results are memoized per `(F, tol)`.
pub fn reference_solution(f: &CompositeObjective, tol: f64) -> Result<Reference> {
    if !(tol > 0.0) {
        return Err(Error::contract(format!(
            "reference tolerance must be positive, got {tol}"
        )));
    }
    let key = reference_key(f, tol);
    if let Some(r) = cache().lock().unwrap().get(&key) {
        HITS.fetch_add(1, Ordering::Relaxed);
        return Ok(r.clone());
    }
    let r = solve(f, tol)?;
    cache().lock().unwrap().insert(key, r.clone());
    Ok(r)
}

fn solve(f: &CompositeObjective, tol: f64) -> Result<Reference> {
    let x0 = vec![0.0; f.d()];
    match f.case() {
        Case::Case1 => accelerated(f, &x0, tol, |x| Ok(f.duality_gap(x)?.max(0.0))),
        Case::Case2 => {
            if f.regularizer().l1_weight() > 0.0 {
                accelerated(f, &x0, tol, |x| Ok(f.l1_dual_gap(x)?.max(0.0)))
            } else {
                accelerated(f, &x0, tol, |x| Ok(norm2(&f.full_gradient(x)?)))
            }
        }
        Case::Case3 => dual_ascent(f, &x0, tol),
        Case::Case4 => hinge_l1_lp(f),
    }
}

/// Certificates below this (relative to `|F|`) are at rounding level and accepted.
fn rounding_floor(value: f64) -> f64 {
    64.0 * f64::EPSILON * (1.0 + value.abs())
}

const CHECK_EVERY: usize = 10;

/// FISTA with gradient-based adaptive restart.
fn accelerated(
    f: &CompositeObjective,
    x0: &[f64],
    tol: f64,
    certify: impl Fn(&[f64]) -> Result<f64>,
) -> Result<Reference> {
    let step = 1.0 / step_smoothness(f);
    let reg = f.regularizer();
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut x_new = vec![0.0; x.len()];
    let mut t = 1.0f64;
    for k in 0..MAX_ITERATIONS {
        if k % CHECK_EVERY == 0 {
            let c = certify(&x)?;
            let value = f.value(&x);
            if !value.is_finite() || !c.is_finite() {
                return Err(Error::ReferenceFailed(format!(
                    "non-finite iterate at iteration {k}"
                )));
            }
            if c <= tol || c <= rounding_floor(value) {
                return Ok(Reference {
                    x,
                    value,
                    certificate: c,
                });
            }
        }
        let g = f.smooth_part_gradient(&y)?;
        // the quadratic part of ψ is handled explicitly so the prox only sees ℓ1
        let l_eff = 1.0 / step + f.strong_convexity();
        let eta = 1.0 / l_eff;
        for j in 0..x.len() {
            x_new[j] = y[j] - eta * g[j];
        }
        soft_threshold_in_place(&mut x_new, eta * reg.l1_weight());
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let restart: f64 = (0..x.len())
            .map(|j| (y[j] - x_new[j]) * (x_new[j] - x[j]))
            .sum();
        if restart > 0.0 {
            t = 1.0;
            y.copy_from_slice(&x_new);
        } else {
            let mom = (t - 1.0) / t_new;
            for j in 0..x.len() {
                y[j] = x_new[j] + mom * (x_new[j] - x[j]);
            }
            t = t_new;
        }
        std::mem::swap(&mut x, &mut x_new);
    }
    Err(Error::ReferenceFailed(format!(
        "certificate above {tol:e} after {MAX_ITERATIONS} iterations"
    )))
}

fn soft_threshold_in_place(v: &mut [f64], thr: f64) {
    if thr > 0.0 {
        for vi in v.iter_mut() {
            *vi = vi.signum() * (vi.abs() - thr).max(0.0);
        }
    }
}

/// Exact-coordinate dual ascent (SDCA) for nonsmooth losses with strongly convex ψ,
/// certified by its primal-dual gap.
fn dual_ascent(f: &CompositeObjective, x0: &[f64], tol: f64) -> Result<Reference> {
    let n = f.n();
    let chunk = 10 * n;
    let mut alpha = f.derivatives(x0);
    let mut x = x0.to_vec();
    let mut done = 0usize;
    let mut stream = 0u64;
    while done < MAX_ITERATIONS {
        let (rep, a) = sdca_core(
            f,
            &x,
            Some(alpha),
            &TerminationPolicy::fixed(chunk),
            0x5eed,
            stream,
            &mut Silent,
        )?;
        alpha = a;
        x = rep.x_out;
        done += chunk;
        stream += 1;
        let gap = f.gap_with_dual(&x, &alpha)?.max(0.0);
        let value = f.value(&x);
        if !value.is_finite() {
            return Err(Error::ReferenceFailed(
                "non-finite dual ascent iterate".into(),
            ));
        }
        if gap <= tol || gap <= rounding_floor(value) {
            return Ok(Reference {
                x,
                value,
                certificate: gap,
            });
        }
    }
    Err(Error::ReferenceFailed(format!(
        "duality gap above {tol:e} after {MAX_ITERATIONS} coordinate steps"
    )))
}

/// Hinge loss with `ψ = w‖x‖₁` as a linear program:
/// `min (1/n) Σ ξ_i + w Σ (p_j + m_j)` s.t. `ξ_i + b_i ⟨a_i, p − m⟩ ≥ 1`, all variables ≥ 0.
fn hinge_l1_lp(f: &CompositeObjective) -> Result<Reference> {
    if f.loss_kind() != LossKind::Hinge || f.smoothing().is_some() {
        return Err(Error::ReferenceFailed(format!(
            "no Case4 reference for {} loss",
            f.loss_kind()
        )));
    }
    let data = f.data();
    let (n, d) = (f.n(), f.d());
    let w = f.regularizer().l1_weight();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let plus: Vec<_> = (0..d)
        .map(|_| lp.add_var(w, (0.0, f64::INFINITY)))
        .collect();
    let minus: Vec<_> = (0..d)
        .map(|_| lp.add_var(w, (0.0, f64::INFINITY)))
        .collect();
    let slack: Vec<_> = (0..n)
        .map(|_| lp.add_var(1.0 / n as f64, (0.0, f64::INFINITY)))
        .collect();
    for (i, &s) in slack.iter().enumerate() {
        let b = data.label(i);
        let row = data.row(i);
        let mut terms = vec![(s, 1.0)];
        for (&j, &v) in row.indices.iter().zip(row.values) {
            terms.push((plus[j], b * v));
            terms.push((minus[j], -b * v));
        }
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, 1.0);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::ReferenceFailed(format!("LP solve failed: {e:?}")))?
        .into_solution()
        .map_err(|_| Error::ReferenceFailed("LP solve interrupted".into()))?;
    let x: Vec<f64> = (0..d)
        .map(|j| sol.var_value(plus[j]) - sol.var_value(minus[j]))
        .collect();
    let value = f.value(&x);
    Ok(Reference {
        x,
        value,
        certificate: (value - sol.objective()).abs(),
    })
}

/// "Perfect" inner solver: every call returns the reference minimizer of the epoch objective.
#[derive(Debug, Clone, Copy)]
pub struct ExactOracle {
    pub tol: f64,
}

impl Default for ExactOracle {
    fn default() -> Self {
        ExactOracle { tol: 1e-12 }
    }
}

impl HoodOracle for ExactOracle {
    fn name(&self) -> &str {
        "exact"
    }

    fn run(
        &self,
        f: &CompositeObjective,
        _x0: &[f64],
        _policy: &TerminationPolicy,
        _stream: u64,
        _monitor: &mut dyn Monitor,
    ) -> Result<OracleReport> {
        let r = reference_solution(f, self.tol)?;
        Ok(OracleReport {
            x_out: r.x,
            iterations: 0,
            data_passes: 0.0,
            monitor_passes: 0.0,
            final_stat: Some(r.certificate),
            budget_used: None,
            hit_pass_limit: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::data::Dataset;
    use crate::regularizers::Regularizer;
    use crate::verify::ridge_normal_equations;

    fn rows() -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            vec![
                vec![1.0, 0.5, 0.0],
                vec![-0.3, 2.0, 1.0],
                vec![0.7, -1.1, 0.2],
                vec![0.2, 0.4, -0.9],
                vec![-1.0, 0.1, 0.3],
            ],
            vec![1.0, -1.0, 1.0, -1.0, 1.0],
        )
    }

    #[test]
    fn tiny_ridge_matches_normal_equations() {
        let (r, _) = rows();
        let ds = Arc::new(Dataset::from_dense(&r, vec![0.3, -1.2, 2.0, 0.1, 0.5]).unwrap());
        let f = CompositeObjective::new(ds.clone(), LossKind::Squared, Regularizer::l2(0.05));
        let x = reference_minimize(&f, 1e-14).unwrap();
        let exact = ridge_normal_equations(&ds, 0.05);
        for (p, q) in x.iter().zip(&exact) {
            assert!((p - q).abs() < 1e-8, "{p} vs {q}");
        }
    }

    #[test]
    fn second_call_hits_cache() {
        let ds = Dataset::from_dense(&[vec![1.0, 2.0]], vec![1.5]).unwrap();
        let f = CompositeObjective::new(Arc::new(ds), LossKind::Squared, Regularizer::l2(0.37));
        let a = reference_solution(&f, 1e-11).unwrap();
        let before = reference_cache_hits();
        let b = reference_solution(&f, 1e-11).unwrap();
        assert!(reference_cache_hits() > before);
        assert_eq!(
            a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn one_dimensional_quadratic() {
        // ½(x − 3)² as one squared-loss sample, ψ = 0 (certified by the gradient norm)
        let ds = Dataset::from_dense(&[vec![1.0]], vec![3.0]).unwrap();
        let f = CompositeObjective::new(Arc::new(ds), LossKind::Squared, Regularizer::zero());
        let x = reference_minimize(&f, 1e-12).unwrap();
        assert!((x[0] - 3.0).abs() <= 1e-6);
    }

    #[test]
    fn lasso_certificate() {
        let (r, _) = rows();
        let ds = Dataset::from_dense(&r, vec![0.3, -1.2, 2.0, 0.1, 0.5]).unwrap();
        let f = CompositeObjective::new(Arc::new(ds), LossKind::Squared, Regularizer::l1(0.1));
        let r = reference_solution(&f, 1e-12).unwrap();
        assert!(f.l1_dual_gap(&r.x).unwrap() <= 1e-12);
    }

    #[test]
    fn svm_and_l1_svm_agree_with_perturbation() {
        let (r, b) = rows();
        let ds = Arc::new(Dataset::from_dense(&r, b).unwrap());
        for reg in [Regularizer::l2(0.1), Regularizer::l1(0.05)] {
            let f = CompositeObjective::new(ds.clone(), LossKind::Hinge, reg);
            let sol = reference_solution(&f, 1e-12).unwrap();
            for j in 0..3 {
                for h in [1e-3, -1e-3] {
                    let mut y = sol.x.clone();
                    y[j] += h;
                    assert!(f.value(&y) >= sol.value - 1e-10);
                }
            }
        }
    }
}
