//! Composite finite-sum objectives `F(x) = (1/n) Σ f_i(⟨a_i, x⟩) + ψ(x)`.

use std::fmt;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{LossKind, ScalarLoss};
use crate::regularizers::Regularizer;

/// Smoothness × strong-convexity regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// smooth f, strongly convex ψ
    Case1,
    /// smooth f, ψ not strongly convex
    Case2,
    /// nonsmooth f, strongly convex ψ
    Case3,
    /// neither
    Case4,
}

impl Case {
    pub fn classify(smoothness: f64, strong_convexity: f64) -> Case {
        match (smoothness.is_finite(), strong_convexity > 0.0) {
            (true, true) => Case::Case1,
            (true, false) => Case::Case2,
            (false, true) => Case::Case3,
            (false, false) => Case::Case4,
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self {
            Case::Case1 => 1,
            Case::Case2 => 2,
            Case::Case3 => 3,
            Case::Case4 => 4,
        };
        write!(f, "Case{k}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            out[j] += v;
        }
        out
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Immutable composite objective. Cloning is cheap: the dataset is shared.
#[derive(Debug, Clone)]
pub struct CompositeObjective {
    data: Arc<Dataset>,
    loss: LossKind,
    reg: Regularizer,
    smoothing: Option<f64>,
}

impl CompositeObjective {
    pub fn new(data: Arc<Dataset>, loss: LossKind, reg: Regularizer) -> Self {
        if let Some(s) = reg.shift() {
            assert_eq!(s.center.len(), data.d(), "shift center has wrong dimension");
        }
        CompositeObjective {
            data,
            loss,
            reg,
            smoothing: None,
        }
    }

    pub fn data(&self) -> &Arc<Dataset> {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn d(&self) -> usize {
        self.data.d()
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn smoothing(&self) -> Option<f64> {
        self.smoothing
    }

    pub fn loss_at(&self, i: usize) -> ScalarLoss {
        ScalarLoss::new(self.loss, self.data.label(i))
    }

    /// `f_i` (or `f_i^(λ)`) at `z`.
    #[inline]
    pub fn loss_value(&self, i: usize, z: f64) -> f64 {
        let l = self.loss_at(i);
        match self.smoothing {
            Some(lambda) => l.smoothed(lambda).map(|s| s.value(z)).unwrap_or(f64::NAN),
            None => l.value(z),
        }
    }

    /// Derivative of the (possibly smoothed) loss; the fixed subgradient for an unsmoothed hinge.
    #[inline]
    pub fn loss_derivative(&self, i: usize, z: f64) -> f64 {
        let l = self.loss_at(i);
        match self.smoothing {
            Some(lambda) => l.dual_coordinate_max(lambda, z, 0.0, 0.0),
            None => l.subgradient(z),
        }
    }

    /// Conjugate of the (possibly smoothed) loss.
    #[inline]
    pub fn loss_conjugate(&self, i: usize, beta: f64) -> f64 {
        let c = self.loss_at(i).conjugate(beta);
        match self.smoothing {
            Some(lambda) => c + 0.5 * lambda * beta * beta,
            None => c,
        }
    }

    /// Exact SDCA coordinate update for sample `i` (see [`ScalarLoss::dual_coordinate_max`]).
    #[inline]
    pub fn dual_coordinate_max(&self, i: usize, z: f64, alpha: f64, q: f64) -> f64 {
        self.loss_at(i)
            .dual_coordinate_max(self.smoothing.unwrap_or(0.0), z, alpha, q)
    }

    /// Smoothness of the loss part alone (before the ‖a_i‖² factor), maximized over samples.
    fn loss_smoothness(&self, i: usize) -> f64 {
        match self.smoothing {
            Some(lambda) => 1.0 / lambda,
            None => self.loss_at(i).smoothness(),
        }
    }

    /// `L = max_i ‖a_i‖² · L_loss,i`.
    pub fn smoothness(&self) -> f64 {
        let norms = self.data.row_norms();
        (0..self.n()).fold(0.0, |m, i| {
            let r2 = norms[i] * norms[i];
            let li = self.loss_smoothness(i);
            // a zero row contributes nothing even for an infinitely curved loss
            let v = if r2 == 0.0 { 0.0 } else { r2 * li };
            m.max(v)
        })
    }

    pub fn strong_convexity(&self) -> f64 {
        self.reg.strong_convexity()
    }

    /// Largest per-sample Lipschitz constant of the losses.
    pub fn lipschitz(&self) -> f64 {
        (0..self.n()).fold(0.0, |m, i| m.max(self.loss_at(i).lipschitz()))
    }

    pub fn case(&self) -> Case {
        Case::classify(self.smoothness(), self.strong_convexity())
    }

    pub fn has_smooth_losses(&self) -> bool {
        self.smoothing.is_some() || self.loss.is_smooth()
    }

    fn check_x(&self, x: &[f64]) {
        assert_eq!(
            x.len(),
            self.d(),
            "vector length {} != d = {}",
            x.len(),
            self.d()
        );
    }

    /// `(1/n) Σ f_i(⟨a_i, x⟩)`
    pub fn f_value(&self, x: &[f64]) -> f64 {
        self.check_x(x);
        let n = self.n();
        (0..n)
            .map(|i| self.loss_value(i, self.data.row(i).dot(x)))
            .sum::<f64>()
            / n as f64
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.f_value(x) + self.reg.value(x)
    }

    fn require_smooth(&self) -> Result<()> {
        if self.has_smooth_losses() {
            Ok(())
        } else {
            Err(Error::unavailable(
                "gradient unavailable for Case 3/4 f: losses are nonsmooth and no smoothing is set",
            ))
        }
    }

    /// `∇f(x) = (1/n) Σ f_i'(⟨a_i,x⟩) a_i`; ψ is excluded.
    pub fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_smooth()?;
        self.check_x(x);
        Ok(self.gradient_from_derivatives(&self.derivatives(x)))
    }

    /// Per-sample loss derivatives at `x`.
    pub fn derivatives(&self, x: &[f64]) -> Vec<f64> {
        self.check_x(x);
        (0..self.n())
            .map(|i| self.loss_derivative(i, self.data.row(i).dot(x)))
            .collect()
    }

    pub(crate) fn gradient_from_derivatives(&self, derivs: &[f64]) -> Vec<f64> {
        self.data.weighted_mean_rows(derivs)
    }

    /// `f_i'(⟨a_i,x⟩) a_i` (subgradient convention for an unsmoothed hinge).
    pub fn stochastic_gradient(&self, i: usize, x: &[f64]) -> Result<SparseVector> {
        if i >= self.n() {
            return Err(Error::contract(format!(
                "sample index {i} out of range (n = {})",
                self.n()
            )));
        }
        self.check_x(x);
        let row = self.data.row(i);
        let g = self.loss_derivative(i, row.dot(x));
        Ok(SparseVector {
            indices: row.indices.to_vec(),
            values: row.values.iter().map(|v| g * v).collect(),
        })
    }

    /// Gradient of `f` plus the quadratic part of ψ (the ℓ1 part is left to the prox).
    pub fn smooth_part_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.full_gradient(x)?;
        for (gi, qi) in g.iter_mut().zip(self.reg.quadratic_gradient(x)) {
            *gi += qi;
        }
        Ok(g)
    }

    /// `‖∇f(x)‖`
    pub fn grad_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(norm2(&self.full_gradient(x)?))
    }

    /// Adds `(σ/2)‖x − x0‖²` to ψ.
    pub fn regularize(&self, sigma: f64, center: &[f64]) -> Result<Self> {
        self.check_x(center);
        Ok(CompositeObjective {
            reg: self.reg.with_shift(sigma, center)?,
            ..self.clone()
        })
    }

    /// Replaces every `f_i` by `f_i^(λ)`.
    pub fn smooth(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::contract(format!(
                "smoothing λ must be positive, got {lambda}"
            )));
        }
        Ok(CompositeObjective {
            smoothing: Some(lambda),
            ..self.clone()
        })
    }

    /// The objective with ψ replaced (same data, loss, smoothing).
    pub fn with_regularizer(&self, reg: Regularizer) -> Self {
        CompositeObjective {
            reg,
            ..self.clone()
        }
    }

    /// Fenchel dual `D(β) = −(1/n) Σ f_i*(β_i) − ψ*(−(1/n) Σ β_i a_i)`.
    pub fn dual_value(&self, beta: &[f64]) -> Result<f64> {
        let u = self.dual_direction(beta);
        let (conj, _) = self.reg.conjugate(&u)?;
        let n = self.n() as f64;
        let lc: f64 = beta
            .iter()
            .enumerate()
            .map(|(i, &b)| self.loss_conjugate(i, b))
            .sum();
        Ok(-lc / n - conj)
    }

    /// `u(β) = −(1/n) Σ β_i a_i`
    pub fn dual_direction(&self, beta: &[f64]) -> Vec<f64> {
        let mut u = self.data.weighted_mean_rows(beta);
        u.iter_mut().for_each(|v| *v = -*v);
        u
    }

    /// `P(x) − D(β)` accumulated as a sum of Fenchel–Young residuals (each ≥ 0).
    pub fn gap_with_dual(&self, x: &[f64], beta: &[f64]) -> Result<f64> {
        self.check_x(x);
        if self.strong_convexity() <= 0.0 {
            return Err(Error::unavailable(
                "gap unavailable: regularizer is not strongly convex",
            ));
        }
        let n = self.n();
        let mut loss_part = 0.0;
        for (i, &b) in beta.iter().enumerate() {
            let z = self.data.row(i).dot(x);
            loss_part += self.loss_value(i, z) + self.loss_conjugate(i, b) - b * z;
        }
        let u = self.dual_direction(beta);
        let (conj, _) = self.reg.conjugate(&u)?;
        let reg_part = self.reg.value(x) + conj - dot(&u, x);
        Ok(loss_part / n as f64 + reg_part)
    }

    /// Duality gap at `x` with the dual point `β_i = f_i'(⟨a_i, x⟩)`.
    pub fn duality_gap(&self, x: &[f64]) -> Result<f64> {
        if self.strong_convexity() <= 0.0 {
            return Err(Error::unavailable(
                "gap unavailable: regularizer is not strongly convex",
            ));
        }
        let beta = self.derivatives(x);
        self.gap_with_dual(x, &beta)
    }

    /// Gap certificate for ψ = w‖x‖₁ (no quadratic part): the derivative dual point is
    /// scaled into `{‖u‖∞ ≤ w}` so that `ψ*(u) = 0`.
    pub fn l1_dual_gap(&self, x: &[f64]) -> Result<f64> {
        if self.strong_convexity() > 0.0 {
            return Err(Error::contract(
                "l1_dual_gap requires a regularizer without ℓ2 terms",
            ));
        }
        let beta = self.derivatives(x);
        let u = self.dual_direction(&beta);
        let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let w = self.reg.l1_weight();
        let scale = if umax <= w { 1.0 } else { w / umax };
        let n = self.n() as f64;
        let dual: f64 = -beta
            .iter()
            .enumerate()
            .map(|(i, &b)| self.loss_conjugate(i, scale * b))
            .sum::<f64>()
            / n;
        Ok(self.value(x) - dual)
    }

    /// Content hash of everything that determines the objective.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.data.content_digest());
        h.update(self.loss.to_string().as_bytes());
        h.update(self.reg.l1_weight().to_bits().to_le_bytes());
        h.update(self.reg.l2_weight().to_bits().to_le_bytes());
        if let Some(s) = self.reg.shift() {
            h.update(s.weight.to_bits().to_le_bytes());
            for c in s.center.iter() {
                h.update(c.to_bits().to_le_bytes());
            }
        }
        h.update(self.smoothing.unwrap_or(0.0).to_bits().to_le_bytes());
        h.finalize().into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::{brute_force_smoothed, ridge_normal_equations};

    fn single(a: Vec<f64>, b: f64, loss: LossKind, reg: Regularizer) -> CompositeObjective {
        let ds = Dataset::from_dense(&[a], vec![b]).unwrap();
        CompositeObjective::new(Arc::new(ds), loss, reg)
    }

    fn tiny_ridge() -> CompositeObjective {
        let ds = Dataset::from_dense(
            &[vec![1.0, 2.0], vec![-0.5, 1.0], vec![2.0, -1.0]],
            vec![1.0, 0.5, -2.0],
        )
        .unwrap();
        CompositeObjective::new(Arc::new(ds), LossKind::Squared, Regularizer::l2(0.3))
    }

    fn random_instance(seed: u64, loss: LossKind, n: usize, d: usize) -> CompositeObjective {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels = (0..n)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let ds = Dataset::from_dense(&rows, labels).unwrap();
        CompositeObjective::new(Arc::new(ds), loss, Regularizer::elastic_net(0.1, 0.05))
    }

    #[test]
    fn full_value_examples() {
        let f = single(vec![1.0], 0.0, LossKind::Squared, Regularizer::zero());
        assert_eq!(f.value(&[2.0]), 2.0);
        let f = single(vec![1.0], 1.0, LossKind::Hinge, Regularizer::l2(2.0));
        assert_eq!(f.value(&[0.0]), 1.0);
        let fs = f.smooth(1.0).unwrap();
        assert_eq!(fs.value(&[0.0]), 0.5);
        let oracle = brute_force_smoothed(&ScalarLoss::hinge(1.0), 1.0, 0.0, 1e-5).unwrap();
        assert!((fs.value(&[0.0]) - oracle).abs() < 1e-5);
    }

    #[test]
    fn gradient_examples() {
        let f = single(vec![1.0, 0.0], 0.0, LossKind::Squared, Regularizer::zero());
        assert_eq!(f.full_gradient(&[3.0, 7.0]).unwrap(), vec![3.0, 0.0]);

        let zero = Dataset::from_rows(vec![vec![], vec![]], vec![1.0, 2.0], 3).unwrap();
        let f = CompositeObjective::new(Arc::new(zero), LossKind::Squared, Regularizer::zero());
        assert_eq!(f.full_gradient(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(f.grad_norm(&[0.0; 3]).unwrap(), 0.0);

        let svm = single(vec![1.0], 1.0, LossKind::Hinge, Regularizer::l2(1.0));
        assert!(matches!(
            svm.full_gradient(&[0.0]),
            Err(Error::Unavailable(_))
        ));
    }

    #[test]
    fn stochastic_gradient_examples() {
        let f = single(vec![1.0], 1.0, LossKind::Hinge, Regularizer::zero());
        let g = f.stochastic_gradient(0, &[2.0]).unwrap();
        assert_eq!(g.values, vec![0.0]);
        let g = f.stochastic_gradient(0, &[0.0]).unwrap();
        assert_eq!(g.to_dense(1), vec![-1.0]);
        assert!(f.stochastic_gradient(1, &[0.0]).is_err());

        let f = random_instance(3, LossKind::Logistic, 17, 5);
        let x: Vec<f64> = (0..5).map(|j| 0.3 * j as f64 - 0.5).collect();
        let mut avg = [0.0; 5];
        for i in 0..f.n() {
            let g = f.stochastic_gradient(i, &x).unwrap().to_dense(5);
            for (a, gi) in avg.iter_mut().zip(g) {
                *a += gi / f.n() as f64;
            }
        }
        let full = f.full_gradient(&x).unwrap();
        for (a, b) in avg.iter().zip(&full) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn full_gradient_matches_finite_differences() {
        let h = 1e-6;
        for (k, loss) in [LossKind::Squared, LossKind::Logistic, LossKind::Hinge]
            .into_iter()
            .enumerate()
        {
            let base = random_instance(10 + k as u64, loss, 30, 6);
            let f = if loss == LossKind::Hinge {
                base.smooth(0.3).unwrap()
            } else {
                base
            };
            for t in 0..10 {
                let x: Vec<f64> = (0..6)
                    .map(|j| ((t * 7 + j * 3) % 11) as f64 / 5.0 - 1.0)
                    .collect();
                let g = f.full_gradient(&x).unwrap();
                for j in 0..6 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += h;
                    xm[j] -= h;
                    let fd = (f.f_value(&xp) - f.f_value(&xm)) / (2.0 * h);
                    assert!(
                        (fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-3),
                        "{loss}: coord {j} fd {fd} vs {}",
                        g[j]
                    );
                }
            }
        }
    }

    #[test]
    fn regularize_examples() {
        let lasso =
            random_instance(1, LossKind::Squared, 10, 3).with_regularizer(Regularizer::l1(0.1));
        assert_eq!(lasso.case(), Case::Case2);
        let x0 = vec![0.2, -0.1, 0.4];
        let reg = lasso.regularize(1.0, &x0).unwrap();
        assert_eq!(reg.case(), Case::Case1);
        assert_eq!(reg.value(&x0), lasso.value(&x0));
        assert!(lasso.regularize(0.0, &x0).is_err());

        // ½(x−2)² + ½(x−x0)² with x0 = 1 has minimizer 1.5; prox-gradient fixed point agrees
        let f = single(vec![1.0], 2.0, LossKind::Squared, Regularizer::zero())
            .regularize(1.0, &[1.0])
            .unwrap();
        let mut x = vec![0.0];
        for _ in 0..200 {
            let g = f.full_gradient(&x).unwrap();
            let v = vec![x[0] - g[0]];
            x = f.regularizer().prox(&v, 1.0).unwrap();
        }
        assert!((x[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn smooth_examples() {
        let svm = random_instance(2, LossKind::Hinge, 12, 4).with_regularizer(Regularizer::l2(0.5));
        assert_eq!(svm.case(), Case::Case3);
        let s = svm.smooth(0.1).unwrap();
        assert_eq!(s.case(), Case::Case1);
        let expect = svm.data().max_row_norm_sq() * 10.0;
        assert!((s.smoothness() - expect).abs() <= 1e-12 * expect);
        let g = svm.lipschitz();
        for t in 0..50 {
            let x: Vec<f64> = (0..4)
                .map(|j| ((t + 3 * j) % 13) as f64 / 3.0 - 2.0)
                .collect();
            let (orig, sm) = (svm.value(&x), s.value(&x));
            assert!(sm <= orig + 1e-12);
            assert!(orig - sm <= 0.1 * g * g / 2.0 + 1e-12);
        }
        assert!(svm.smooth(0.0).is_err());
    }

    #[test]
    fn classify_examples() {
        let base = random_instance(4, LossKind::Squared, 5, 2);
        assert_eq!(
            base.with_regularizer(Regularizer::l2(1.0)).case(),
            Case::Case1
        );
        assert_eq!(
            base.with_regularizer(Regularizer::l1(1.0)).case(),
            Case::Case2
        );
        let l1svm =
            random_instance(4, LossKind::Hinge, 5, 2).with_regularizer(Regularizer::l1(1.0));
        assert_eq!(l1svm.case(), Case::Case4);
        let both = l1svm
            .smooth(0.5)
            .unwrap()
            .regularize(0.5, &[0.0, 0.0])
            .unwrap();
        assert_eq!(both.case(), Case::Case1);
    }

    #[test]
    fn regularized_value_dominates() {
        let f =
            random_instance(5, LossKind::Logistic, 20, 3).with_regularizer(Regularizer::l1(0.1));
        let x0 = vec![0.5, 0.0, -0.5];
        let fr = f.regularize(0.7, &x0).unwrap();
        for t in 0..30 {
            let x: Vec<f64> = (0..3)
                .map(|j| ((t * 5 + j) % 7) as f64 / 2.0 - 1.5)
                .collect();
            if x == x0 {
                continue;
            }
            assert!(fr.value(&x) > f.value(&x));
        }
    }

    #[test]
    fn duality_gap_on_tiny_ridge() {
        let f = tiny_ridge();
        let xstar = ridge_normal_equations(f.data(), 0.3);
        assert!(f.duality_gap(&xstar).unwrap() <= 1e-8);
        let x0 = vec![0.0, 0.0];
        let gap0 = f.duality_gap(&x0).unwrap();
        assert!(gap0 >= f.value(&x0) - f.value(&xstar) - 1e-10);
        for t in 0..40 {
            let x = vec![(t as f64 * 0.37).sin() * 3.0, (t as f64 * 0.91).cos() * 2.0];
            let gap = f.duality_gap(&x).unwrap();
            assert!(gap >= -1e-10);
            assert!(gap >= f.value(&x) - f.value(&xstar) - 1e-8);
        }
        let lasso = f.with_regularizer(Regularizer::l1(0.1));
        assert!(matches!(lasso.duality_gap(&x0), Err(Error::Unavailable(_))));
    }

    #[test]
    fn grad_norm_vanishes_at_least_squares_solution() {
        let f = tiny_ridge().with_regularizer(Regularizer::zero());
        let xstar = ridge_normal_equations(f.data(), 0.0);
        assert!(f.grad_norm(&xstar).unwrap() <= 1e-8);
        // continuity along a ray
        let mut prev = f.grad_norm(&[0.0, 0.0]).unwrap();
        for k in 1..=100 {
            let t = k as f64 / 100.0;
            let g = f.grad_norm(&[t * xstar[0], t * xstar[1]]).unwrap();
            assert!((g - prev).abs() < 0.1);
            prev = g;
        }
    }

    #[test]
    fn digest_distinguishes_transforms() {
        let f = tiny_ridge();
        assert_eq!(f.digest(), tiny_ridge().digest());
        assert_ne!(f.digest(), f.smooth(0.1).unwrap().digest());
        assert_ne!(f.digest(), f.regularize(0.1, &[0.0, 0.0]).unwrap().digest());
    }
}
