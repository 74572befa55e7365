//! Separable regularizers `ψ(x) = w‖x‖₁ + (σ/2)‖x‖² + (σ_add/2)‖x − c‖²` with closed-form
//! proximal maps and conjugates.

use std::sync::Arc;

use crate::error::{Error, Result};

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// The `(σ_add/2)‖x − c‖²` term added by the regularization reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct Shift {
    pub weight: f64,
    pub center: Arc<[f64]>,
}

/// Flat sum of at most one ℓ1 term, one origin-centered ℓ2 term and one shifted ℓ2 term.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Regularizer {
    l1: f64,
    l2: f64,
    shift: Option<Shift>,
}

impl Regularizer {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn l1(weight: f64) -> Self {
        Self::elastic_net(0.0, weight)
    }

    pub fn l2(sigma: f64) -> Self {
        Self::elastic_net(sigma, 0.0)
    }

    /// `(σ/2)‖x‖² + w‖x‖₁`
    pub fn elastic_net(sigma: f64, l1_weight: f64) -> Self {
        assert!(
            sigma >= 0.0 && l1_weight >= 0.0,
            "regularizer weights must be nonnegative"
        );
        Regularizer {
            l1: l1_weight,
            l2: sigma,
            shift: None,
        }
    }

    /// Adds `(σ_add/2)‖x − x0‖²`.
    pub fn with_shift(&self, weight: f64, center: &[f64]) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::contract(format!(
                "added weight must be positive, got {weight}"
            )));
        }
        if self.shift.is_some() {
            return Err(Error::contract(
                "regularizer already carries a shifted ℓ2 term",
            ));
        }
        Ok(Regularizer {
            shift: Some(Shift {
                weight,
                center: center.into(),
            }),
            ..self.clone()
        })
    }

    pub fn l1_weight(&self) -> f64 {
        self.l1
    }

    pub fn l2_weight(&self) -> f64 {
        self.l2
    }

    pub fn shift(&self) -> Option<&Shift> {
        self.shift.as_ref()
    }

    /// Total strong-convexity constant (sum of the quadratic weights).
    pub fn strong_convexity(&self) -> f64 {
        self.l2 + self.shift.as_ref().map_or(0.0, |s| s.weight)
    }

    fn check_dim(&self, x: &[f64]) {
        if let Some(s) = &self.shift {
            assert_eq!(s.center.len(), x.len(), "shift center has wrong dimension");
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.check_dim(x);
        let mut l1 = 0.0;
        let mut sq = 0.0;
        for &xi in x {
            l1 += xi.abs();
            sq += xi * xi;
        }
        let mut v = self.l1 * l1 + 0.5 * self.l2 * sq;
        if let Some(s) = &self.shift {
            let d2: f64 = x
                .iter()
                .zip(s.center.iter())
                .map(|(a, c)| (a - c) * (a - c))
                .sum();
            v += 0.5 * s.weight * d2;
        }
        v
    }

    /// Value of the quadratic (ℓ2 and shifted) part only.
    pub fn quadratic_value(&self, x: &[f64]) -> f64 {
        Regularizer {
            l1: 0.0,
            ..self.clone()
        }
        .value(x)
    }

    /// Gradient of the quadratic part: `σ x + σ_add (x − c)`.
    pub fn quadratic_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.check_dim(x);
        let mut g: Vec<f64> = x.iter().map(|&xi| self.l2 * xi).collect();
        if let Some(s) = &self.shift {
            for ((gi, &xi), &ci) in g.iter_mut().zip(x).zip(s.center.iter()) {
                *gi += s.weight * (xi - ci);
            }
        }
        g
    }

    #[inline]
    fn prox_coord(&self, v: f64, step: f64, center: f64) -> f64 {
        let shift_w = self.shift.as_ref().map_or(0.0, |s| s.weight);
        let denom = 1.0 + step * (self.l2 + shift_w);
        soft_threshold(v + step * shift_w * center, step * self.l1) / denom
    }

    /// `argmin_x ½‖x − v‖² + η ψ(x)`
    pub fn prox(&self, v: &[f64], step: f64) -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        self.prox_in_place(&mut out, step)?;
        Ok(out)
    }

    pub fn prox_in_place(&self, v: &mut [f64], step: f64) -> Result<()> {
        if !(step > 0.0) {
            return Err(Error::contract(format!(
                "prox step must be positive, got {step}"
            )));
        }
        self.check_dim(v);
        match &self.shift {
            Some(s) => {
                for (vi, &ci) in v.iter_mut().zip(s.center.iter()) {
                    *vi = self.prox_coord(*vi, step, ci);
                }
            }
            None => {
                for vi in v.iter_mut() {
                    *vi = self.prox_coord(*vi, step, 0.0);
                }
            }
        }
        Ok(())
    }

    /// Single-coordinate conjugate maximizer; requires `σ_tot > 0`.
    #[inline]
    pub(crate) fn conjugate_argmax_coord(&self, u: f64, j: usize) -> f64 {
        let (sw, c) = match &self.shift {
            Some(s) => (s.weight, s.center[j]),
            None => (0.0, 0.0),
        };
        soft_threshold(u + sw * c, self.l1) / (self.l2 + sw)
    }

    /// `ψ*(u) = max_x ⟨u, x⟩ − ψ(x)` together with its maximizer.
    pub fn conjugate(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        if self.strong_convexity() <= 0.0 {
            return Err(Error::unavailable(
                "conjugate unavailable: regularizer is not strongly convex",
            ));
        }
        self.check_dim(u);
        let x: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(j, &uj)| self.conjugate_argmax_coord(uj, j))
            .collect();
        let ux: f64 = u.iter().zip(&x).map(|(a, b)| a * b).sum();
        Ok((ux - self.value(&x), x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn value_examples() {
        assert_eq!(Regularizer::l1(1.0).value(&[1.0, -2.0]), 3.0);
        assert_eq!(Regularizer::l2(2.0).value(&[1.0, 1.0]), 2.0);
        let x = [0.3, -1.2];
        let r = Regularizer::zero().with_shift(2.0, &x).unwrap();
        assert_eq!(r.value(&x), 0.0);
    }

    #[test]
    fn prox_examples() {
        assert_eq!(Regularizer::l1(1.0).prox(&[3.0], 1.0).unwrap(), vec![2.0]);
        assert_eq!(Regularizer::l1(1.0).prox(&[0.5], 1.0).unwrap(), vec![0.0]);
        assert_eq!(Regularizer::l2(1.0).prox(&[2.0], 1.0).unwrap(), vec![1.0]);
        assert!(Regularizer::l1(1.0).prox(&[1.0], 0.0).is_err());
        assert!(Regularizer::l1(1.0).prox(&[1.0], -1.0).is_err());
    }

    #[test]
    fn elastic_net_prox_is_threshold_then_scale() {
        let r = Regularizer::elastic_net(2.0, 1.0);
        let p = r.prox(&[3.0, -0.2, -4.0], 0.5).unwrap();
        let expect = [2.5 / 2.0, 0.0, -3.5 / 2.0];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn conjugate_examples() {
        let (v, x) = Regularizer::l2(1.0).conjugate(&[2.0]).unwrap();
        assert_eq!((v, x), (2.0, vec![2.0]));
        let en = Regularizer::elastic_net(1.0, 1.0);
        let (v, x) = en.conjugate(&[0.5]).unwrap();
        assert_eq!((v, x), (0.0, vec![0.0]));
        let (v, x) = en.conjugate(&[2.0]).unwrap();
        assert_eq!((v, x), (0.5, vec![1.0]));
        assert!(matches!(
            Regularizer::l1(1.0).conjugate(&[0.1]),
            Err(Error::Unavailable(_))
        ));
    }

    #[test]
    fn shift_twice_is_rejected() {
        let r = Regularizer::l1(1.0).with_shift(1.0, &[0.0]).unwrap();
        assert!(r.with_shift(1.0, &[0.0]).is_err());
        assert!(Regularizer::l1(1.0).with_shift(0.0, &[0.0]).is_err());
        assert_eq!(r.strong_convexity(), 1.0);
    }

    fn regularizer(d: usize) -> impl Strategy<Value = Regularizer> {
        (
            0.0f64..3.0,
            0.0f64..3.0,
            proptest::option::of((0.01f64..3.0, proptest::collection::vec(-3.0f64..3.0, d))),
        )
            .prop_map(|(l2, l1, shift)| {
                let base = Regularizer::elastic_net(l2, l1);
                match shift {
                    Some((w, c)) => base.with_shift(w, &c).unwrap(),
                    None => base,
                }
            })
    }

    /// `[lo, hi]` of `∂ψ` at coordinate `j` of `x`.
    fn subdiff_interval(r: &Regularizer, x: &[f64], j: usize) -> (f64, f64) {
        let q = r.quadratic_gradient(x)[j];
        let w = r.l1_weight();
        if x[j] > 0.0 {
            (q + w, q + w)
        } else if x[j] < 0.0 {
            (q - w, q - w)
        } else {
            (q - w, q + w)
        }
    }

    fn grid_conjugate_coord(r: &Regularizer, u: &[f64]) -> f64 {
        // separable: sum of per-coordinate grid maxima over [-10, 10], step 1e-4
        let d = u.len();
        let mut total = 0.0;
        let const_part = r.value(&vec![0.0; d]);
        for j in 0..d {
            let mut best = f64::NEG_INFINITY;
            let mut x = vec![0.0; d];
            for k in 0..=200_000 {
                let t = -10.0 + 1e-4 * k as f64;
                x[j] = t;
                // the coordinate's contribution: u_j t − (ψ(x) − ψ(0 in coordinate j))
                let others = {
                    x[j] = 0.0;
                    let v = r.value(&x);
                    x[j] = t;
                    v
                };
                let val = u[j] * t - (r.value(&x) - others);
                best = best.max(val);
            }
            total += best;
        }
        total - const_part
    }

    proptest! {
        #[test]
        fn prox_satisfies_optimality(
            (r, v) in (1usize..6).prop_flat_map(|d| (regularizer(d), proptest::collection::vec(-5.0f64..5.0, d))),
            step in 0.01f64..5.0,
        ) {
            let x = r.prox(&v, step).unwrap();
            for j in 0..v.len() {
                // 0 ∈ x − v + η ∂ψ(x)  ⇔  (v − x)/η ∈ ∂ψ(x)
                let (lo, hi) = subdiff_interval(&r, &x, j);
                let g = (v[j] - x[j]) / step;
                prop_assert!(g >= lo - 1e-10 && g <= hi + 1e-10, "coord {}: {} not in [{}, {}]", j, g, lo, hi);
            }
        }

        #[test]
        fn prox_is_nonexpansive(
            (r, u, v) in (1usize..6).prop_flat_map(|d| (
                regularizer(d),
                proptest::collection::vec(-5.0f64..5.0, d),
                proptest::collection::vec(-5.0f64..5.0, d),
            )),
            step in 0.01f64..5.0,
        ) {
            let pu = r.prox(&u, step).unwrap();
            let pv = r.prox(&v, step).unwrap();
            let dp: f64 = pu.iter().zip(&pv).map(|(a, b)| (a - b) * (a - b)).sum();
            let d0: f64 = u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
            prop_assert!(dp <= d0 + 1e-12);
        }

        #[test]
        fn moreau_decomposition(
            v in proptest::collection::vec(-5.0f64..5.0, 1..6),
            w in 0.0f64..3.0,
            step in 0.01f64..5.0,
        ) {
            // ℓ1: ψ* is the indicator of the ∞-ball of radius w
            let p = Regularizer::l1(w).prox(&v, step).unwrap();
            for (pj, vj) in p.iter().zip(&v) {
                let dual = (vj / step).clamp(-w, w);
                prop_assert!((pj + step * dual - vj).abs() < 1e-10);
            }
            // ℓ2: ψ*(u) = ‖u‖²/(2σ), prox_{ψ*/η}(y) = y ησ/(1 + ησ)
            let sigma = w + 0.1;
            let p = Regularizer::l2(sigma).prox(&v, step).unwrap();
            for (pj, vj) in p.iter().zip(&v) {
                let y = vj / step;
                let dual = y * step * sigma / (1.0 + step * sigma);
                prop_assert!((pj + step * dual - vj).abs() < 1e-10);
            }
        }

        #[test]
        fn fenchel_young(
            (r, x, u) in (1usize..6).prop_flat_map(|d| (
                regularizer(d),
                proptest::collection::vec(-5.0f64..5.0, d),
                proptest::collection::vec(-5.0f64..5.0, d),
            )),
        ) {
            prop_assume!(r.strong_convexity() > 0.0);
            let (conj, xmax) = r.conjugate(&u).unwrap();
            let ux: f64 = u.iter().zip(&x).map(|(a, b)| a * b).sum();
            prop_assert!(r.value(&x) + conj >= ux - 1e-9);
            let uxm: f64 = u.iter().zip(&xmax).map(|(a, b)| a * b).sum();
            prop_assert!((r.value(&xmax) + conj - uxm).abs() <= 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn conjugate_matches_grid(
            (r, u) in (1usize..4).prop_flat_map(|d| (regularizer(d), proptest::collection::vec(-3.0f64..3.0, d))),
        ) {
            prop_assume!(r.strong_convexity() > 0.05);
            let (conj, x) = r.conjugate(&u).unwrap();
            prop_assume!(x.iter().all(|v| v.abs() < 9.5));
            let grid = grid_conjugate_coord(&r, &u);
            prop_assert!((conj - grid).abs() <= 1e-3, "closed form {} vs grid {}", conj, grid);
        }
    }
}
