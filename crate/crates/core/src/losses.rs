//! One-dimensional losses `f(z)` with labels, their Fenchel conjugates, and the
//! conjugate-smoothed variants `f^(λ)(z) = max_β { βz − f*(β) − (λ/2)β² }`.
//!
//! Hinge and logistic are handled in the canonical variable `y = b·z`: with
//! `g(y) = f(y/b)` one has `f*(β) = g*(β/b)` and `f^(λ)(z) = g^(λb²)(bz)`, so every
//! label is supported without special cases beyond `b = 0` (constant loss).

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `(z − b)²/2`
    Squared,
    /// `log(1 + exp(−b z))`
    Logistic,
    /// `max{0, 1 − b z}`
    Hinge,
}

impl LossKind {
    /// Whether the unsmoothed loss has a finite smoothness constant.
    pub fn is_smooth(self) -> bool {
        !matches!(self, LossKind::Hinge)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Squared => "squared",
            LossKind::Logistic => "logistic",
            LossKind::Hinge => "hinge",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarLoss {
    pub kind: LossKind,
    pub label: f64,
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `1/(1+e^{t})`, computed without overflow.
fn logistic_p(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// Root of `t = c + μ/(1 + e^t)` (unique since the map is decreasing in t; root in `[c, c+μ]`).
/// Safeguarded Newton with a bisection fallback.
fn logistic_dual_root(c: f64, mu: f64) -> f64 {
    if mu == 0.0 {
        return c;
    }
    let phi = |t: f64| t - c - mu * logistic_p(t);
    let (mut lo, mut hi) = (c, c + mu);
    let mut t = c + mu * logistic_p(c + 0.5 * mu);
    for _ in 0..200 {
        let p = logistic_p(t);
        let val = t - c - mu * p;
        if val > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        if val == 0.0 {
            return t;
        }
        let deriv = 1.0 + mu * p * (1.0 - p);
        let mut next = t - val / deriv;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * (1.0 + t.abs()) || hi - lo <= 1e-15 * (1.0 + t.abs()) {
            t = next;
            break;
        }
        t = next;
    }
    debug_assert!(phi(t).abs() < 1e-9 * (1.0 + mu));
    t
}

/// `g*(γ)` for `g(y) = log(1 + e^{−y})`, parameterized by `t` with `γ = −1/(1+e^t)`.
fn logistic_conjugate_at_t(t: f64) -> f64 {
    let p = logistic_p(t);
    // ln p = −softplus(t), ln(1−p) = −softplus(−t)
    -(p * softplus(t) + (1.0 - p) * softplus(-t))
}

fn logistic_conjugate_gamma(gamma: f64) -> f64 {
    if !(-1.0..=0.0).contains(&gamma) {
        return f64::INFINITY;
    }
    let xlogx = |v: f64| if v == 0.0 { 0.0 } else { v * v.ln() };
    xlogx(-gamma) + xlogx(1.0 + gamma)
}

impl ScalarLoss {
    pub fn new(kind: LossKind, label: f64) -> Self {
        ScalarLoss { kind, label }
    }

    pub fn squared(label: f64) -> Self {
        Self::new(LossKind::Squared, label)
    }

    pub fn logistic(label: f64) -> Self {
        Self::new(LossKind::Logistic, label)
    }

    pub fn hinge(label: f64) -> Self {
        Self::new(LossKind::Hinge, label)
    }

    fn constant_value(&self) -> f64 {
        match self.kind {
            LossKind::Hinge => 1.0,
            LossKind::Logistic => std::f64::consts::LN_2,
            LossKind::Squared => unreachable!(),
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        let b = self.label;
        match self.kind {
            LossKind::Squared => 0.5 * (z - b) * (z - b),
            LossKind::Logistic => softplus(-b * z),
            LossKind::Hinge => (1.0 - b * z).max(0.0),
        }
    }

    /// An element of `∂f(z)`; at the hinge kink this is `−b`.
    pub fn subgradient(&self, z: f64) -> f64 {
        let b = self.label;
        match self.kind {
            LossKind::Squared => z - b,
            LossKind::Logistic => -b * logistic_p(b * z),
            LossKind::Hinge => {
                if 1.0 - b * z >= 0.0 {
                    -b
                } else {
                    0.0
                }
            }
        }
    }

    /// Closed interval on which `f*` is finite.
    pub fn conjugate_domain(&self) -> (f64, f64) {
        let b = self.label;
        match self.kind {
            LossKind::Squared => (f64::NEG_INFINITY, f64::INFINITY),
            LossKind::Logistic | LossKind::Hinge => {
                if b >= 0.0 {
                    (-b, 0.0)
                } else {
                    (0.0, -b)
                }
            }
        }
    }

    /// `f*(β)`, `+∞` outside the domain.
    pub fn conjugate(&self, beta: f64) -> f64 {
        let b = self.label;
        match self.kind {
            LossKind::Squared => 0.5 * beta * beta + b * beta,
            LossKind::Logistic | LossKind::Hinge if b == 0.0 => {
                if beta == 0.0 {
                    -self.constant_value()
                } else {
                    f64::INFINITY
                }
            }
            LossKind::Logistic => logistic_conjugate_gamma(beta / b),
            LossKind::Hinge => {
                let gamma = beta / b;
                if (-1.0..=0.0).contains(&gamma) {
                    gamma
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Lipschitz constant `G` (`+∞` for squared loss).
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            LossKind::Squared => f64::INFINITY,
            LossKind::Logistic | LossKind::Hinge => self.label.abs(),
        }
    }

    /// Smoothness constant of the unsmoothed loss (`+∞` for hinge).
    pub fn smoothness(&self) -> f64 {
        match self.kind {
            LossKind::Squared => 1.0,
            LossKind::Logistic => self.label * self.label / 4.0,
            LossKind::Hinge => f64::INFINITY,
        }
    }

    pub fn smoothed(self, lambda: f64) -> Result<SmoothedLoss> {
        SmoothedLoss::new(self, lambda)
    }

    /// Exact maximizer over `β` of
    /// `−f*(β) − (λ/2)β² + βz − (q/2)(β − α)²` with `λ ≥ 0`, `q ≥ 0`.
    ///
    /// This is the dual coordinate update of prox-SDCA (with `q = ‖a_i‖²/(σn)`), and with
    /// `q = 0, λ > 0` it is the smoothed-loss gradient.
    pub fn dual_coordinate_max(&self, lambda: f64, z: f64, alpha: f64, q: f64) -> f64 {
        let b = self.label;
        match self.kind {
            LossKind::Squared => {
                let denom = 1.0 + lambda + q;
                (z - b + q * alpha) / denom
            }
            _ if b == 0.0 => 0.0,
            LossKind::Hinge => {
                let lin = b * z - 1.0 + q * b * alpha;
                let curv = (lambda + q) * b * b;
                let gamma = if curv > 0.0 {
                    (lin / curv).clamp(-1.0, 0.0)
                } else if lin > 0.0 {
                    0.0
                } else if lin < 0.0 {
                    -1.0
                } else {
                    (alpha / b).clamp(-1.0, 0.0)
                };
                b * gamma
            }
            LossKind::Logistic => {
                let c = b * z + q * b * alpha;
                let mu = (lambda + q) * b * b;
                let t = logistic_dual_root(c, mu);
                -b * logistic_p(t)
            }
        }
    }
}

/// `f^(λ)` for a fixed `λ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedLoss {
    pub base: ScalarLoss,
    lambda: f64,
}

impl SmoothedLoss {
    pub fn new(base: ScalarLoss, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::contract(format!(
                "smoothing λ must be positive, got {lambda}"
            )));
        }
        Ok(SmoothedLoss { base, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn value(&self, z: f64) -> f64 {
        let b = self.base.label;
        match self.base.kind {
            LossKind::Squared => 0.5 * (z - b) * (z - b) / (1.0 + self.lambda),
            LossKind::Hinge | LossKind::Logistic if b == 0.0 => self.base.constant_value(),
            LossKind::Hinge => {
                let y = b * z;
                let mu = self.lambda * b * b;
                if y >= 1.0 {
                    0.0
                } else if y <= 1.0 - mu {
                    1.0 - y - 0.5 * mu
                } else {
                    (1.0 - y) * (1.0 - y) / (2.0 * mu)
                }
            }
            LossKind::Logistic => {
                let y = b * z;
                let mu = self.lambda * b * b;
                let t = logistic_dual_root(y, mu);
                let gamma = -logistic_p(t);
                gamma * y - logistic_conjugate_at_t(t) - 0.5 * mu * gamma * gamma
            }
        }
    }

    /// Derivative of `f^(λ)`, i.e. the maximizing `β`.
    pub fn gradient(&self, z: f64) -> f64 {
        self.base.dual_coordinate_max(self.lambda, z, 0.0, 0.0)
    }

    /// `(f^(λ))*(β) = f*(β) + (λ/2)β²`
    pub fn conjugate(&self, beta: f64) -> f64 {
        self.base.conjugate(beta) + 0.5 * self.lambda * beta * beta
    }

    /// `f^(λ)` is `1/λ`-smooth.
    pub fn smoothness(&self) -> f64 {
        1.0 / self.lambda
    }

    /// `f^(λ)` keeps the base loss's Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.base.lipschitz()
    }
}
