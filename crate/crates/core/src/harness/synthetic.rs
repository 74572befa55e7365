use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    /// `b = ⟨a, x_true⟩ + noise · N(0, 1)`
    Regression,
    /// `b = sign(⟨a, x_true⟩)`, flipped with probability `noise`.
    Classification,
}

/// Seeded Gaussian design with a planted solution; rows have unit expected norm and
/// `‖x_true‖ ≈ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub labels: LabelKind,
    pub noise: f64,
    /// Fraction of nonzero coordinates in the planted solution.
    pub support: f64,
    /// Fraction of nonzero features per row.
    pub density: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn regression(n: usize, d: usize, seed: u64) -> Self {
        SyntheticSpec {
            n,
            d,
            labels: LabelKind::Regression,
            noise: 0.1,
            support: 0.2,
            density: 1.0,
            seed,
        }
    }

    pub fn classification(n: usize, d: usize, seed: u64) -> Self {
        SyntheticSpec {
            labels: LabelKind::Classification,
            noise: 0.05,
            ..Self::regression(n, d, seed)
        }
    }
}

/// Draws the dataset and returns it with the planted solution.
pub fn generate(spec: &SyntheticSpec) -> Result<(Dataset, Vec<f64>)> {
    if spec.n == 0 || spec.d == 0 {
        return Err(Error::Config("synthetic data needs n, d ≥ 1".into()));
    }
    if !(0.0..=1.0).contains(&spec.support) || !(spec.density > 0.0 && spec.density <= 1.0) {
        return Err(Error::Config(
            "support must lie in [0, 1] and density in (0, 1]".into(),
        ));
    }
    if !(spec.noise >= 0.0) {
        return Err(Error::Config("noise must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = ((spec.support * spec.d as f64).round() as usize).clamp(1, spec.d);
    let mut x_true = vec![0.0; spec.d];
    let x_scale = 1.0 / (k as f64).sqrt();
    for v in x_true.iter_mut().take(k) {
        *v = x_scale * rng.sample::<f64, _>(StandardNormal);
    }
    let a_scale = 1.0 / (spec.density * spec.d as f64).sqrt();
    let mut rows = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut row = Vec::new();
        for j in 0..spec.d {
            let keep = spec.density >= 1.0 || rng.gen::<f64>() < spec.density;
            let v = a_scale * rng.sample::<f64, _>(StandardNormal);
            if keep && v != 0.0 {
                row.push((j, v));
            }
        }
        let z: f64 = row.iter().map(|&(j, v)| v * x_true[j]).sum();
        let b = match spec.labels {
            LabelKind::Regression => z + spec.noise * rng.sample::<f64, _>(StandardNormal),
            LabelKind::Classification => {
                let s = if z >= 0.0 { 1.0 } else { -1.0 };
                if rng.gen::<f64>() < spec.noise {
                    -s
                } else {
                    s
                }
            }
        };
        rows.push(row);
        labels.push(b);
    }
    Ok((Dataset::from_rows(rows, labels, spec.d)?, x_true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_shaped() {
        let s = SyntheticSpec::classification(50, 7, 3);
        let (a, _) = generate(&s).unwrap();
        let (b, _) = generate(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n(), a.d()), (50, 7));
        assert!(a.labels().iter().all(|&l| l == 1.0 || l == -1.0));
        let (c, _) = generate(&SyntheticSpec { seed: 4, ..s }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sparse_rows() {
        let s = SyntheticSpec {
            density: 0.1,
            ..SyntheticSpec::regression(200, 100, 1)
        };
        let (a, _) = generate(&s).unwrap();
        let frac = a.nnz() as f64 / (200.0 * 100.0);
        assert!(frac > 0.05 && frac < 0.15);
    }
}
