use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-agent step-sizes, the diagonal of `D`.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSizeSchedule {
    /// Fixed `α_i` for every iteration.
    Constant { alphas: Vec<f64> },
    /// `α_k^i = α⊖ ζ_k^i` with `ζ_k^i ~ U(lo, hi)` drawn fresh per iteration
    /// and agent from a seeded stream.
    Perturbed {
        base: f64,
        lo: f64,
        hi: f64,
        seed: u64,
    },
}

impl StepSizeSchedule {
    pub fn constant(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::invalid(
                "constant schedule needs at least one step-size",
            ));
        }
        if let Some(a) = alphas.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::invalid(format!(
                "step-size {a} must be positive and finite"
            )));
        }
        Ok(StepSizeSchedule::Constant { alphas })
    }

    pub fn uniform(n: usize, alpha: f64) -> Result<Self> {
        Self::constant(vec![alpha; n])
    }

    pub fn perturbed(base: f64, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        if !(base > 0.0 && base.is_finite()) {
            return Err(Error::invalid(format!(
                "base step-size {base} must be positive"
            )));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid(format!(
                "perturbation interval ({lo}, {hi}) must satisfy 0 < lo <= hi"
            )));
        }
        Ok(StepSizeSchedule::Perturbed { base, lo, hi, seed })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, StepSizeSchedule::Constant { .. })
    }

    /// Step-sizes in force at iteration `k`; a pure function of `(seed, k)`.
    pub fn realize(&self, k: usize, n: usize) -> Result<RealizedSteps> {
        let alphas = match self {
            StepSizeSchedule::Constant { alphas } => {
                if alphas.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{n} step-sizes"),
                        actual: format!("{}", alphas.len()),
                    });
                }
                alphas.clone()
            }
            StepSizeSchedule::Perturbed { base, lo, hi, seed } => {
                if lo == hi {
                    vec![base * lo; n]
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    rng.set_stream(k as u64);
                    (0..n).map(|_| base * rng.random_range(*lo..*hi)).collect()
                }
            }
        };
        Ok(RealizedSteps { alphas })
    }
}

/// One realization of `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedSteps {
    pub alphas: Vec<f64>,
}

impl RealizedSteps {
    pub fn alpha_max(&self) -> f64 {
        self.alphas
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn alpha_min(&self) -> f64 {
        self.alphas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn alpha_mean(&self) -> f64 {
        self.alphas.iter().sum::<f64>() / self.alphas.len() as f64
    }

    /// `κ_D = α_max / α_min`.
    pub fn kappa_d(&self) -> f64 {
        self.alpha_max() / self.alpha_min()
    }
}

/// Step-sizes at iteration `k` together with their heterogeneity `κ_D`.
pub fn realize_schedule(
    schedule: &StepSizeSchedule,
    k: usize,
    n: usize,
) -> Result<(Vec<f64>, f64)> {
    let r = schedule.realize(k, n)?;
    let kappa = r.kappa_d();
    Ok((r.alphas, kappa))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_ignores_iteration() {
        let s = StepSizeSchedule::constant(vec![0.1, 0.2, 0.4]).unwrap();
        let (a0, k0) = realize_schedule(&s, 0, 3).unwrap();
        let (a9, _) = realize_schedule(&s, 9, 3).unwrap();
        assert_eq!(a0, a9);
        assert_eq!(k0, 4.0);
        assert!(s.realize(0, 2).is_err());
    }

    #[test]
    fn degenerate_interval_is_constant() {
        let s = StepSizeSchedule::perturbed(0.3, 1.0, 1.0, 5).unwrap();
        for k in 0..5 {
            let (a, kappa) = realize_schedule(&s, k, 4).unwrap();
            assert_eq!(a, vec![0.3; 4]);
            assert_eq!(kappa, 1.0);
        }
    }

    #[test]
    fn uniform_kappa_is_one() {
        let s = StepSizeSchedule::uniform(5, 0.2).unwrap();
        assert_eq!(s.realize(3, 5).unwrap().kappa_d(), 1.0);
    }

    #[test]
    fn perturbation_mean_near_one() {
        let s = StepSizeSchedule::perturbed(1.0, 0.5, 1.5, 77).unwrap();
        let mut sum = 0.0;
        let mut count = 0;
        for k in 0..2000 {
            let r = s.realize(k, 12).unwrap();
            for a in &r.alphas {
                assert!((0.5..1.5).contains(a));
                sum += a;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn perturbed_is_reproducible_per_iteration() {
        let s = StepSizeSchedule::perturbed(0.1, 0.5, 1.5, 3).unwrap();
        assert_eq!(s.realize(4, 6).unwrap(), s.realize(4, 6).unwrap());
        assert_ne!(s.realize(4, 6).unwrap(), s.realize(5, 6).unwrap());
    }

    #[test]
    fn invalid_schedules() {
        assert!(StepSizeSchedule::constant(vec![]).is_err());
        assert!(StepSizeSchedule::constant(vec![0.1, 0.0]).is_err());
        assert!(StepSizeSchedule::perturbed(0.1, 0.0, 1.0, 0).is_err());
        assert!(StepSizeSchedule::perturbed(0.1, 1.5, 0.5, 0).is_err());
        assert!(StepSizeSchedule::perturbed(-0.1, 0.5, 1.5, 0).is_err());
    }
}
