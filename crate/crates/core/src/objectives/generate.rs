use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Normal, StandardNormal};

use super::{LocalObjective, ProblemInstance};
use crate::error::{Error, Result};

/// Random strongly convex quadratics `½x'Q^i x - c^i'x` whose Hessians have
/// prescribed extreme eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSpec {
    pub agents: usize,
    pub dim: usize,
    /// Range the per-agent largest eigenvalue `L^i` is drawn from.
    pub l_range: (f64, f64),
    /// Range the per-agent smallest eigenvalue `μ^i` is drawn from.
    pub mu_range: (f64, f64),
}

impl QuadraticSpec {
    pub fn new(agents: usize, dim: usize) -> Self {
        Self {
            agents,
            dim,
            l_range: (1.0, 2.0),
            mu_range: (0.5, 1.0),
        }
    }

    pub fn with_l_range(mut self, lo: f64, hi: f64) -> Self {
        self.l_range = (lo, hi);
        self
    }

    pub fn with_mu_range(mut self, lo: f64, hi: f64) -> Self {
        self.mu_range = (lo, hi);
        self
    }

    pub fn generate(&self, seed: u64) -> Result<ProblemInstance> {
        let (l_lo, l_hi) = self.l_range;
        let (m_lo, m_hi) = self.mu_range;
        if self.agents == 0 || self.dim == 0 {
            return Err(Error::invalid("quadratic spec needs agents and dimension"));
        }
        if !(0.0 < l_lo && l_lo <= l_hi && 0.0 <= m_lo && m_lo <= m_hi && m_hi <= l_lo) {
            return Err(Error::invalid(format!(
                "need 0 <= mu_lo <= mu_hi <= L_lo <= L_hi, got mu {:?} L {:?}",
                self.mu_range, self.l_range
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = self.dim;
        let agents = (0..self.agents)
            .map(|_| {
                let top = draw(&mut rng, l_lo, l_hi);
                let bottom = draw(&mut rng, m_lo, m_hi);
                let mut eig: Vec<f64> = (0..p).map(|_| draw(&mut rng, bottom, top)).collect();
                eig[0] = top;
                if p > 1 {
                    eig[p - 1] = bottom;
                }
                let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
                let u = g.qr().q();
                let mut q = &u * DMatrix::from_diagonal(&DVector::from_vec(eig)) * u.transpose();
                // exact symmetry
                q = (&q + q.transpose()) * 0.5;
                let c = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
                LocalObjective::Quadratic { q, c }
            })
            .collect();
        ProblemInstance::new(agents)
    }
}

fn draw(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Robust regression with Huber loss and a ridge term on every agent.
///
/// Rows of `A^i` are standard normal, `b^i = A^i x̂ + noise`, and a fraction
/// of rows per agent is corrupted by Cauchy outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct HuberSpec {
    pub agents: usize,
    pub dim: usize,
    pub rows_per_agent: usize,
    pub threshold: f64,
    pub ridge: f64,
    pub outlier_fraction: f64,
    pub noise_std: f64,
    pub outlier_scale: f64,
}

impl HuberSpec {
    pub fn new(agents: usize, dim: usize, rows_per_agent: usize) -> Self {
        Self {
            agents,
            dim,
            rows_per_agent,
            threshold: 1.0,
            ridge: 0.01,
            outlier_fraction: 0.1,
            noise_std: 0.1,
            outlier_scale: 10.0,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<ProblemInstance> {
        if self.agents == 0 || self.dim == 0 || self.rows_per_agent == 0 {
            return Err(Error::invalid(
                "Huber spec needs agents, dimension and rows",
            ));
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(Error::invalid("outlier fraction must be in [0,1]"));
        }
        if !(self.noise_std >= 0.0 && self.outlier_scale > 0.0) {
            return Err(Error::invalid(
                "noise scales must be nonnegative / positive",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, m) = (self.dim, self.rows_per_agent);
        let truth = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise = Normal::new(0.0, self.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
        let outlier =
            Cauchy::new(0.0, self.outlier_scale).map_err(|e| Error::invalid(e.to_string()))?;
        let corrupted = (self.outlier_fraction * m as f64).round() as usize;
        let agents = (0..self.agents)
            .map(|_| {
                let a = DMatrix::from_fn(m, p, |_, _| rng.sample::<f64, _>(StandardNormal));
                let mut b = &a * &truth;
                b.iter_mut().for_each(|v| *v += rng.sample(noise));
                for row in sample(&mut rng, m, corrupted) {
                    b[row] += rng.sample(outlier);
                }
                LocalObjective::Huber {
                    a,
                    b,
                    threshold: self.threshold,
                    ridge: self.ridge,
                }
            })
            .collect();
        ProblemInstance::new(agents)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_profile_hits_requested_ranges() {
        let spec = QuadraticSpec::new(6, 4)
            .with_l_range(2.0, 3.0)
            .with_mu_range(0.5, 1.0);
        let inst = spec.generate(7).unwrap();
        for (&l, &mu) in inst
            .profile()
            .per_agent_l()
            .iter()
            .zip(inst.profile().per_agent_mu())
        {
            assert!((2.0 - 1e-9..=3.0 + 1e-9).contains(&l));
            assert!((0.5 - 1e-9..=1.0 + 1e-9).contains(&mu));
        }
    }

    #[test]
    fn generation_is_seeded() {
        let spec = HuberSpec::new(3, 2, 6);
        assert_eq!(spec.generate(4).unwrap(), spec.generate(4).unwrap());
        assert_ne!(spec.generate(4).unwrap(), spec.generate(5).unwrap());
    }

    #[test]
    fn huber_profile_uses_ridge_as_mu() {
        let inst = HuberSpec::new(4, 3, 10).generate(1).unwrap();
        assert!(inst.profile().per_agent_mu().iter().all(|&mu| mu == 0.01));
        assert!(inst.profile().l_max() > 1.0);
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(QuadraticSpec::new(0, 2).generate(0).is_err());
        assert!(QuadraticSpec::new(2, 2)
            .with_mu_range(3.0, 4.0)
            .generate(0)
            .is_err());
        let mut h = HuberSpec::new(2, 2, 4);
        h.outlier_fraction = 1.5;
        assert!(h.generate(0).is_err());
    }
}
