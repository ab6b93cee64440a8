//! Centralized inexact gradient descent
//! `p_{k+1} = p_k - θ (1/n) Σ ∇g^i(s^i_k) + e_k`.
//!
//! Evaluation points `s^i_k` and additive noise `e_k` are injected as
//! functions of `k`, so tests can choose exact, adversarial or decaying
//! perturbations.

use crate::error::{Error, Result};
use crate::linalg::vector_norm;
use crate::objectives::{ProblemInstance, ReferenceSolution};

type EvalPoints<'a> = Box<dyn Fn(usize, &[f64]) -> Vec<Vec<f64>> + 'a>;
type Noise<'a> = Box<dyn Fn(usize, usize) -> Vec<f64> + 'a>;

/// Parameters and perturbation providers of one IGD run.
pub struct IgdRun<'a> {
    theta: f64,
    beta: f64,
    eta: f64,
    eval_points: EvalPoints<'a>,
    noise: Noise<'a>,
}

impl<'a> IgdRun<'a> {
    /// Exact gradient descent (`s^i_k = p_k`, `e_k = 0`). Requires `β ≥ 2`,
    /// `η > 0` and `θ ≤ 1/((1+η)L̄)`.
    pub fn new(inst: &ProblemInstance, theta: f64, beta: f64, eta: f64) -> Result<Self> {
        if !(beta >= 2.0) {
            return Err(Error::invalid(format!("beta = {beta} must be at least 2")));
        }
        if !(eta > 0.0) {
            return Err(Error::invalid(format!("eta = {eta} must be positive")));
        }
        let cap = 1.0 / ((1.0 + eta) * inst.profile().l_bar());
        if !(theta > 0.0 && theta <= cap) {
            return Err(Error::invalid(format!(
                "theta = {theta} must lie in (0, 1/((1+eta) L_bar)] = (0, {cap}]"
            )));
        }
        Ok(Self {
            theta,
            beta,
            eta,
            eval_points: Box::new(|_, p| vec![p.to_vec()]),
            noise: Box::new(|_, dim| vec![0.0; dim]),
        })
    }

    /// `f(k, p_k)` returns the `n` evaluation points `s^1_k..s^n_k`.
    pub fn with_eval_points(mut self, f: impl Fn(usize, &[f64]) -> Vec<Vec<f64>> + 'a) -> Self {
        self.eval_points = Box::new(f);
        self
    }

    /// `f(k)` returns `e_k`.
    pub fn with_noise(mut self, f: impl Fn(usize) -> Vec<f64> + 'a) -> Self {
        self.noise = Box::new(move |k, _| f(k));
        self
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    fn points(&self, k: usize, p: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
        let pts = (self.eval_points)(k, p);
        match pts.len() {
            // a single point is shared by every agent
            1 => Ok(vec![pts[0].clone(); n]),
            len if len == n => Ok(pts),
            len => Err(Error::DimensionMismatch {
                expected: format!("{n} evaluation points"),
                actual: format!("{len}"),
            }),
        }
    }
}

/// Per-iteration quantities of an IGD run, all indexed `k = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct IgdTrace {
    /// `r_k = ‖p_k - p*‖`.
    pub r: Vec<f64>,
    /// `gaps[k][i] = ‖p_k - s^i_k‖`.
    pub gaps: Vec<Vec<f64>>,
    /// `‖e_k‖`.
    pub noise_norms: Vec<f64>,
}

pub fn igd_run(
    inst: &ProblemInstance,
    run: &IgdRun<'_>,
    reference: &ReferenceSolution,
    p0: &[f64],
    iterations: usize,
) -> Result<IgdTrace> {
    let n = inst.agents();
    let dim = inst.dim();
    if p0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: format!("p0 of dimension {dim}"),
            actual: format!("{}", p0.len()),
        });
    }
    let dist = |p: &[f64]| {
        vector_norm(
            &p.iter()
                .zip(&reference.x_star)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        )
    };
    let mut trace = IgdTrace {
        r: Vec::with_capacity(iterations + 1),
        gaps: Vec::with_capacity(iterations + 1),
        noise_norms: Vec::with_capacity(iterations + 1),
    };
    let mut p = p0.to_vec();
    for k in 0..=iterations {
        let pts = run.points(k, &p, n)?;
        let noise = (run.noise)(k, dim);
        if noise.len() != dim || pts.iter().any(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: format!("vectors of dimension {dim}"),
                actual: "provider output of another size".into(),
            });
        }
        trace.r.push(dist(&p));
        trace.gaps.push(
            pts.iter()
                .map(|s| vector_norm(&p.iter().zip(s).map(|(a, b)| a - b).collect::<Vec<_>>()))
                .collect(),
        );
        trace.noise_norms.push(vector_norm(&noise));
        if k == iterations {
            break;
        }
        let mut step = vec![0.0; dim];
        for (i, s) in pts.iter().enumerate() {
            let g = inst.gradient(i, s)?;
            step.iter_mut().zip(&g).for_each(|(acc, gi)| *acc += gi);
        }
        for ((pj, gj), ej) in p.iter_mut().zip(&step).zip(&noise) {
            *pj += -run.theta * gj / n as f64 + ej;
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: k + 1,
                trace: None,
            });
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{QuadraticSpec, REFERENCE_TOL};

    #[test]
    fn step_cap_enforced() {
        let inst = QuadraticSpec::new(3, 2).generate(1).unwrap();
        let cap = 1.0 / (2.0 * inst.profile().l_bar());
        assert!(IgdRun::new(&inst, cap, 2.0, 1.0).is_ok());
        assert!(IgdRun::new(&inst, cap * 1.01, 2.0, 1.0).is_err());
        assert!(IgdRun::new(&inst, cap, 1.5, 1.0).is_err());
        assert!(IgdRun::new(&inst, cap, 2.0, 0.0).is_err());
    }

    #[test]
    fn exact_mode_matches_scalar_gradient_descent() {
        // identical scalar quadratics: p_{k+1} - p* = (1 - θμ)(p_k - p*)
        let inst = QuadraticSpec::new(3, 1)
            .with_l_range(2.0, 2.0)
            .with_mu_range(2.0, 2.0)
            .generate(2)
            .unwrap();
        let sol = inst.solve_reference(REFERENCE_TOL).unwrap();
        let theta = 0.2;
        let run = IgdRun::new(&inst, theta, 2.0, 1.0).unwrap();
        let trace = igd_run(&inst, &run, &sol, &[5.0], 40).unwrap();
        let r0 = trace.r[0];
        for (k, r) in trace.r.iter().enumerate() {
            let expected = (1.0 - theta * 2.0f64).powi(k as i32) * r0;
            assert!((r - expected).abs() <= 1e-12 * r0);
        }
        assert!(trace.r.windows(2).all(|w| w[1] <= w[0]));
        assert!(trace.gaps.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn wrong_point_count_rejected() {
        let inst = QuadraticSpec::new(3, 1).generate(2).unwrap();
        let sol = inst.solve_reference(REFERENCE_TOL).unwrap();
        let run = IgdRun::new(&inst, 0.1, 2.0, 1.0)
            .unwrap()
            .with_eval_points(|_, p| vec![p.to_vec(), p.to_vec()]);
        assert!(igd_run(&inst, &run, &sol, &[0.0], 3).is_err());
    }
}
