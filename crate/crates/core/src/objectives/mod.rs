//! Local objectives `f^i`, their smoothness profile and the centralized
//! reference minimizer of `f = (1/n) Σ f^i`.

mod generate;
mod io;

pub use generate::{HuberSpec, QuadraticSpec};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{vector_norm, StackedMatrix};

/// Default iteration cap for the gradient-descent reference solver.
pub const REFERENCE_ITERATION_CAP: usize = 10_000_000;
/// Default tolerance on the mean-gradient norm at `x*`.
pub const REFERENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Quadratic,
    LeastSquares,
    Huber,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::LeastSquares => "least_squares",
            ProblemKind::Huber => "huber",
        }
    }
}

/// One agent's private objective.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalObjective {
    /// `½ x'Qx - c'x` with `Q` symmetric positive semidefinite.
    Quadratic { q: DMatrix<f64>, c: DVector<f64> },
    /// `½ ‖Ax - b‖²`.
    LeastSquares { a: DMatrix<f64>, b: DVector<f64> },
    /// `Σ_rows h_ξ(a'x - b) + (ε/2)‖x‖²` with the Huber loss `h_ξ`.
    Huber {
        a: DMatrix<f64>,
        b: DVector<f64>,
        threshold: f64,
        ridge: f64,
    },
}

impl LocalObjective {
    pub fn kind(&self) -> ProblemKind {
        match self {
            LocalObjective::Quadratic { .. } => ProblemKind::Quadratic,
            LocalObjective::LeastSquares { .. } => ProblemKind::LeastSquares,
            LocalObjective::Huber { .. } => ProblemKind::Huber,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LocalObjective::Quadratic { q, .. } => q.ncols(),
            LocalObjective::LeastSquares { a, .. } | LocalObjective::Huber { a, .. } => a.ncols(),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        match self {
            LocalObjective::Quadratic { q, c } => {
                if q.nrows() != q.ncols() || c.len() != q.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: "square Q with matching c".into(),
                        actual: format!("Q {}x{}, c {}", q.nrows(), q.ncols(), c.len()),
                    });
                }
                if !finite(q) || c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("quadratic data must be finite"));
                }
                let asym = (q - q.transpose()).amax();
                if asym > 1e-12 * q.amax().max(1.0) {
                    return Err(Error::invalid("Q must be symmetric"));
                }
            }
            LocalObjective::LeastSquares { a, b } | LocalObjective::Huber { a, b, .. } => {
                if b.len() != a.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: format!("b of length {}", a.nrows()),
                        actual: format!("{}", b.len()),
                    });
                }
                if !finite(a) || b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("regression data must be finite"));
                }
            }
        }
        if let LocalObjective::Huber {
            threshold, ridge, ..
        } = self
        {
            if !(*threshold > 0.0 && threshold.is_finite()) {
                return Err(Error::invalid("Huber threshold must be positive"));
            }
            if !(*ridge >= 0.0 && ridge.is_finite()) {
                return Err(Error::invalid("ridge must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            LocalObjective::Quadratic { q, c } => 0.5 * x.dot(&(q * x)) - c.dot(x),
            LocalObjective::LeastSquares { a, b } => 0.5 * (a * x - b).norm_squared(),
            LocalObjective::Huber {
                a,
                b,
                threshold,
                ridge,
            } => {
                let loss: f64 = (a * x - b).iter().map(|&r| huber_loss(r, *threshold)).sum();
                loss + 0.5 * ridge * x.norm_squared()
            }
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            LocalObjective::Quadratic { q, c } => q * x - c,
            LocalObjective::LeastSquares { a, b } => a.tr_mul(&(a * x - b)),
            LocalObjective::Huber {
                a,
                b,
                threshold,
                ridge,
            } => {
                let psi = (a * x - b).map(|r| r.clamp(-threshold, *threshold));
                a.tr_mul(&psi) + x * *ridge
            }
        }
    }

    /// `(L^i, μ^i)` from the extreme eigenvalues of the Hessian bound.
    pub fn curvature_bounds(&self) -> (f64, f64) {
        let (hessian, shift) = match self {
            LocalObjective::Quadratic { q, .. } => (q.clone(), 0.0),
            LocalObjective::LeastSquares { a, .. } => (a.tr_mul(a), 0.0),
            // the linear region of the Huber loss has zero curvature, so only
            // the ridge is a global strong-convexity modulus
            LocalObjective::Huber { a, ridge, .. } => {
                let eig = SymmetricEigen::new(a.tr_mul(a)).eigenvalues;
                let top = eig.iter().copied().fold(0.0, f64::max).max(0.0);
                return (top + ridge, *ridge);
            }
        };
        let eig = SymmetricEigen::new(hessian).eigenvalues;
        let top = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bottom = eig.iter().copied().fold(f64::INFINITY, f64::min);
        (top.max(0.0), bottom.max(0.0) + shift)
    }
}

fn huber_loss(r: f64, threshold: f64) -> f64 {
    if r.abs() <= threshold {
        0.5 * r * r
    } else {
        threshold * (r.abs() - 0.5 * threshold)
    }
}

/// Per-agent Lipschitz and strong-convexity constants plus their aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessProfile {
    per_agent_l: Vec<f64>,
    per_agent_mu: Vec<f64>,
}

impl SmoothnessProfile {
    pub fn new(per_agent_l: Vec<f64>, per_agent_mu: Vec<f64>) -> Result<Self> {
        if per_agent_l.is_empty() || per_agent_l.len() != per_agent_mu.len() {
            return Err(Error::invalid(
                "profile needs matching, non-empty L and mu lists",
            ));
        }
        for (i, (&l, &mu)) in per_agent_l.iter().zip(&per_agent_mu).enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::invalid(format!("L^{i} = {l} must be in (0, inf)")));
            }
            if !(mu >= 0.0 && mu <= l * (1.0 + 1e-12)) {
                return Err(Error::invalid(format!(
                    "mu^{i} = {mu} must be in [0, L^{i}]"
                )));
            }
        }
        if per_agent_mu.iter().all(|&m| m == 0.0) {
            return Err(Error::invalid("at least one agent must be strongly convex"));
        }
        Ok(Self {
            per_agent_l,
            per_agent_mu,
        })
    }

    /// Every agent shares the same constants.
    pub fn uniform(n: usize, l: f64, mu: f64) -> Result<Self> {
        Self::new(vec![l; n], vec![mu; n])
    }

    pub fn agents(&self) -> usize {
        self.per_agent_l.len()
    }

    pub fn per_agent_l(&self) -> &[f64] {
        &self.per_agent_l
    }

    pub fn per_agent_mu(&self) -> &[f64] {
        &self.per_agent_mu
    }

    /// `L = max L^i`.
    pub fn l_max(&self) -> f64 {
        self.per_agent_l.iter().copied().fold(0.0, f64::max)
    }

    /// `L̄ = mean L^i`.
    pub fn l_bar(&self) -> f64 {
        self.per_agent_l.iter().sum::<f64>() / self.agents() as f64
    }

    /// `μ̄ = mean μ^i`.
    pub fn mu_bar(&self) -> f64 {
        self.per_agent_mu.iter().sum::<f64>() / self.agents() as f64
    }

    /// `μ̂ = max μ^i`.
    pub fn mu_hat(&self) -> f64 {
        self.per_agent_mu.iter().copied().fold(0.0, f64::max)
    }

    /// `κ̄ = L / μ̄`.
    pub fn kappa_bar(&self) -> f64 {
        self.l_max() / self.mu_bar()
    }
}

/// The `n` local objectives of a decentralized problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    dim: usize,
    agents: Vec<LocalObjective>,
    profile: SmoothnessProfile,
}

impl ProblemInstance {
    pub fn new(agents: Vec<LocalObjective>) -> Result<Self> {
        let first = agents
            .first()
            .ok_or_else(|| Error::invalid("problem needs at least one agent"))?;
        let (dim, kind) = (first.dim(), first.kind());
        if dim == 0 {
            return Err(Error::invalid("decision dimension must be positive"));
        }
        for (i, a) in agents.iter().enumerate() {
            a.validate()?;
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: format!("dimension {dim}"),
                    actual: format!("agent {i} has dimension {}", a.dim()),
                });
            }
            if a.kind() != kind {
                return Err(Error::invalid("all agents must share one objective kind"));
            }
        }
        let profile = profile_of(&agents)?;
        Ok(Self {
            dim,
            agents,
            profile,
        })
    }

    pub fn agents(&self) -> usize {
        self.agents.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ProblemKind {
        self.agents[0].kind()
    }

    pub fn local(&self, agent: usize) -> Result<&LocalObjective> {
        self.agents.get(agent).ok_or(Error::AgentOutOfRange {
            index: agent,
            agents: self.agents.len(),
        })
    }

    pub fn locals(&self) -> &[LocalObjective] {
        &self.agents
    }

    pub fn profile(&self) -> &SmoothnessProfile {
        &self.profile
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: format!("point of dimension {}", self.dim),
                actual: format!("{}", point.len()),
            });
        }
        Ok(())
    }

    pub fn value(&self, agent: usize, point: &[f64]) -> Result<f64> {
        let local = self.local(agent)?;
        self.check_point(point)?;
        Ok(local.value(&DVector::from_column_slice(point)))
    }

    /// `∇f^i(point)`.
    pub fn gradient(&self, agent: usize, point: &[f64]) -> Result<Vec<f64>> {
        let local = self.local(agent)?;
        self.check_point(point)?;
        Ok(local
            .gradient(&DVector::from_column_slice(point))
            .as_slice()
            .to_vec())
    }

    /// `f(x) = (1/n) Σ f^i(x)`.
    pub fn global_value(&self, point: &[f64]) -> Result<f64> {
        self.check_point(point)?;
        let x = DVector::from_column_slice(point);
        Ok(self.agents.iter().map(|a| a.value(&x)).sum::<f64>() / self.agents() as f64)
    }

    /// `∇f(x) = (1/n) Σ ∇f^i(x)`.
    pub fn mean_gradient(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.check_point(point)?;
        let x = DVector::from_column_slice(point);
        let mut acc = DVector::zeros(self.dim);
        for a in &self.agents {
            acc += a.gradient(&x);
        }
        Ok((acc / self.agents() as f64).as_slice().to_vec())
    }

    /// Row `i` of the result is `∇f^i` at row `i` of `x`.
    pub fn stacked_gradient(&self, x: &StackedMatrix) -> Result<StackedMatrix> {
        if x.shape() != (self.agents(), self.dim) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.agents(), self.dim),
                actual: format!("{}x{}", x.rows(), x.cols()),
            });
        }
        let mut out = StackedMatrix::zeros(self.agents(), self.dim);
        for (i, a) in self.agents.iter().enumerate() {
            let g = a.gradient(&DVector::from_column_slice(x.row(i)));
            out.row_mut(i).copy_from_slice(g.as_slice());
        }
        Ok(out)
    }

    pub fn solve_reference(&self, tol: f64) -> Result<ReferenceSolution> {
        self.solve_reference_capped(tol, REFERENCE_ITERATION_CAP)
    }

    /// Direct solve for quadratic-type kinds, gradient descent with step
    /// `1/L̄` otherwise.
    pub fn solve_reference_capped(&self, tol: f64, cap: usize) -> Result<ReferenceSolution> {
        if !(tol > 0.0) {
            return Err(Error::invalid("reference tolerance must be positive"));
        }
        let x_star = match self.kind() {
            ProblemKind::Quadratic | ProblemKind::LeastSquares => self.solve_normal_equations()?,
            ProblemKind::Huber => self.gradient_descent(tol, cap)?,
        };
        let gradient_norm = vector_norm(&self.mean_gradient(x_star.as_slice())?);
        Ok(ReferenceSolution {
            x_star: x_star.as_slice().to_vec(),
            gradient_norm,
        })
    }

    fn solve_normal_equations(&self) -> Result<DVector<f64>> {
        let p = self.dim;
        let mut h = DMatrix::zeros(p, p);
        let mut rhs = DVector::zeros(p);
        for a in &self.agents {
            match a {
                LocalObjective::Quadratic { q, c } => {
                    h += q;
                    rhs += c;
                }
                LocalObjective::LeastSquares { a, b } => {
                    h += a.tr_mul(a);
                    rhs += a.tr_mul(b);
                }
                LocalObjective::Huber { .. } => unreachable!("Huber is solved iteratively"),
            }
        }
        let chol = h
            .clone()
            .cholesky()
            .ok_or_else(|| Error::invalid("aggregate Hessian is not positive definite"))?;
        let mut x = chol.solve(&rhs);
        // one step of iterative refinement
        let residual = &rhs - &h * &x;
        x += chol.solve(&residual);
        Ok(x)
    }

    fn gradient_descent(&self, tol: f64, cap: usize) -> Result<DVector<f64>> {
        let step = 1.0 / self.profile.l_bar();
        let mut x = DVector::zeros(self.dim);
        for _ in 0..cap {
            let g = DVector::from_vec(self.mean_gradient(x.as_slice())?);
            if g.norm() <= tol {
                return Ok(x);
            }
            x -= g * step;
            if x.iter().any(|v| !v.is_finite()) {
                break;
            }
        }
        Err(Error::ReferenceSolverDiverged {
            tol,
            iterations: cap,
        })
    }

    pub fn to_text(&self) -> String {
        io::write_problem(self)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        io::read_problem(text)
    }
}

fn profile_of(agents: &[LocalObjective]) -> Result<SmoothnessProfile> {
    let (ls, mus): (Vec<f64>, Vec<f64>) = agents.iter().map(|a| a.curvature_bounds()).unzip();
    SmoothnessProfile::new(ls, mus)
}

/// Recomputes `(L^i, μ^i)` for every agent of an instance.
pub fn estimate_profile(inst: &ProblemInstance) -> SmoothnessProfile {
    profile_of(inst.locals()).expect("instance profile was validated at construction")
}

/// The unique minimizer `x*` of the aggregate objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: Vec<f64>,
    /// `‖(1/n) Σ ∇f^i(x*)‖` actually achieved.
    pub gradient_norm: f64,
}

impl ReferenceSolution {
    /// `1 (x*)'`.
    pub fn stacked(&self, n: usize) -> StackedMatrix {
        StackedMatrix::consensual(n, &self.x_star)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_quadratic(centers: &[f64]) -> ProblemInstance {
        ProblemInstance::new(
            centers
                .iter()
                .map(|&c| LocalObjective::Quadratic {
                    q: DMatrix::from_element(1, 1, 1.0),
                    c: DVector::from_element(1, c),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_quadratic_gradient() {
        let inst = ProblemInstance::new(vec![LocalObjective::Quadratic {
            q: DMatrix::identity(2, 2),
            c: DVector::zeros(2),
        }])
        .unwrap();
        assert_eq!(inst.gradient(0, &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        assert!(matches!(
            inst.gradient(3, &[1.0, 2.0]),
            Err(Error::AgentOutOfRange {
                index: 3,
                agents: 1
            })
        ));
        assert!(inst.gradient(0, &[1.0]).is_err());
    }

    #[test]
    fn huber_inside_threshold_is_least_squares_plus_ridge() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0]);
        let b = DVector::from_vec(vec![0.1, -0.2]);
        let huber = LocalObjective::Huber {
            a: a.clone(),
            b: b.clone(),
            threshold: 10.0,
            ridge: 0.05,
        };
        let ls = LocalObjective::LeastSquares { a, b };
        let x = DVector::from_vec(vec![0.3, -0.1]);
        let diff = huber.gradient(&x) - (ls.gradient(&x) + &x * 0.05);
        assert!(diff.amax() < 1e-15);
    }

    #[test]
    fn huber_clips_large_residuals() {
        let huber = LocalObjective::Huber {
            a: DMatrix::from_element(1, 1, 1.0),
            b: DVector::from_element(1, 0.0),
            threshold: 1.0,
            ridge: 0.0,
        };
        let g = huber.gradient(&DVector::from_element(1, 50.0));
        assert_eq!(g[0], 1.0);
        assert_eq!(huber.value(&DVector::from_element(1, 3.0)), 2.5);
    }

    #[test]
    fn stacked_gradient_rows() {
        let inst = QuadraticSpec::new(4, 3).generate(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = StackedMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let g = inst.stacked_gradient(&x).unwrap();
        for i in 0..4 {
            assert_eq!(g.row(i), inst.gradient(i, x.row(i)).unwrap().as_slice());
        }
        assert!(inst.stacked_gradient(&StackedMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn stacked_gradient_single_agent() {
        let inst = QuadraticSpec::new(1, 2).generate(1).unwrap();
        let x = StackedMatrix::from_rows(&[vec![0.4, -1.0]]).unwrap();
        let g = inst.stacked_gradient(&x).unwrap();
        assert_eq!(g.row(0), inst.gradient(0, &[0.4, -1.0]).unwrap().as_slice());
    }

    #[test]
    fn optimality_of_stacked_reference() {
        let inst = QuadraticSpec::new(5, 3).generate(8).unwrap();
        let sol = inst.solve_reference(REFERENCE_TOL).unwrap();
        let g = inst.stacked_gradient(&sol.stacked(5)).unwrap();
        assert!(vector_norm(&g.column_sums()) < 1e-10);
    }

    #[test]
    fn reference_two_scalar_agents() {
        let sol = scalar_quadratic(&[0.0, 2.0])
            .solve_reference(1e-12)
            .unwrap();
        assert!((sol.x_star[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reference_single_agent_quadratic() {
        let inst = ProblemInstance::new(vec![LocalObjective::Quadratic {
            q: DMatrix::identity(2, 2) * 2.0,
            c: DVector::from_vec(vec![2.0, 2.0]),
        }])
        .unwrap();
        let sol = inst.solve_reference(1e-12).unwrap();
        assert!((sol.x_star[0] - 1.0).abs() < 1e-14 && (sol.x_star[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reference_tolerance_refinement_is_consistent() {
        let inst = HuberSpec::new(4, 3, 10).generate(3).unwrap();
        let tol = 1e-6;
        let coarse = inst.solve_reference(tol).unwrap();
        let fine = inst.solve_reference(tol / 10.0).unwrap();
        let shift = vector_norm(
            &coarse
                .x_star
                .iter()
                .zip(&fine.x_star)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        assert!(shift <= 10.0 * tol / inst.profile().mu_bar());
    }

    #[test]
    fn reference_cap_reports_divergence() {
        let inst = HuberSpec::new(3, 2, 8).generate(1).unwrap();
        assert!(matches!(
            inst.solve_reference_capped(1e-14, 3),
            Err(Error::ReferenceSolverDiverged { .. })
        ));
    }

    #[test]
    fn profile_of_diagonal_quadratic() {
        let inst = ProblemInstance::new(vec![LocalObjective::Quadratic {
            q: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
            c: DVector::zeros(2),
        }])
        .unwrap();
        let p = estimate_profile(&inst);
        assert!((p.per_agent_l()[0] - 4.0).abs() < 1e-12);
        assert!((p.per_agent_mu()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn profile_of_pure_ridge_huber() {
        let inst = ProblemInstance::new(vec![LocalObjective::Huber {
            a: DMatrix::zeros(3, 2),
            b: DVector::zeros(3),
            threshold: 1.0,
            ridge: 0.1,
        }])
        .unwrap();
        let p = estimate_profile(&inst);
        assert!((p.per_agent_l()[0] - 0.1).abs() < 1e-15);
        assert!((p.per_agent_mu()[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn profile_aggregates() {
        let p = SmoothnessProfile::new(vec![1.0, 3.0, 8.0], vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(p.l_max(), 8.0);
        assert_eq!(p.l_bar(), 4.0);
        assert_eq!(p.mu_bar(), 0.5);
        assert_eq!(p.mu_hat(), 1.0);
        assert_eq!(p.kappa_bar(), 16.0);
    }

    #[test]
    fn profile_validation() {
        assert!(SmoothnessProfile::new(vec![1.0], vec![0.0]).is_err());
        assert!(SmoothnessProfile::new(vec![0.0], vec![0.0]).is_err());
        assert!(SmoothnessProfile::new(vec![1.0], vec![2.0]).is_err());
        assert!(SmoothnessProfile::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn plain_least_squares_without_curvature_is_rejected() {
        // one row in two dimensions: A'A is singular
        let res = ProblemInstance::new(vec![LocalObjective::LeastSquares {
            a: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            b: DVector::from_element(1, 1.0),
        }]);
        assert!(res.is_err());
    }

    #[test]
    fn mixed_kinds_rejected() {
        let res = ProblemInstance::new(vec![
            LocalObjective::Quadratic {
                q: DMatrix::identity(1, 1),
                c: DVector::zeros(1),
            },
            LocalObjective::LeastSquares {
                a: DMatrix::identity(1, 1),
                b: DVector::zeros(1),
            },
        ]);
        assert!(res.is_err());
    }
}
