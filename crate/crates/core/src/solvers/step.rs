use crate::error::{Error, Result};
use crate::linalg::{vector_norm, StackedMatrix};
use crate::network::MixingMatrix;
use crate::objectives::ProblemInstance;

/// Iterates `x_k`, trackers `y_k` and the cached `∇f(x_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub k: usize,
    pub x: StackedMatrix,
    pub y: StackedMatrix,
    pub prev_grad: StackedMatrix,
}

impl SolverState {
    /// `y_0 = ∇f(x_0)`.
    pub fn initial(inst: &ProblemInstance, x0: StackedMatrix) -> Result<Self> {
        let grad = inst.stacked_gradient(&x0)?;
        Ok(Self {
            k: 0,
            x: x0,
            y: grad.clone(),
            prev_grad: grad,
        })
    }

    /// `‖1'y - 1'∇f(x)‖ / (1 + ‖1'∇f(x)‖)`, zero in exact arithmetic.
    pub fn tracking_error(&self) -> f64 {
        let ys = self.y.column_sums();
        let gs = self.prev_grad.column_sums();
        let diff: Vec<f64> = ys.iter().zip(&gs).map(|(a, b)| a - b).collect();
        vector_norm(&diff) / (1.0 + vector_norm(&gs))
    }
}

fn check_dims(state: &SolverState, w: &MixingMatrix, alphas: &[f64]) -> Result<()> {
    let n = state.x.rows();
    if w.size() != n || alphas.len() != n || state.y.shape() != state.x.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{n} agents throughout"),
            actual: format!("W {0}x{0}, {1} step-sizes", w.size(), alphas.len()),
        });
    }
    Ok(())
}

fn finish(
    state: &SolverState,
    inst: &ProblemInstance,
    x: StackedMatrix,
    y_of: impl FnOnce(&StackedMatrix) -> Result<StackedMatrix>,
) -> Result<SolverState> {
    let k = state.k + 1;
    let diverged = || Error::Diverged {
        iteration: k,
        trace: None,
    };
    if !x.is_finite() {
        return Err(diverged());
    }
    let grad = inst.stacked_gradient(&x)?;
    let y = y_of(&grad)?;
    if !y.is_finite() || !grad.is_finite() {
        return Err(diverged());
    }
    Ok(SolverState {
        k,
        x,
        y,
        prev_grad: grad,
    })
}

/// `x⁺ = W(x - Dy)`, `y⁺ = W(y + ∇f(x⁺) - ∇f(x))`.
pub fn atc_diging_step(
    state: &SolverState,
    w: &MixingMatrix,
    alphas: &[f64],
    inst: &ProblemInstance,
) -> Result<SolverState> {
    check_dims(state, w, alphas)?;
    let x = w.apply(&(&state.x - &state.y.scale_rows(alphas)?))?;
    finish(state, inst, x, |grad| {
        let inner = &(&state.y + grad) - &state.prev_grad;
        w.apply(&inner)
    })
}

/// `x⁺ = Wx - Dy`, `y⁺ = Wy + ∇f(x⁺) - ∇f(x)`.
pub fn diging_step(
    state: &SolverState,
    w: &MixingMatrix,
    alphas: &[f64],
    inst: &ProblemInstance,
) -> Result<SolverState> {
    check_dims(state, w, alphas)?;
    let x = &w.apply(&state.x)? - &state.y.scale_rows(alphas)?;
    finish(state, inst, x, |grad| {
        Ok(&(&w.apply(&state.y)? + grad) - &state.prev_grad)
    })
}
