//! Closed-form step-size intervals, linear rates and small-gain gains for
//! ATC-DIGing with uncoordinated step-sizes, plus empirical checkers that
//! hold recorded runs against them.
//!
//! Notation: `L = max L^i`, `L̄ = mean L^i`, `μ̄ = mean μ^i`, `μ̂ = max μ^i`,
//! `κ̄ = L/μ̄`, `κ_D = α_max/α_min`, `h = 1 - 1/κ_D`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{
    average_seminorm, consensus_seminorm, ergodic_norm_of_values, frobenius_norm, vector_norm,
    ErgodicNormParams,
};
use crate::objectives::{ReferenceSolution, SmoothnessProfile};
use crate::solvers::{format_decimal, IgdTrace, RunTrace};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Default `η` for the last arrow.
pub const DEFAULT_ETA: f64 = 1.0;

/// Relative slack allowed when comparing numerically evaluated bounds.
pub const BOUND_SLACK: f64 = 1e-9;

/// Default `β = 2L/μ̂`.
pub fn default_beta(profile: &SmoothnessProfile) -> f64 {
    2.0 * profile.l_max() / profile.mu_hat()
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::invalid(format!(
            "delta = {delta} must lie in [0, 1)"
        )));
    }
    Ok(())
}

fn check_kappa_d(kappa_d: f64) -> Result<()> {
    if !(kappa_d >= 1.0 && kappa_d.is_finite()) {
        return Err(Error::invalid(format!("kappa_D = {kappa_d} must be >= 1")));
    }
    Ok(())
}

/// Largest admissible `κ_D`: `1 + (1-δ)/(4√3 κ̄)`.
pub fn heterogeneity_limit(profile: &SmoothnessProfile, delta: f64) -> f64 {
    1.0 + (1.0 - delta) / (4.0 * SQRT3 * profile.kappa_bar())
}

/// Upper end of the admissible `α_max` interval:
/// `min{ (1-δ)(1-δ-4√3κ̄h) / (10Lδ√n√κ̄), 1/(2L̄) }`.
pub fn max_stepsize(
    profile: &SmoothnessProfile,
    delta: f64,
    n: usize,
    kappa_d: f64,
) -> Result<f64> {
    check_delta(delta)?;
    check_kappa_d(kappa_d)?;
    let kb = profile.kappa_bar();
    let slack = 1.0 - delta - 4.0 * SQRT3 * kb * (1.0 - 1.0 / kappa_d);
    if slack <= 0.0 {
        return Err(Error::HeterogeneityTooLarge {
            kappa_d,
            limit: heterogeneity_limit(profile, delta),
        });
    }
    let centralized = 1.0 / (2.0 * profile.l_bar());
    if delta == 0.0 {
        return Ok(centralized);
    }
    let network =
        (1.0 - delta) * slack / (10.0 * profile.l_max() * delta * (n as f64).sqrt() * kb.sqrt());
    Ok(network.min(centralized))
}

/// The two expressions whose maximum is the rate: the network branch and
/// the centralized branch `√(1 - α_max μ̄/3)`.
pub fn theorem1_branches(
    profile: &SmoothnessProfile,
    delta: f64,
    n: usize,
    kappa_d: f64,
    alpha_max: f64,
) -> (f64, f64) {
    let kb = profile.kappa_bar();
    let h = 1.0 - 1.0 / kappa_d;
    let network = (12.0 * kb * kb * h * h
        + 10.0 * profile.l_max() * delta * (n as f64).sqrt() * kb.sqrt() * alpha_max)
        .sqrt()
        + delta
        + 2.0 * SQRT3 * kb * h;
    let centralized = (1.0 - alpha_max * profile.mu_bar() / 3.0).sqrt();
    (network, centralized)
}

/// Explicit R-linear rate of ATC-DIGing for `α_max` inside the admissible
/// interval.
pub fn theorem1_rate(
    profile: &SmoothnessProfile,
    delta: f64,
    n: usize,
    kappa_d: f64,
    alpha_max: f64,
) -> Result<f64> {
    let cap = max_stepsize(profile, delta, n, kappa_d)?;
    if !(alpha_max > 0.0 && alpha_max <= cap * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!(
            "alpha_max = {alpha_max} outside the admissible interval (0, {cap})"
        )));
    }
    let (a, b) = theorem1_branches(profile, delta, n, kappa_d, alpha_max);
    let lambda = a.max(b);
    if !(lambda < 1.0) {
        return Err(Error::RateNotContractive { lambda });
    }
    Ok(lambda)
}

/// Gains of the arrows `q → y_Ł`, `q → y_avg` and `y_F → x_Ł`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma4Gains {
    pub gamma_11: f64,
    pub gamma_12: f64,
    pub gamma_2: f64,
}

pub fn lemma4_gains(l: f64, delta: f64, lambda: f64, alpha_max: f64) -> Result<Lemma4Gains> {
    if !(lambda > delta) {
        return Err(Error::LambdaBelowDelta { lambda, delta });
    }
    if !(lambda < 1.0) {
        return Err(Error::invalid(format!("lambda = {lambda} must be below 1")));
    }
    Ok(Lemma4Gains {
        gamma_11: (lambda + 1.0) * delta * l / (lambda - delta),
        gamma_12: l,
        gamma_2: delta * alpha_max / (lambda - delta),
    })
}

/// `√(1 - θμ̄β/(2(β+1)))`, the smallest rate the inexact gradient method
/// can certify with step `θ`.
pub fn igd_rate_floor(profile: &SmoothnessProfile, theta: f64, beta: f64) -> f64 {
    (1.0 - theta * profile.mu_bar() * beta / (2.0 * (beta + 1.0))).sqrt()
}

fn igd_gap_constant(profile: &SmoothnessProfile, beta: f64, eta: f64) -> f64 {
    let mu_bar = profile.mu_bar();
    (profile.l_max() * (1.0 + eta) / (mu_bar * eta) + profile.mu_hat() / mu_bar * beta).sqrt()
}

fn check_igd_conditions(
    profile: &SmoothnessProfile,
    step: f64,
    lambda: f64,
    beta: f64,
    eta: f64,
) -> Result<()> {
    if !(beta >= 2.0) {
        return Err(Error::LastArrowCondition(format!(
            "beta = {beta} must be >= 2"
        )));
    }
    if !(eta > 0.0) {
        return Err(Error::LastArrowCondition(format!(
            "eta = {eta} must be > 0"
        )));
    }
    let cap = 1.0 / ((1.0 + eta) * profile.l_bar());
    if !(step > 0.0 && step <= cap * (1.0 + 1e-12)) {
        return Err(Error::LastArrowCondition(format!(
            "step {step} exceeds 1/((1+eta) L_bar) = {cap}"
        )));
    }
    let floor = igd_rate_floor(profile, step, beta);
    if !(lambda >= floor * (1.0 - 1e-15) && lambda < 1.0) {
        return Err(Error::LastArrowCondition(format!(
            "lambda = {lambda} must lie in [{floor}, 1)"
        )));
    }
    Ok(())
}

/// Coefficients of the last arrow `{x_Ł, y_F} → q`:
/// `γ31 = 1 + (√n/λ)√(L(1+η)/(μ̄η) + μ̂β/μ̄)` and
/// `γ32 = B_y = √(3 - α_max μ̄)/(λμ̄) · (1 - 1/κ_D)`.
pub fn lemma6_coeffs(
    profile: &SmoothnessProfile,
    n: usize,
    lambda: f64,
    alpha_max: f64,
    kappa_d: f64,
    beta: f64,
    eta: f64,
) -> Result<(f64, f64)> {
    check_kappa_d(kappa_d)?;
    check_igd_conditions(profile, alpha_max, lambda, beta, eta)?;
    let mu_bar = profile.mu_bar();
    let gamma_31 = 1.0 + (n as f64).sqrt() / lambda * igd_gap_constant(profile, beta, eta);
    let gamma_32 = (3.0 - alpha_max * mu_bar).sqrt() / (lambda * mu_bar) * (1.0 - 1.0 / kappa_d);
    Ok((gamma_31, gamma_32))
}

/// All gains of the small-gain cycle at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainLedger {
    pub gamma_11: f64,
    pub gamma_12: f64,
    pub gamma_2: f64,
    pub gamma_31: f64,
    pub gamma_32: f64,
    /// `(γ11 + γ12)(γ2 γ31 + γ32)`.
    pub product: f64,
    pub feasible: bool,
}

impl GainLedger {
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        profile: &SmoothnessProfile,
        delta: f64,
        n: usize,
        kappa_d: f64,
        lambda: f64,
        alpha_max: f64,
        beta: f64,
        eta: f64,
    ) -> Result<Self> {
        let g = lemma4_gains(profile.l_max(), delta, lambda, alpha_max)?;
        let (gamma_31, gamma_32) =
            lemma6_coeffs(profile, n, lambda, alpha_max, kappa_d, beta, eta)?;
        let product = (g.gamma_11 + g.gamma_12) * (g.gamma_2 * gamma_31 + gamma_32);
        Ok(Self {
            gamma_11: g.gamma_11,
            gamma_12: g.gamma_12,
            gamma_2: g.gamma_2,
            gamma_31,
            gamma_32,
            product,
            feasible: product < 1.0,
        })
    }
}

/// Bound on the first sequence of a cycle `s^i → s^{i+1}` with gains `γ_i`
/// and offsets `ω_i`: `(Σ_i ω_i Π_{j>i} γ_j) / (1 - Π γ_i)`.
pub fn small_gain_bound(gains: &[f64], offsets: &[f64]) -> Result<f64> {
    if gains.is_empty() || gains.len() != offsets.len() {
        return Err(Error::invalid(
            "gains and offsets must be non-empty and equally long",
        ));
    }
    if gains
        .iter()
        .chain(offsets)
        .any(|&v| !(v >= 0.0 && v.is_finite()))
    {
        return Err(Error::invalid(
            "gains and offsets must be finite and nonnegative",
        ));
    }
    let product: f64 = gains.iter().product();
    if product >= 1.0 {
        return Err(Error::GainProductNotContractive { product });
    }
    let mut acc = 0.0;
    let mut tail = 1.0;
    for (g, w) in gains.iter().zip(offsets).rev() {
        acc += w * tail;
        tail *= g;
    }
    Ok(acc / (1.0 - product))
}

/// One arrow of the small-gain cycle evaluated on a stored run.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrowCheck {
    pub name: &'static str,
    /// Ergodic norm of the target sequence.
    pub lhs: f64,
    /// Right-hand side including the closed-form offset.
    pub bound: f64,
    /// Closed-form offset `ω` (zero where the proof has none).
    pub omega: f64,
    /// Smallest offset that makes the arrow hold at horizon `K`.
    pub omega_empirical: f64,
    /// Same at horizon `K/2`.
    pub omega_empirical_half: f64,
    pub margin: f64,
    pub holds: bool,
}

impl ArrowCheck {
    fn new(
        name: &'static str,
        lhs: f64,
        linear: f64,
        omega: f64,
        lhs_half: f64,
        linear_half: f64,
    ) -> Self {
        let bound = linear + omega;
        let margin = bound - lhs;
        Self {
            name,
            lhs,
            bound,
            omega,
            omega_empirical: (lhs - linear).max(0.0),
            omega_empirical_half: (lhs_half - linear_half).max(0.0),
            margin,
            holds: margin >= -BOUND_SLACK * lhs.max(bound).max(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrowReport {
    pub lambda: f64,
    pub horizon: usize,
    /// Arrows (i) to (iv) in order.
    pub arrows: Vec<ArrowCheck>,
    /// `{x_Ł, y_F} → q`, present when its step-size/rate conditions hold.
    pub last_arrow: Option<ArrowCheck>,
}

impl ArrowReport {
    pub fn all_hold(&self) -> bool {
        self.arrows.iter().chain(&self.last_arrow).all(|a| a.holds)
    }
}

/// Evaluates every arrow of the small-gain cycle on a run that stored its
/// iterates. The run must use a static mixing matrix with contraction factor
/// `delta` and constant step-sizes with the given `alpha_max` and `kappa_d`.
#[allow(clippy::too_many_arguments)]
pub fn verify_small_gain_arrows(
    trace: &RunTrace,
    reference: &ReferenceSolution,
    profile: &SmoothnessProfile,
    delta: f64,
    alpha_max: f64,
    kappa_d: f64,
    lambda: f64,
) -> Result<ArrowReport> {
    if trace.iterates.is_empty() {
        return Err(Error::invalid("arrow verification needs stored iterates"));
    }
    let gains = lemma4_gains(profile.l_max(), delta, lambda, alpha_max)?;
    let horizon = trace.iterates.len() - 1;
    let n = trace.iterates[0].0.rows();
    let x_star = reference.stacked(n);

    let mut q = Vec::with_capacity(horizon + 1);
    let mut x_l = Vec::with_capacity(horizon + 1);
    let mut y_l = Vec::with_capacity(horizon + 1);
    let mut y_avg = Vec::with_capacity(horizon + 1);
    let mut y_f = Vec::with_capacity(horizon + 1);
    for (x, y) in &trace.iterates {
        q.push(frobenius_norm(&(x - &x_star)));
        x_l.push(consensus_seminorm(x));
        y_l.push(consensus_seminorm(y));
        y_avg.push(average_seminorm(y));
        y_f.push(frobenius_norm(y));
    }
    let full = ErgodicNormParams::new(lambda, horizon)?;
    let half = ErgodicNormParams::new(lambda, horizon / 2)?;
    let erg = |v: &[f64]| -> Result<(f64, f64)> {
        Ok((
            ergodic_norm_of_values(v, full)?,
            ergodic_norm_of_values(v, half)?,
        ))
    };
    let (q_n, q_h) = erg(&q)?;
    let (xl_n, xl_h) = erg(&x_l)?;
    let (yl_n, yl_h) = erg(&y_l)?;
    let (ya_n, ya_h) = erg(&y_avg)?;
    let (yf_n, yf_h) = erg(&y_f)?;
    let pole = lambda / (lambda - delta);

    let arrows = vec![
        ArrowCheck::new(
            "(i) q -> y_L",
            yl_n,
            gains.gamma_11 * q_n,
            pole * y_l[0],
            yl_h,
            gains.gamma_11 * q_h,
        ),
        ArrowCheck::new(
            "(ii) q -> y_avg",
            ya_n,
            gains.gamma_12 * q_n,
            0.0,
            ya_h,
            gains.gamma_12 * q_h,
        ),
        ArrowCheck::new(
            "(iii) {y_L, y_avg} -> y_F",
            yf_n,
            yl_n + ya_n,
            0.0,
            yf_h,
            yl_h + ya_h,
        ),
        ArrowCheck::new(
            "(iv) y_F -> x_L",
            xl_n,
            gains.gamma_2 * yf_n,
            pole * x_l[0],
            xl_h,
            gains.gamma_2 * yf_h,
        ),
    ];

    let beta = default_beta(profile);
    let last_arrow = match lemma6_coeffs(profile, n, lambda, alpha_max, kappa_d, beta, DEFAULT_ETA)
    {
        Ok((g31, g32)) => {
            let mean0 = trace.iterates[0].0.column_means();
            let gap: Vec<f64> = mean0
                .iter()
                .zip(&reference.x_star)
                .map(|(a, b)| a - b)
                .collect();
            let offset = 2.0 * (n as f64).sqrt() * vector_norm(&gap);
            Some(ArrowCheck::new(
                "(v) {x_L, y_F} -> q",
                q_n,
                g31 * xl_n + g32 * yf_n,
                offset,
                q_h,
                g31 * xl_h + g32 * yf_h,
            ))
        }
        Err(Error::LastArrowCondition(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ArrowReport {
        lambda,
        horizon,
        arrows,
        last_arrow,
    })
}

/// Default dynamic range for [`resolvable_horizon`].
pub const RESOLVABLE_RANGE: f64 = 1e8;

/// Largest `K ≤ cap` with `λ^K ≥ 1/range`. Past it the weight `λ^{-K}`
/// amplifies rounding noise at the reference-solution floor (about 1e-16
/// relative) above the initial scale of the sequence, and ergodic norms
/// stop reflecting exact-arithmetic behaviour.
pub fn resolvable_horizon(lambda: f64, range: f64, cap: usize) -> usize {
    if !(lambda > 0.0 && lambda < 1.0 && range > 1.0) {
        return cap;
    }
    let k = range.ln() / -lambda.ln();
    if k >= cap as f64 {
        cap
    } else {
        k.floor() as usize
    }
}

/// Both sides of the inexact-gradient error bound at horizon `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IgdBoundCheck {
    /// `|r|^{λ,K}`.
    pub lhs: f64,
    pub gap_term: f64,
    pub initial_term: f64,
    pub noise_term: f64,
    pub holds: bool,
}

impl IgdBoundCheck {
    pub fn rhs(&self) -> f64 {
        self.gap_term + self.initial_term + self.noise_term
    }
}

/// Evaluates
/// `|r|^{λ,K} ≤ (λ√n)⁻¹ C Σ_i ‖p - s^i‖^{λ,K} + 2r_0 + √(3-θμ̄)/(λθμ̄) ‖e‖^{λ,K}`
/// with `C = √(L(1+η)/(μ̄η) + μ̂β/μ̄)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_igd_bound(
    trace: &IgdTrace,
    profile: &SmoothnessProfile,
    n: usize,
    theta: f64,
    beta: f64,
    eta: f64,
    lambda: f64,
    horizon: usize,
) -> Result<IgdBoundCheck> {
    check_igd_conditions(profile, theta, lambda, beta, eta)?;
    let params = ErgodicNormParams::new(lambda, horizon)?;
    let lhs = ergodic_norm_of_values(&trace.r, params)?;
    let mut gap_sum = 0.0;
    for i in 0..n {
        let per_agent: Vec<f64> = trace.gaps.iter().map(|g| g[i]).collect();
        gap_sum += ergodic_norm_of_values(&per_agent, params)?;
    }
    let noise = ergodic_norm_of_values(&trace.noise_norms, params)?;
    let mu_bar = profile.mu_bar();
    let gap_term = igd_gap_constant(profile, beta, eta) / (lambda * (n as f64).sqrt()) * gap_sum;
    let initial_term = 2.0 * trace.r[0];
    let noise_term = (3.0 - theta * mu_bar).sqrt() / (lambda * theta * mu_bar) * noise;
    let rhs = gap_term + initial_term + noise_term;
    Ok(IgdBoundCheck {
        lhs,
        gap_term,
        initial_term,
        noise_term,
        holds: lhs <= rhs + BOUND_SLACK * rhs.max(1.0),
    })
}

/// Iteration counts to reach `ε` accuracy implied by the DIGing and
/// ATC-DIGing rate bounds for coordinated step-sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityComparison {
    pub lambda_diging: f64,
    pub lambda_atc: f64,
    pub k_diging: u64,
    pub k_atc: u64,
}

/// `λ_D = 1 - (1-δ)²/(30√n κ̄^1.5)`;
/// `λ_A = max{1 - (1-δ)²/(2(15√n κ̄^1.5 δ² + 1)), √(1 - μ̄/(6L̄))}`.
pub fn complexity_comparison(
    profile: &SmoothnessProfile,
    delta: f64,
    n: usize,
    epsilon: f64,
) -> Result<ComplexityComparison> {
    check_delta(delta)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!(
            "epsilon = {epsilon} must lie in (0,1)"
        )));
    }
    let kb = profile.kappa_bar();
    let root_n = (n as f64).sqrt();
    let gap = (1.0 - delta).powi(2);
    let lambda_diging = 1.0 - gap / (30.0 * root_n * kb.powf(1.5));
    let atc_network = 1.0 - gap / (2.0 * (15.0 * root_n * kb.powf(1.5) * delta * delta + 1.0));
    let atc_centralized = (1.0 - profile.mu_bar() / (6.0 * profile.l_bar())).sqrt();
    let lambda_atc = atc_network.max(atc_centralized);
    let iterations = |lambda: f64| ((1.0 / epsilon).ln() / (1.0 / lambda).ln()).ceil() as u64;
    Ok(ComplexityComparison {
        lambda_diging,
        lambda_atc,
        k_diging: iterations(lambda_diging),
        k_atc: iterations(lambda_atc),
    })
}

/// Largest coordinated DIGing step-size certified by its gain condition in
/// the `λ → 1` limit, capped by the centralized `1/(2L̄)`:
/// `min{(1-δ)²/(10L√n√κ̄), 1/(2L̄)}`.
pub fn diging_max_stepsize(profile: &SmoothnessProfile, delta: f64, n: usize) -> Result<f64> {
    check_delta(delta)?;
    let network = (1.0 - delta).powi(2)
        / (10.0 * profile.l_max() * (n as f64).sqrt() * profile.kappa_bar().sqrt());
    Ok(network.min(1.0 / (2.0 * profile.l_bar())))
}

/// Outcome of an empirical R-linear check `residual_k ≤ C λ^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCheck {
    /// `max_k residual_k / λ^k`.
    pub c: f64,
    pub holds: bool,
}

/// Share of leading iterations excluded from the tail check.
pub const BURN_IN_FRACTION: f64 = 0.1;

/// `C = max_k residual_k/λ^k`; the rate holds when `C` is finite and, after
/// the first 10% of iterations, `residual_k/λ^k` never rises above its value
/// at the end of the burn-in.
pub fn check_rate_empirically(residuals: &[f64], lambda: f64) -> RateCheck {
    if residuals.is_empty() || !(lambda > 0.0 && lambda < 1.0) {
        return RateCheck {
            c: f64::NAN,
            holds: false,
        };
    }
    let log_lambda = lambda.ln();
    let log_ratio = |k: usize, r: f64| {
        if r > 0.0 {
            r.ln() - k as f64 * log_lambda
        } else {
            f64::NEG_INFINITY
        }
    };
    let logs: Vec<f64> = residuals
        .iter()
        .enumerate()
        .map(|(k, &r)| log_ratio(k, r))
        .collect();
    let c = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp();
    let burn = ((residuals.len() as f64) * BURN_IN_FRACTION).ceil() as usize;
    let burn = burn.min(residuals.len() - 1);
    let anchor = logs[burn];
    let tail_ok = logs[burn..]
        .iter()
        .all(|&l| l == f64::NEG_INFINITY || l <= anchor + 1e-9);
    RateCheck {
        c,
        holds: c.is_finite() && tail_ok,
    }
}

/// Least-squares line through `(k, ln value_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl LogLinearFit {
    /// Per-iteration contraction `exp(slope)`.
    pub fn rate(&self) -> f64 {
        self.slope.exp()
    }
}

/// Fits `ln value_k` against `k` over `first..values.len()`, skipping
/// non-positive values. `None` with fewer than two usable points.
pub fn fit_log_linear(values: &[f64], first: usize) -> Option<LogLinearFit> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .skip(first)
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(k, &v)| (k as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mean_k = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_l = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_k).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_k) * (p.1 - mean_l)).sum();
    let slope = sxy / sxx;
    let intercept = mean_l - slope * mean_k;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_l).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Some(LogLinearFit {
        slope,
        intercept,
        r_squared,
        points: pts.len(),
    })
}

/// Fit over the tail window `[K/2, K]` of a residual sequence `0..=K`.
pub fn tail_fit(values: &[f64]) -> Option<LogLinearFit> {
    let horizon = values.len().checked_sub(1)?;
    fit_log_linear(values, horizon / 2)
}

/// One row of the rate-verification report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReportRow {
    pub delta: f64,
    pub n: usize,
    pub kappa_d: f64,
    pub kappa_bar: f64,
    pub alpha_max: f64,
    pub lambda_theory: f64,
    pub lambda_measured: f64,
    pub c: f64,
}

pub const RATE_REPORT_HEADER: &str =
    "delta,n,kappa_D,kappa_bar,alpha_max,lambda_theory,lambda_measured,C";

pub fn rate_report_csv(rows: &[RateReportRow]) -> String {
    let mut out = format!("{RATE_REPORT_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            format_decimal(r.delta),
            r.n,
            format_decimal(r.kappa_d),
            format_decimal(r.kappa_bar),
            format_decimal(r.alpha_max),
            format_decimal(r.lambda_theory),
            format_decimal(r.lambda_measured),
            format_decimal(r.c),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_profile(n: usize) -> SmoothnessProfile {
        SmoothnessProfile::uniform(n, 1.0, 1.0).unwrap()
    }

    #[test]
    fn max_stepsize_zero_delta() {
        let p = SmoothnessProfile::new(vec![1.0, 3.0], vec![0.5, 1.0]).unwrap();
        assert_eq!(max_stepsize(&p, 0.0, 2, 1.0).unwrap(), 1.0 / (2.0 * 2.0));
    }

    #[test]
    fn max_stepsize_plugged_example() {
        // (0.5 * 0.5) / (10 * 1 * 0.5 * 2 * 1) = 0.025
        let got = max_stepsize(&unit_profile(4), 0.5, 4, 1.0).unwrap();
        assert!((got - 0.025).abs() < 1e-16);
    }

    #[test]
    fn max_stepsize_infeasible_heterogeneity() {
        let p = SmoothnessProfile::uniform(4, 10.0, 1.0).unwrap();
        let err = max_stepsize(&p, 0.2, 4, 1.5).unwrap_err();
        match err {
            Error::HeterogeneityTooLarge { limit, .. } => {
                assert!((limit - (1.0 + 0.8 / (4.0 * 3f64.sqrt() * 10.0))).abs() < 1e-15)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rate_zero_delta_homogeneous() {
        let p = SmoothnessProfile::new(vec![2.0, 2.0], vec![0.5, 1.5]).unwrap();
        let alpha = 0.2;
        let lambda = theorem1_rate(&p, 0.0, 2, 1.0, alpha).unwrap();
        assert_eq!(lambda, (1.0 - alpha * 1.0 / 3.0).sqrt());
    }

    #[test]
    fn rate_arithmetic_example() {
        let p = unit_profile(4);
        let (a, b) = theorem1_branches(&p, 0.5, 4, 1.0, 0.02);
        assert!((a - (0.2f64.sqrt() + 0.5)).abs() < 1e-15);
        assert!((a - 0.947_213_595_5).abs() < 1e-9);
        assert!((b - 0.996_661_092_5).abs() < 1e-9);
        let lambda = theorem1_rate(&p, 0.5, 4, 1.0, 0.02).unwrap();
        assert_eq!(lambda, b);
    }

    #[test]
    fn rate_rejects_step_outside_interval() {
        assert!(theorem1_rate(&unit_profile(4), 0.5, 4, 1.0, 0.03).is_err());
        assert!(theorem1_rate(&unit_profile(4), 0.5, 4, 1.0, 0.0).is_err());
    }

    #[test]
    fn lemma4_examples() {
        let g = lemma4_gains(2.0, 0.0, 0.9, 0.1).unwrap();
        assert_eq!((g.gamma_11, g.gamma_12, g.gamma_2), (0.0, 2.0, 0.0));
        let g = lemma4_gains(2.0, 0.5, 0.9, 0.1).unwrap();
        assert!((g.gamma_11 - 4.75).abs() < 1e-14);
        assert_eq!(g.gamma_12, 2.0);
        assert!((g.gamma_2 - 0.125).abs() < 1e-15);
        assert!(matches!(
            lemma4_gains(2.0, 0.5, 0.5, 0.1),
            Err(Error::LambdaBelowDelta { .. })
        ));
        let near = lemma4_gains(2.0, 0.5, 0.5 + 1e-6, 0.1).unwrap();
        let nearer = lemma4_gains(2.0, 0.5, 0.5 + 1e-8, 0.1).unwrap();
        assert!(nearer.gamma_11 > near.gamma_11 && nearer.gamma_2 > near.gamma_2);
    }

    #[test]
    fn lemma6_homogeneous_has_no_tracker_term() {
        let p = SmoothnessProfile::new(vec![2.0, 3.0], vec![1.0, 1.5]).unwrap();
        let alpha = 0.1;
        let (_, g32) = lemma6_coeffs(&p, 2, 0.99, alpha, 1.0, default_beta(&p), 1.0).unwrap();
        assert_eq!(g32, 0.0);
    }

    #[test]
    fn lemma6_default_choices_give_two_root_kappa() {
        let p = SmoothnessProfile::new(vec![2.0, 4.0, 3.0], vec![0.5, 1.0, 0.25]).unwrap();
        let beta = default_beta(&p);
        let inner = igd_gap_constant(&p, beta, 1.0);
        assert!((inner - 2.0 * p.kappa_bar().sqrt()).abs() < 1e-12);

        let single = SmoothnessProfile::new(vec![4.0], vec![1.0]).unwrap();
        let lambda = 1.0 - 1e-12;
        let (g31, _) =
            lemma6_coeffs(&single, 1, lambda, 0.05, 1.0, default_beta(&single), 1.0).unwrap();
        assert!((g31 - (1.0 + 2.0 * 2.0)).abs() < 1e-9);
    }

    #[test]
    fn lemma6_conditions_enforced() {
        let p = unit_profile(2);
        assert!(lemma6_coeffs(&p, 2, 0.999, 0.6, 1.0, 2.0, 1.0).is_err());
        assert!(lemma6_coeffs(&p, 2, 0.5, 0.1, 1.0, 2.0, 1.0).is_err());
        assert!(lemma6_coeffs(&p, 2, 0.999, 0.1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn small_gain_examples() {
        assert_eq!(small_gain_bound(&[0.5], &[1.0]).unwrap(), 2.0);
        let b = small_gain_bound(&[0.5, 0.5], &[1.0, 1.0]).unwrap();
        assert!((b - 2.0).abs() < 1e-15);
        assert_eq!(small_gain_bound(&[0.3, 0.9, 0.2], &[0.0; 3]).unwrap(), 0.0);
        assert!(matches!(
            small_gain_bound(&[2.0, 0.5], &[1.0, 1.0]),
            Err(Error::GainProductNotContractive { .. })
        ));
        assert!(small_gain_bound(&[], &[]).is_err());
    }

    #[test]
    fn ledger_feasibility_flag() {
        let p = SmoothnessProfile::uniform(4, 1.0, 0.8).unwrap();
        let alpha = 0.02;
        let lambda = 0.999;
        let l =
            GainLedger::evaluate(&p, 0.1, 4, 1.0, lambda, alpha, default_beta(&p), 1.0).unwrap();
        let product = (l.gamma_11 + l.gamma_12) * (l.gamma_2 * l.gamma_31 + l.gamma_32);
        assert_eq!(l.product, product);
        assert_eq!(l.feasible, product < 1.0);
    }

    #[test]
    fn complexity_examples() {
        let p = SmoothnessProfile::uniform(12, 10.0, 1.0).unwrap();
        let c = complexity_comparison(&p, 0.9, 12, 1e-6).unwrap();
        let kb: f64 = 10.0;
        let ld = 1.0 - 0.01 / (30.0 * 12f64.sqrt() * kb.powf(1.5));
        let la = (1.0 - 0.01 / (2.0 * (15.0 * 12f64.sqrt() * kb.powf(1.5) * 0.81 + 1.0)))
            .max((1.0 - 1.0 / 60.0f64).sqrt());
        assert!((c.lambda_diging - ld).abs() < 1e-15);
        assert!((c.lambda_atc - la).abs() < 1e-15);
        let ratio = c.k_diging as f64 / c.k_atc as f64;
        let formula_ratio = (1.0 / la).ln() / (1.0 / ld).ln();
        assert!((ratio - formula_ratio).abs() / formula_ratio < 1e-4);
        assert!(complexity_comparison(&p, 1.0, 12, 1e-6).is_err());
        assert!(complexity_comparison(&p, 0.5, 12, 1.0).is_err());
    }

    #[test]
    fn complexity_single_agent_centralized() {
        let p = SmoothnessProfile::uniform(1, 20.0, 1.0).unwrap();
        let c = complexity_comparison(&p, 0.0, 1, 1e-6).unwrap();
        let central = (1.0 - 1.0 / 120.0f64).sqrt();
        assert_eq!(c.lambda_atc, central);
        assert!(c.k_atc <= c.k_diging);
    }

    #[test]
    fn complexity_small_delta_favours_atc() {
        let p = SmoothnessProfile::uniform(10, 50.0, 1.0).unwrap();
        let c = complexity_comparison(&p, 1e-3, 10, 1e-8).unwrap();
        assert_eq!(c.lambda_atc, (1.0 - 1.0 / 300.0f64).sqrt());
        assert!(c.k_atc < c.k_diging);
    }

    #[test]
    fn rate_check_examples() {
        let trace: Vec<f64> = (0..200).map(|k| 0.9f64.powi(k)).collect();
        let ok = check_rate_empirically(&trace, 0.9);
        assert!(ok.holds);
        assert!((ok.c - 1.0).abs() < 1e-9);
        let bad = check_rate_empirically(&trace, 0.8);
        assert!(!bad.holds);
        let longer: Vec<f64> = (0..400).map(|k| 0.9f64.powi(k)).collect();
        assert!(check_rate_empirically(&longer, 0.8).c > bad.c * 1e10);
    }

    #[test]
    fn log_linear_fit_exact_geometric() {
        let vals: Vec<f64> = (0..50).map(|k| 3.0 * 0.7f64.powi(k)).collect();
        let fit = tail_fit(&vals).unwrap();
        assert!((fit.rate() - 0.7).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.points, 26);
        assert!(fit_log_linear(&[1.0], 0).is_none());
    }

    #[test]
    fn resolvable_horizon_caps() {
        assert_eq!(resolvable_horizon(0.5, 1024.0, 100), 10);
        assert_eq!(resolvable_horizon(0.999_999, 1e8, 500), 500);
    }

    #[test]
    fn rate_report_header() {
        let csv = rate_report_csv(&[RateReportRow {
            delta: 0.5,
            n: 4,
            kappa_d: 1.0,
            kappa_bar: 2.0,
            alpha_max: 0.01,
            lambda_theory: 0.99,
            lambda_measured: 0.9,
            c: 1.5,
        }]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(RATE_REPORT_HEADER));
        assert_eq!(lines.next().unwrap().split(',').count(), 8);
    }
}
