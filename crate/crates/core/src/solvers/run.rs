use std::borrow::Cow;
use std::fmt::Write as _;

use super::schedule::StepSizeSchedule;
use super::step::{atc_diging_step, diging_step, SolverState};
use crate::error::{Error, Result};
use crate::linalg::{consensus_seminorm, frobenius_norm, StackedMatrix};
use crate::network::{metropolis_weights, GraphSequence, MixingMatrix};
use crate::objectives::{ProblemInstance, ReferenceSolution};

/// Residual growth factor over the initial residual treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

pub const CSV_HEADER: &str =
    "k,residual,normalized_residual,consensus_violation,tracker_seminorm,tracker_norm,kappa_D";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    AtcDiging,
    Diging,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AtcDiging => "atc_diging",
            Algorithm::Diging => "diging",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "atc_diging" => Some(Algorithm::AtcDiging),
            "diging" => Some(Algorithm::Diging),
            _ => None,
        }
    }

    pub fn step(
        self,
        state: &SolverState,
        w: &MixingMatrix,
        alphas: &[f64],
        inst: &ProblemInstance,
    ) -> Result<SolverState> {
        match self {
            Algorithm::AtcDiging => atc_diging_step(state, w, alphas, inst),
            Algorithm::Diging => diging_step(state, w, alphas, inst),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub algorithm: Algorithm,
    /// Maximum number of iterations `K`.
    pub iterations: usize,
    /// Stop early once the normalized residual drops to this level.
    pub stop_tolerance: Option<f64>,
    /// Keep every `(x_k, y_k)` for ergodic-norm checks.
    pub store_iterates: bool,
}

impl RunOptions {
    pub fn new(algorithm: Algorithm, iterations: usize) -> Self {
        Self {
            algorithm,
            iterations,
            stop_tolerance: None,
            store_iterates: false,
        }
    }

    pub fn stop_at(mut self, tol: f64) -> Self {
        self.stop_tolerance = Some(tol);
        self
    }

    pub fn storing_iterates(mut self) -> Self {
        self.store_iterates = true;
        self
    }
}

/// One CSV row of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    /// `‖x_k - x*‖_F`.
    pub residual: f64,
    pub normalized_residual: f64,
    /// `‖x_k‖_Ł`.
    pub consensus_violation: f64,
    /// `‖y_k‖_Ł`.
    pub tracker_seminorm: f64,
    /// `‖y_k‖_F`.
    pub tracker_norm: f64,
    /// Heterogeneity of the step-sizes realized at iteration `k`.
    pub kappa_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// All requested iterations ran.
    Completed,
    /// Stopped early at the configured tolerance.
    Converged,
    Diverged {
        iteration: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub records: Vec<TraceRecord>,
    /// Per-iterate tracking conservation error, see [`SolverState::tracking_error`].
    pub tracking_errors: Vec<f64>,
    /// `(x_k, y_k)` when requested.
    pub iterates: Vec<(StackedMatrix, StackedMatrix)>,
    pub status: RunStatus,
}

impl RunTrace {
    /// Iterations actually performed.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }

    pub fn normalized_residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.normalized_residual).collect()
    }

    pub fn final_normalized_residual(&self) -> f64 {
        self.records
            .last()
            .map_or(f64::NAN, |r| r.normalized_residual)
    }

    /// Mean `κ_D` over the step-sizes actually applied.
    pub fn mean_kappa_d(&self) -> f64 {
        let applied = &self.records[..self.iterations().max(1).min(self.records.len())];
        applied.iter().map(|r| r.kappa_d).sum::<f64>() / applied.len() as f64
    }

    pub fn max_tracking_error(&self) -> f64 {
        self.tracking_errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        records_to_csv(&self.records)
    }
}

pub fn records_to_csv(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 160);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            format_decimal(r.residual),
            format_decimal(r.normalized_residual),
            format_decimal(r.consensus_violation),
            format_decimal(r.tracker_seminorm),
            format_decimal(r.tracker_norm),
            format_decimal(r.kappa_d),
        );
    }
    out
}

/// Positional decimal notation with at least 17 significant digits, enough
/// for an exact round trip through `f64` parsing.
pub fn format_decimal(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0.0".to_string();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (17 - exponent).clamp(1, 400) as usize;
    format!("{v:.decimals$}")
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header `{CSV_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::parse(
                no,
                format!("expected 7 fields, found {}", fields.len()),
            ));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::parse(no, format!("bad number `{s}`: {e}")))
        };
        out.push(TraceRecord {
            k: fields[0]
                .parse()
                .map_err(|e| Error::parse(no, format!("bad iteration `{}`: {e}", fields[0])))?,
            residual: num(fields[1])?,
            normalized_residual: num(fields[2])?,
            consensus_violation: num(fields[3])?,
            tracker_seminorm: num(fields[4])?,
            tracker_norm: num(fields[5])?,
            kappa_d: num(fields[6])?,
        });
    }
    Ok(out)
}

struct Recorder<'a> {
    x_star: &'a StackedMatrix,
    initial_residual: f64,
}

impl Recorder<'_> {
    fn record(&self, state: &SolverState, kappa_d: f64) -> TraceRecord {
        let residual = frobenius_norm(&(&state.x - self.x_star));
        let normalized_residual = if self.initial_residual > 0.0 {
            residual / self.initial_residual
        } else {
            0.0
        };
        TraceRecord {
            k: state.k,
            residual,
            normalized_residual,
            consensus_violation: consensus_seminorm(&state.x),
            tracker_seminorm: consensus_seminorm(&state.y),
            tracker_norm: frobenius_norm(&state.y),
            kappa_d,
        }
    }
}

/// Runs DIGing-family iterations from `x0`, one mixing matrix per iteration
/// from `graphs` and one step-size realization per iteration from `schedule`.
pub fn run(
    inst: &ProblemInstance,
    graphs: &GraphSequence,
    schedule: &StepSizeSchedule,
    reference: &ReferenceSolution,
    x0: StackedMatrix,
    options: &RunOptions,
) -> Result<RunTrace> {
    if options.iterations == 0 {
        return Err(Error::invalid("a run needs at least one iteration"));
    }
    let n = inst.agents();
    if graphs.node_count() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("graph on {n} nodes"),
            actual: format!("{} nodes", graphs.node_count()),
        });
    }
    let x_star = reference.stacked(n);
    let mut state = SolverState::initial(inst, x0)?;
    let recorder = Recorder {
        initial_residual: frobenius_norm(&(&state.x - &x_star)),
        x_star: &x_star,
    };
    let static_w = match graphs {
        GraphSequence::Static(g) => Some(metropolis_weights(g)),
        GraphSequence::TimeVarying { .. } => None,
    };

    let mut trace = RunTrace {
        algorithm: options.algorithm,
        records: Vec::with_capacity(options.iterations + 1),
        tracking_errors: Vec::with_capacity(options.iterations + 1),
        iterates: Vec::new(),
        status: RunStatus::Completed,
    };
    let mut steps = schedule.realize(0, n)?;
    let push = |trace: &mut RunTrace, state: &SolverState, kappa: f64| {
        trace.records.push(recorder.record(state, kappa));
        trace.tracking_errors.push(state.tracking_error());
        if options.store_iterates {
            trace.iterates.push((state.x.clone(), state.y.clone()));
        }
    };
    push(&mut trace, &state, steps.kappa_d());

    for k in 0..options.iterations {
        if let Some(tol) = options.stop_tolerance {
            if trace.final_normalized_residual() <= tol {
                trace.status = RunStatus::Converged;
                break;
            }
        }
        let w = match &static_w {
            Some(w) => Cow::Borrowed(w),
            None => Cow::Owned(metropolis_weights(&graphs.next_graph(k))),
        };
        let next = match options.algorithm.step(&state, &w, &steps.alphas, inst) {
            Ok(s) => s,
            Err(Error::Diverged { iteration, .. }) => {
                trace.status = RunStatus::Diverged { iteration };
                return Err(Error::Diverged {
                    iteration,
                    trace: Some(Box::new(trace)),
                });
            }
            Err(e) => return Err(e),
        };
        state = next;
        steps = schedule.realize(k + 1, n)?;
        push(&mut trace, &state, steps.kappa_d());
        let last = trace.records.last().expect("just pushed");
        if last.residual > DIVERGENCE_FACTOR * recorder.initial_residual.max(f64::MIN_POSITIVE) {
            trace.status = RunStatus::Diverged { iteration: state.k };
            return Err(Error::Diverged {
                iteration: state.k,
                trace: Some(Box::new(trace)),
            });
        }
    }
    Ok(trace)
}
