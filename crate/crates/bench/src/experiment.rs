//! Runs every (algorithm, seed) pair of an [`ExperimentConfig`], writing one
//! trace CSV per run and a `summary.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use diging::network::metropolis_weights;
use diging::objectives::REFERENCE_TOL;
use diging::rates::{max_stepsize, tail_fit, theorem1_rate};
use diging::solvers::{format_decimal, run, RunStatus};
use diging::{
    Algorithm, Error, GraphSequence, ProblemInstance, ReferenceSolution, RunOptions, RunTrace,
    StackedMatrix, StepSizeSchedule,
};
use rayon::prelude::*;

use crate::config::{derive_seed, ExperimentConfig, ScheduleConfig};
use crate::{ensure_dir, write_file, BenchError};

pub const SUMMARY_HEADER: &str = "algorithm,seed,status,iterations,final_normalized_residual,measured_rate,r_squared,lambda_theory,mean_kappa_d,max_tracking_error,trace_file";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub status: RunStatus,
    pub iterations: usize,
    pub final_normalized_residual: f64,
    /// `exp` of the log-residual slope over the tail `[K/2, K]`.
    pub measured_rate: Option<f64>,
    pub r_squared: Option<f64>,
    /// Explicit rate bound, for ATC-DIGing on static graphs with constant
    /// step-sizes inside the admissible interval.
    pub lambda_theory: Option<f64>,
    pub mean_kappa_d: f64,
    pub max_tracking_error: f64,
    pub trace_file: String,
}

impl SummaryRow {
    pub fn diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged { .. })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    pub summary: Vec<SummaryRow>,
    pub traces: Vec<RunTrace>,
}

impl ExperimentOutcome {
    pub fn any_diverged(&self) -> bool {
        self.summary.iter().any(SummaryRow::diverged)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_decimal).unwrap_or_default()
}

fn status_name(s: RunStatus) -> String {
    match s {
        RunStatus::Completed => "completed".into(),
        RunStatus::Converged => "converged".into(),
        RunStatus::Diverged { iteration } => format!("diverged@{iteration}"),
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.algorithm.name(),
            r.seed,
            status_name(r.status),
            r.iterations,
            format_decimal(r.final_normalized_residual),
            opt(r.measured_rate),
            opt(r.r_squared),
            opt(r.lambda_theory),
            format_decimal(r.mean_kappa_d),
            format_decimal(r.max_tracking_error),
            r.trace_file,
        );
    }
    out
}

/// `α⊖` or the per-agent alphas, resolving `surrogate_fraction` against the
/// complete-graph, coordinated-step surrogate (`δ = 0`, `κ_D = 1`), whose
/// admissible cap is `1/(2L̄)`.
pub fn build_schedule(
    cfg: &ScheduleConfig,
    inst: &ProblemInstance,
    run_seed: u64,
) -> Result<StepSizeSchedule, BenchError> {
    let n = inst.agents();
    let surrogate = |f: f64| -> Result<f64, BenchError> {
        if !(f > 0.0 && f <= 1.0) {
            return Err(BenchError::Config {
                message: format!("schedule.surrogate_fraction = {f} must lie in (0, 1]"),
            });
        }
        Ok(f * max_stepsize(inst.profile(), 0.0, n, 1.0)?)
    };
    let schedule = match cfg {
        ScheduleConfig::Constant {
            alpha,
            alphas,
            surrogate_fraction,
        } => match (alpha, alphas, surrogate_fraction) {
            (Some(a), _, _) => StepSizeSchedule::uniform(n, *a),
            (_, Some(list), _) => {
                if list.len() != n {
                    return Err(BenchError::Config {
                        message: format!(
                            "schedule.alphas has {} entries for {n} agents",
                            list.len()
                        ),
                    });
                }
                StepSizeSchedule::constant(list.clone())
            }
            (_, _, Some(f)) => StepSizeSchedule::uniform(n, surrogate(*f)?),
            _ => unreachable!("validated"),
        },
        ScheduleConfig::Perturbed {
            alpha,
            surrogate_fraction,
            lo,
            hi,
        } => {
            let base = match (alpha, surrogate_fraction) {
                (Some(a), _) => *a,
                (_, Some(f)) => surrogate(*f)?,
                _ => unreachable!("validated"),
            };
            StepSizeSchedule::perturbed(base, *lo, *hi, derive_seed(run_seed, 2))
        }
    };
    schedule.map_err(|e| BenchError::Config {
        message: format!("schedule: {e}"),
    })
}

fn lambda_theory(
    algorithm: Algorithm,
    inst: &ProblemInstance,
    graphs: &GraphSequence,
    schedule: &StepSizeSchedule,
) -> Option<f64> {
    if algorithm != Algorithm::AtcDiging || !schedule.is_constant() {
        return None;
    }
    let GraphSequence::Static(g) = graphs else {
        return None;
    };
    let delta = metropolis_weights(g).delta();
    let steps = schedule.realize(0, inst.agents()).ok()?;
    theorem1_rate(
        inst.profile(),
        delta,
        inst.agents(),
        steps.kappa_d(),
        steps.alpha_max(),
    )
    .ok()
}

struct Job {
    algorithm: Algorithm,
    seed: u64,
}

/// Solves the reference once, runs every job (in parallel) and writes
/// `problem.txt`, one `<algorithm>_seed<seed>.csv` per run and
/// `summary.csv` into `output_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    output_dir: &Path,
) -> Result<ExperimentOutcome, BenchError> {
    cfg.validate()?;
    ensure_dir(output_dir)?;
    let inst = cfg.problem.build(base_dir)?;
    let reference = inst.solve_reference(REFERENCE_TOL)?;
    write_file(&output_dir.join("problem.txt"), &inst.to_text())?;

    let jobs: Vec<Job> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| {
            cfg.seeds.iter().map(move |&seed| Job {
                algorithm: a.into(),
                seed,
            })
        })
        .collect();
    let results: Vec<Result<(SummaryRow, RunTrace), BenchError>> = jobs
        .par_iter()
        .map(|job| run_job(cfg, &inst, &reference, job, base_dir, output_dir))
        .collect();
    let mut summary = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for r in results {
        let (row, trace) = r?;
        summary.push(row);
        traces.push(trace);
    }
    write_file(&output_dir.join("summary.csv"), &summary_csv(&summary))?;
    Ok(ExperimentOutcome {
        output_dir: output_dir.to_path_buf(),
        summary,
        traces,
    })
}

fn run_job(
    cfg: &ExperimentConfig,
    inst: &ProblemInstance,
    reference: &ReferenceSolution,
    job: &Job,
    base_dir: &Path,
    output_dir: &Path,
) -> Result<(SummaryRow, RunTrace), BenchError> {
    let n = inst.agents();
    let graphs = cfg.network.build(n, job.seed, base_dir)?;
    let schedule = build_schedule(&cfg.schedule, inst, job.seed)?;
    let mut options = RunOptions::new(job.algorithm, cfg.iterations);
    if let Some(t) = cfg.stop_tolerance {
        options = options.stop_at(t);
    }
    let x0 = StackedMatrix::zeros(n, inst.dim());
    let trace = match run(inst, &graphs, &schedule, reference, x0, &options) {
        Ok(t) => t,
        Err(Error::Diverged {
            trace: Some(partial),
            ..
        }) => *partial,
        Err(e) => return Err(e.into()),
    };
    let file = format!("{}_seed{}.csv", job.algorithm.name(), job.seed);
    let csv = trace.to_csv();
    write_file(&output_dir.join(&file), &csv)?;

    let fit = match trace.status {
        RunStatus::Diverged { .. } => None,
        _ => tail_fit(&trace.normalized_residuals()),
    };
    let row = SummaryRow {
        algorithm: job.algorithm,
        seed: job.seed,
        status: trace.status,
        iterations: trace.iterations(),
        final_normalized_residual: trace.final_normalized_residual(),
        measured_rate: fit.map(|f| f.rate()),
        r_squared: fit.map(|f| f.r_squared),
        lambda_theory: lambda_theory(job.algorithm, inst, &graphs, &schedule),
        mean_kappa_d: trace.mean_kappa_d(),
        max_tracking_error: trace.max_tracking_error(),
        trace_file: file,
    };
    Ok((row, trace))
}
