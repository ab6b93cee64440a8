//! Rate verification over a grid of static-graph, constant
//! step-size runs, plus the coordinated-step complexity table.

use std::fmt::Write as _;
use std::path::Path;

use diging::network::metropolis_weights;
use diging::objectives::REFERENCE_TOL;
use diging::rates::{
    check_rate_empirically, complexity_comparison, max_stepsize, rate_report_csv, tail_fit,
    theorem1_rate, ComplexityComparison, RateReportRow,
};
use diging::solvers::{format_decimal, run};
use diging::{
    Algorithm, Error, GraphSequence, ProblemInstance, RunOptions, SmoothnessProfile, StackedMatrix,
    StepSizeSchedule,
};

use crate::config::{BoundsConfig, Topology};
use crate::{ensure_dir, write_file, BenchError};

/// Allowed excess of the measured log-rate over `ln λ`.
pub const LOG_RATE_TOLERANCE: f64 = 1e-3;

pub const INFEASIBLE_HEADER: &str = "topology,delta,n,kappa_D,kappa_bar,alpha_fraction,reason";
pub const COMPLEXITY_HEADER: &str =
    "delta,n,kappa_bar,epsilon,lambda_diging,lambda_atc,K_diging,K_atc";

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub topology: Topology,
    pub row: RateReportRow,
    pub alpha_fraction: f64,
    /// Tail fit quality of the measured rate.
    pub r_squared: f64,
    /// `ln λ_measured ≤ ln λ_theory + tolerance`.
    pub within_bound: bool,
    /// Outcome of the `residual_k ≤ C λ^k` tail check.
    pub envelope_holds: bool,
    pub max_tracking_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfeasiblePoint {
    pub topology: Topology,
    pub delta: f64,
    pub n: usize,
    pub kappa_d: f64,
    pub kappa_bar: f64,
    pub alpha_fraction: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub delta: f64,
    pub n: usize,
    pub kappa_bar: f64,
    pub epsilon: f64,
    pub result: ComplexityComparison,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSuiteReport {
    pub feasible: Vec<GridPoint>,
    pub infeasible: Vec<InfeasiblePoint>,
    pub complexity: Vec<ComplexityRow>,
}

impl BoundSuiteReport {
    pub fn violations(&self) -> Vec<&GridPoint> {
        self.feasible.iter().filter(|p| !p.within_bound).collect()
    }
}

/// Per-agent constant step-sizes spread evenly over `[α_max/κ_D, α_max]`.
pub fn spread_alphas(n: usize, alpha_max: f64, kappa_d: f64) -> Vec<f64> {
    let lo = alpha_max / kappa_d;
    if n == 1 {
        return vec![alpha_max];
    }
    (0..n)
        .map(|i| {
            if i + 1 == n {
                alpha_max
            } else {
                lo + (alpha_max - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Runs the whole grid and the complexity table; writes `rates.csv`,
/// `infeasible.csv` and `complexity.csv` into `output_dir`.
pub fn run_bound_suite(
    cfg: &BoundsConfig,
    base_dir: &Path,
    output_dir: &Path,
) -> Result<BoundSuiteReport, BenchError> {
    ensure_dir(output_dir)?;
    let inst = cfg.problem.build(base_dir)?;
    let mut report = BoundSuiteReport {
        feasible: Vec::new(),
        infeasible: Vec::new(),
        complexity: Vec::new(),
    };
    grid(cfg, &inst, &mut report)?;
    for &delta in &cfg.complexity.deltas {
        for &kappa_bar in &cfg.complexity.kappa_bars {
            for &n in &cfg.complexity.agents {
                let profile = SmoothnessProfile::uniform(n, kappa_bar, 1.0)?;
                let result = complexity_comparison(&profile, delta, n, cfg.complexity.epsilon)?;
                report.complexity.push(ComplexityRow {
                    delta,
                    n,
                    kappa_bar,
                    epsilon: cfg.complexity.epsilon,
                    result,
                });
            }
        }
    }
    let rows: Vec<RateReportRow> = report.feasible.iter().map(|p| p.row).collect();
    write_file(&output_dir.join("rates.csv"), &rate_report_csv(&rows))?;
    write_file(
        &output_dir.join("infeasible.csv"),
        &infeasible_csv(&report.infeasible),
    )?;
    write_file(
        &output_dir.join("complexity.csv"),
        &complexity_csv(&report.complexity),
    )?;
    Ok(report)
}

fn grid(
    cfg: &BoundsConfig,
    inst: &ProblemInstance,
    report: &mut BoundSuiteReport,
) -> Result<(), BenchError> {
    let n = inst.agents();
    let profile = inst.profile();
    let reference = inst.solve_reference(REFERENCE_TOL)?;
    for &topology in &cfg.grid.topologies {
        let graph = topology.build(n);
        let delta = metropolis_weights(&graph).delta();
        let graphs = GraphSequence::Static(graph);
        for &kappa_d in &cfg.grid.kappa_d {
            for &fraction in &cfg.grid.alpha_fractions {
                let cap = match max_stepsize(profile, delta, n, kappa_d) {
                    Ok(c) => c,
                    Err(e @ Error::HeterogeneityTooLarge { .. }) => {
                        report.infeasible.push(InfeasiblePoint {
                            topology,
                            delta,
                            n,
                            kappa_d,
                            kappa_bar: profile.kappa_bar(),
                            alpha_fraction: fraction,
                            reason: e.to_string(),
                        });
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                let alpha_max = fraction * cap;
                let lambda = theorem1_rate(profile, delta, n, kappa_d, alpha_max)?;
                let schedule = StepSizeSchedule::constant(spread_alphas(n, alpha_max, kappa_d))?;
                let mut options = RunOptions::new(Algorithm::AtcDiging, cfg.iterations);
                if let Some(t) = cfg.stop_tolerance {
                    options = options.stop_at(t);
                }
                let x0 = StackedMatrix::zeros(n, inst.dim());
                let trace = run(inst, &graphs, &schedule, &reference, x0, &options)?;
                let residuals = trace.residuals();
                let fit = tail_fit(&trace.normalized_residuals()).ok_or_else(|| {
                    BenchError::Analysis(format!("grid point {} too short to fit", topology.name()))
                })?;
                let envelope = check_rate_empirically(&residuals, lambda);
                let measured = fit.rate();
                report.feasible.push(GridPoint {
                    topology,
                    alpha_fraction: fraction,
                    r_squared: fit.r_squared,
                    within_bound: measured.ln() <= lambda.ln() + LOG_RATE_TOLERANCE,
                    envelope_holds: envelope.holds,
                    max_tracking_error: trace.max_tracking_error(),
                    row: RateReportRow {
                        delta,
                        n,
                        kappa_d: schedule.realize(0, n)?.kappa_d(),
                        kappa_bar: profile.kappa_bar(),
                        alpha_max,
                        lambda_theory: lambda,
                        lambda_measured: measured,
                        c: envelope.c,
                    },
                });
            }
        }
    }
    Ok(())
}

pub fn infeasible_csv(rows: &[InfeasiblePoint]) -> String {
    let mut out = format!("{INFEASIBLE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},\"{}\"",
            r.topology.name(),
            format_decimal(r.delta),
            r.n,
            format_decimal(r.kappa_d),
            format_decimal(r.kappa_bar),
            format_decimal(r.alpha_fraction),
            r.reason.replace('"', "'"),
        );
    }
    out
}

pub fn complexity_csv(rows: &[ComplexityRow]) -> String {
    let mut out = format!("{COMPLEXITY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            format_decimal(r.delta),
            r.n,
            format_decimal(r.kappa_bar),
            format_decimal(r.epsilon),
            format_decimal(r.result.lambda_diging),
            format_decimal(r.result.lambda_atc),
            r.result.k_diging,
            r.result.k_atc,
        );
    }
    out
}
