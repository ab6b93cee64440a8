//! ATC-DIGing, DIGing and the inexact gradient descent harness.

mod igd;
mod run;
mod schedule;
mod step;

pub use igd::{igd_run, IgdRun, IgdTrace};
pub use run::{
    format_decimal, parse_trace_csv, records_to_csv, run, Algorithm, RunOptions, RunStatus,
    RunTrace, TraceRecord, CSV_HEADER, DIVERGENCE_FACTOR,
};
pub use schedule::{realize_schedule, RealizedSteps, StepSizeSchedule};
pub use step::{atc_diging_step, diging_step, SolverState};
