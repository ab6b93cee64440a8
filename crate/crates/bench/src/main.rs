use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use diging_bench::config::{config_base_dir, read_config_text, resolve_output_dir, OUTPUT_DIR_ENV};
use diging_bench::{
    plot_csv_files, run_bound_suite, run_experiment, BenchError, BoundsConfig, ExperimentConfig,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

/// ATC-DIGing experiments, bound verification and plots.
#[derive(Parser)]
#[command(name = "diging", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, seed) pair of an experiment config.
    Run { config: PathBuf },
    /// Check rate bounds on a grid and emit the complexity table.
    Bounds { config: PathBuf },
    /// Plot normalized residuals of trace CSVs as SVG.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn env_output_dir() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn exit_code(e: &BenchError) -> u8 {
    match e {
        BenchError::Config { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn execute(cli: Cli) -> Result<u8, BenchError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::parse(&read_config_text(&config)?)?;
            let base = config_base_dir(&config);
            let out = resolve_output_dir(&cfg.output_dir, &base, env_output_dir());
            let outcome = run_experiment(&cfg, &base, &out)?;
            for row in &outcome.summary {
                println!(
                    "{:<10} seed {:<6} {:>6} iterations  residual {:.3e}  rate {}",
                    row.algorithm.name(),
                    row.seed,
                    row.iterations,
                    row.final_normalized_residual,
                    row.measured_rate.map_or("-".into(), |r| format!("{r:.6}")),
                );
            }
            println!("wrote {}", out.display());
            if outcome.any_diverged() {
                eprintln!("at least one run diverged; see summary.csv");
                return Ok(EXIT_DIVERGED);
            }
            Ok(0)
        }
        Command::Bounds { config } => {
            let cfg = BoundsConfig::parse(&read_config_text(&config)?)?;
            let base = config_base_dir(&config);
            let out = resolve_output_dir(&cfg.output_dir, &base, env_output_dir());
            let report = run_bound_suite(&cfg, &base, &out)?;
            println!(
                "{} feasible grid points, {} infeasible, {} complexity rows",
                report.feasible.len(),
                report.infeasible.len(),
                report.complexity.len()
            );
            let violations = report.violations();
            for v in &violations {
                eprintln!(
                    "bound violated: {} delta={} kappa_D={} measured={} theory={}",
                    v.topology.name(),
                    v.row.delta,
                    v.row.kappa_d,
                    v.row.lambda_measured,
                    v.row.lambda_theory
                );
            }
            println!("wrote {}", out.display());
            Ok(if violations.is_empty() {
                0
            } else {
                EXIT_FAILURE
            })
        }
        Command::Plot { csv, output } => {
            plot_csv_files(&csv, &output)?;
            println!("wrote {}", output.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
