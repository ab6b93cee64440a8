//! Strict TOML configuration for experiments and bound suites.
//!
//! Unknown keys are rejected and every source of randomness is seeded
//! explicitly: `problem.seed` generates the instance and each entry of
//! `seeds` drives the graph sequence and step-size perturbations of one run.

use std::fs;
use std::path::{Path, PathBuf};

use diging::network::{Graph, GraphSequence};
use diging::objectives::{HuberSpec, QuadraticSpec};
use diging::{Algorithm, ProblemInstance};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::BenchError;

/// Environment variable overriding `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "DIGING_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    AtcDiging,
    Diging,
}

impl From<AlgorithmName> for Algorithm {
    fn from(a: AlgorithmName) -> Self {
        match a {
            AlgorithmName::AtcDiging => Algorithm::AtcDiging,
            AlgorithmName::Diging => Algorithm::Diging,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Complete,
    Path,
    Ring,
    Star,
}

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::Complete => "complete",
            Topology::Path => "path",
            Topology::Ring => "ring",
            Topology::Star => "star",
        }
    }

    pub fn build(self, n: usize) -> Graph {
        match self {
            Topology::Complete => Graph::complete(n),
            Topology::Path => Graph::path(n),
            Topology::Ring => Graph::ring(n),
            Topology::Star => Graph::star(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Quadratic {
        agents: usize,
        dim: usize,
        seed: u64,
        l_range: Option<[f64; 2]>,
        mu_range: Option<[f64; 2]>,
    },
    Huber {
        agents: usize,
        dim: usize,
        rows_per_agent: usize,
        seed: u64,
        threshold: Option<f64>,
        ridge: Option<f64>,
        outlier_fraction: Option<f64>,
    },
    /// A problem stored in the instance text format.
    File { path: PathBuf },
}

impl ProblemConfig {
    pub fn build(&self, base: &Path) -> Result<ProblemInstance, BenchError> {
        let inst = match self {
            ProblemConfig::Quadratic {
                agents,
                dim,
                seed,
                l_range,
                mu_range,
            } => {
                let mut spec = QuadraticSpec::new(*agents, *dim);
                if let Some([lo, hi]) = l_range {
                    spec = spec.with_l_range(*lo, *hi);
                }
                if let Some([lo, hi]) = mu_range {
                    spec = spec.with_mu_range(*lo, *hi);
                }
                spec.generate(*seed)
            }
            ProblemConfig::Huber {
                agents,
                dim,
                rows_per_agent,
                seed,
                threshold,
                ridge,
                outlier_fraction,
            } => {
                let mut spec = HuberSpec::new(*agents, *dim, *rows_per_agent);
                if let Some(t) = threshold {
                    spec.threshold = *t;
                }
                if let Some(r) = ridge {
                    spec.ridge = *r;
                }
                if let Some(f) = outlier_fraction {
                    spec.outlier_fraction = *f;
                }
                spec.generate(*seed)
            }
            ProblemConfig::File { path } => {
                let path = base.join(path);
                let text = fs::read_to_string(&path).map_err(|e| BenchError::Config {
                    message: format!("cannot read problem file {}: {e}", path.display()),
                })?;
                ProblemInstance::from_text(&text)
            }
        };
        inst.map_err(|e| BenchError::Config {
            message: format!("problem: {e}"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkConfig {
    /// Exactly one of `topology`, `edges` or `edge_list_file`.
    Static {
        topology: Option<Topology>,
        edges: Option<Vec<[usize; 2]>>,
        edge_list_file: Option<PathBuf>,
    },
    /// Random spanning tree plus every other pair with `edge_probability`,
    /// redrawn each iteration.
    TimeVarying { edge_probability: f64 },
}

impl NetworkConfig {
    pub fn build(&self, n: usize, run_seed: u64, base: &Path) -> Result<GraphSequence, BenchError> {
        let cfg_err = |message: String| BenchError::Config { message };
        match self {
            NetworkConfig::Static {
                topology,
                edges,
                edge_list_file,
            } => {
                let graph = match (topology, edges, edge_list_file) {
                    (Some(t), None, None) => t.build(n),
                    (None, Some(e), None) => Graph::new(n, e.iter().map(|[a, b]| (*a, *b)))
                        .map_err(|e| cfg_err(format!("network.edges: {e}")))?,
                    (None, None, Some(p)) => {
                        let path = base.join(p);
                        let text = fs::read_to_string(&path).map_err(|e| {
                            cfg_err(format!("cannot read edge list {}: {e}", path.display()))
                        })?;
                        Graph::from_edge_list(&text)
                            .map_err(|e| cfg_err(format!("{}: {e}", path.display())))?
                    }
                    _ => {
                        return Err(cfg_err(
                            "network: give exactly one of topology, edges, edge_list_file".into(),
                        ))
                    }
                };
                if graph.node_count() != n {
                    return Err(cfg_err(format!(
                        "network has {} nodes but the problem has {n} agents",
                        graph.node_count()
                    )));
                }
                if !graph.is_connected() {
                    return Err(cfg_err("network must be connected".into()));
                }
                Ok(GraphSequence::Static(graph))
            }
            NetworkConfig::TimeVarying { edge_probability } => {
                GraphSequence::time_varying(n, *edge_probability, derive_seed(run_seed, 1))
                    .map_err(|e| cfg_err(format!("network: {e}")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// Exactly one of `alpha` (coordinated), `alphas` (one per agent) or
    /// `surrogate_fraction`.
    Constant {
        alpha: Option<f64>,
        alphas: Option<Vec<f64>>,
        surrogate_fraction: Option<f64>,
    },
    /// `α_k^i = α⊖ ζ_k^i`, `ζ ~ U(lo, hi)`. Exactly one of `alpha` (= α⊖)
    /// or `surrogate_fraction`.
    Perturbed {
        alpha: Option<f64>,
        surrogate_fraction: Option<f64>,
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub iterations: usize,
    /// One run per (algorithm, seed).
    pub seeds: Vec<u64>,
    pub algorithms: Vec<AlgorithmName>,
    /// Stop a run once its normalized residual reaches this level.
    pub stop_tolerance: Option<f64>,
    pub problem: ProblemConfig,
    pub network: NetworkConfig,
    pub schedule: ScheduleConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config {
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |m: &str| {
            Err(BenchError::Config {
                message: m.to_string(),
            })
        };
        if self.iterations == 0 {
            return fail("iterations must be at least 1");
        }
        if self.seeds.is_empty() {
            return fail("seeds must list at least one run seed");
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return fail("seeds must be distinct");
        }
        if self.algorithms.is_empty() {
            return fail("algorithms must not be empty");
        }
        if self
            .algorithms
            .iter()
            .enumerate()
            .any(|(i, a)| self.algorithms[..i].contains(a))
        {
            return fail("algorithms must be distinct");
        }
        if let Some(t) = self.stop_tolerance {
            if !(t > 0.0) {
                return fail("stop_tolerance must be positive");
            }
        }
        match &self.schedule {
            ScheduleConfig::Constant {
                alpha,
                alphas,
                surrogate_fraction,
            } => {
                let given = [
                    alpha.is_some(),
                    alphas.is_some(),
                    surrogate_fraction.is_some(),
                ];
                if given.iter().filter(|g| **g).count() != 1 {
                    return fail("schedule: give exactly one of alpha, alphas, surrogate_fraction");
                }
            }
            ScheduleConfig::Perturbed {
                alpha,
                surrogate_fraction,
                lo,
                hi,
            } => {
                if alpha.is_some() == surrogate_fraction.is_some() {
                    return fail("schedule: give exactly one of alpha, surrogate_fraction");
                }
                if !(*lo > 0.0 && lo <= hi) {
                    return fail("schedule: need 0 < lo <= hi");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub topologies: Vec<Topology>,
    pub kappa_d: Vec<f64>,
    /// Step-sizes as fractions of the admissible `α_max` cap.
    pub alpha_fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityConfig {
    pub deltas: Vec<f64>,
    pub kappa_bars: Vec<f64>,
    pub agents: Vec<usize>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub output_dir: PathBuf,
    pub iterations: usize,
    pub stop_tolerance: Option<f64>,
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    pub complexity: ComplexityConfig,
}

impl BoundsConfig {
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config {
            message: e.to_string(),
        })?;
        let fail = |m: &str| {
            Err(BenchError::Config {
                message: m.to_string(),
            })
        };
        if cfg.iterations == 0 {
            return fail("iterations must be at least 1");
        }
        if cfg.grid.topologies.is_empty()
            || cfg.grid.kappa_d.is_empty()
            || cfg.grid.alpha_fractions.is_empty()
        {
            return fail("grid: topologies, kappa_d and alpha_fractions must be non-empty");
        }
        if cfg
            .grid
            .alpha_fractions
            .iter()
            .any(|f| !(*f > 0.0 && *f <= 1.0))
        {
            return fail("grid.alpha_fractions must lie in (0, 1]");
        }
        if cfg.grid.kappa_d.iter().any(|k| !(*k >= 1.0)) {
            return fail("grid.kappa_d entries must be >= 1");
        }
        Ok(cfg)
    }
}

/// Reads a config file; `None` output override means use the file's
/// `output_dir` (relative paths resolve against the config's directory)
/// unless [`OUTPUT_DIR_ENV`] is set.
pub fn read_config_text(path: &Path) -> Result<String, BenchError> {
    fs::read_to_string(path).map_err(|e| BenchError::Config {
        message: format!("cannot read {}: {e}", path.display()),
    })
}

pub fn config_base_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn resolve_output_dir(
    configured: &Path,
    base: &Path,
    env_override: Option<PathBuf>,
) -> PathBuf {
    env_override.unwrap_or_else(|| base.join(configured))
}

/// Independent seed for component `tag` of the run seeded with `seed`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng.next_u64()
}
