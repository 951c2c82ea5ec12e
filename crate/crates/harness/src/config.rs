//! Experiment configuration files.
//!
//! Configurations are JSON documents carrying `"config_version": 1`. Every
//! field except `topology`, `algorithm`, `schedule` and `iterations` has a
//! default; see the README for the full schema.

use std::fs;
use std::path::{Path, PathBuf};

use netindep_core::algorithms::{Algorithm, StepSchedule};
use netindep_core::graph::{self, Graph, GraphError};
use netindep_core::metrics::{MetricGrid, NodeErrorMode};
use netindep_core::mixing::{MixingMatrix, MixingRule};
use netindep_core::objectives::{
    MedianObjective, Objective, QuadraticObjective, RidgeObjective, RidgeParams, ZTildeMode,
};
use netindep_core::rng;
use netindep_core::DenseMatrix;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, HarnessError, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Connected Erdős–Rényi draws are attempted at most this many times.
pub const MAX_TOPOLOGY_RESAMPLES: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Ring {
        n: usize,
    },
    Path {
        n: usize,
    },
    Star {
        n: usize,
    },
    Complete {
        n: usize,
    },
    Grid {
        rows: usize,
        cols: usize,
    },
    RandomTree {
        n: usize,
        seed: u64,
    },
    ErdosRenyi {
        n: usize,
        p: f64,
        seed: u64,
    },
    Edges {
        n: usize,
        edges: Vec<(usize, usize)>,
    },
}

impl TopologySpec {
    pub fn n(&self) -> usize {
        match *self {
            Self::Ring { n }
            | Self::Path { n }
            | Self::Star { n }
            | Self::Complete { n }
            | Self::RandomTree { n, .. }
            | Self::ErdosRenyi { n, .. }
            | Self::Edges { n, .. } => n,
            Self::Grid { rows, cols } => rows * cols,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ring { .. } => "ring",
            Self::Path { .. } => "path",
            Self::Star { .. } => "star",
            Self::Complete { .. } => "complete",
            Self::Grid { .. } => "grid",
            Self::RandomTree { .. } => "random_tree",
            Self::ErdosRenyi { .. } => "erdos_renyi",
            Self::Edges { .. } => "edges",
        }
    }
}

/// A built topology with the seed that produced it (for random families).
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub graph: Graph,
    pub seed: Option<u64>,
}

/// Builds the graph. Erdős–Rényi draws are repeated with seeds
/// `seed, seed + 1, ...` until one is connected.
pub fn build_topology(spec: &TopologySpec) -> Result<Topology> {
    let fixed = |graph: std::result::Result<Graph, GraphError>| -> Result<Topology> {
        Ok(Topology {
            graph: graph?,
            seed: None,
        })
    };
    match *spec {
        TopologySpec::Ring { n } => fixed(graph::ring(n)),
        TopologySpec::Path { n } => fixed(graph::path(n)),
        TopologySpec::Star { n } => fixed(graph::star(n)),
        TopologySpec::Complete { n } => fixed(graph::complete(n)),
        TopologySpec::Grid { rows, cols } => fixed(graph::grid(rows, cols)),
        TopologySpec::Edges { n, ref edges } => fixed(Graph::from_edges(n, edges.iter().copied())),
        TopologySpec::RandomTree { n, seed } => Ok(Topology {
            graph: graph::random_tree(n, seed)?,
            seed: Some(seed),
        }),
        TopologySpec::ErdosRenyi { n, p, seed } => {
            for attempt in 0..MAX_TOPOLOGY_RESAMPLES {
                let s = seed.wrapping_add(attempt);
                let g = graph::erdos_renyi(n, p, s)?;
                if g.is_connected() {
                    return Ok(Topology {
                        graph: g,
                        seed: Some(s),
                    });
                }
            }
            Err(ConfigError(vec![format!(
                "erdos_renyi(n={n}, p={p}) was disconnected for all {MAX_TOPOLOGY_RESAMPLES} seeds starting at {seed}"
            )])
            .into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingSpec {
    #[default]
    Metropolis,
    LazyMetropolis,
}

impl From<MixingSpec> for MixingRule {
    fn from(m: MixingSpec) -> Self {
        match m {
            MixingSpec::Metropolis => MixingRule::Metropolis,
            MixingSpec::LazyMetropolis => MixingRule::LazyMetropolis,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZTildeSpec {
    Random,
    #[default]
    Even,
}

impl From<ZTildeSpec> for ZTildeMode {
    fn from(m: ZTildeSpec) -> Self {
        match m {
            ZTildeSpec::Random => ZTildeMode::Random,
            ZTildeSpec::Even => ZTildeMode::Even,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn ridge_range() -> (f64, f64) {
    (0.0, 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// `f_i(z) = |z - m_i|` with explicit `m_i`.
    Median { values: Vec<f64> },
    /// `m_i` evenly spaced on `[lo, hi]`.
    MedianEven { n: usize, lo: f64, hi: f64 },
    Ridge {
        n: usize,
        d: usize,
        rho: f64,
        #[serde(default = "one")]
        noise_std: f64,
        #[serde(default = "ridge_range")]
        z_range: (f64, f64),
        #[serde(default)]
        z_tilde: ZTildeSpec,
        #[serde(default)]
        seed: u64,
    },
    Quadratic {
        n: usize,
        d: usize,
        mu: f64,
        lipschitz: f64,
        sigma: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl ObjectiveSpec {
    pub fn n(&self) -> usize {
        match *self {
            Self::Median { ref values } => values.len(),
            Self::MedianEven { n, .. } | Self::Ridge { n, .. } | Self::Quadratic { n, .. } => n,
        }
    }

    pub fn d(&self) -> usize {
        match *self {
            Self::Median { .. } | Self::MedianEven { .. } => 1,
            Self::Ridge { d, .. } | Self::Quadratic { d, .. } => d,
        }
    }

    pub fn is_median(&self) -> bool {
        matches!(self, Self::Median { .. } | Self::MedianEven { .. })
    }
}

/// Objective instance plus, for medians, the local data used by
/// [`InitSpec::LocalValues`].
pub struct BuiltObjective {
    pub objective: Box<dyn Objective<f64>>,
    pub median_values: Option<Vec<f64>>,
}

pub fn build_objective(spec: &ObjectiveSpec) -> Result<BuiltObjective> {
    Ok(match *spec {
        ObjectiveSpec::Median { ref values } => {
            let obj = MedianObjective::new(values.clone())?;
            BuiltObjective {
                median_values: Some(obj.values().to_vec()),
                objective: Box::new(obj),
            }
        }
        ObjectiveSpec::MedianEven { n, lo, hi } => {
            let obj = MedianObjective::evenly_spaced(n, lo, hi)?;
            BuiltObjective {
                median_values: Some(obj.values().to_vec()),
                objective: Box::new(obj),
            }
        }
        ObjectiveSpec::Ridge {
            n,
            d,
            rho,
            noise_std,
            z_range,
            z_tilde,
            seed,
        } => {
            let params =
                RidgeParams::generate(n, d, rho, z_range, noise_std, z_tilde.into(), seed)?;
            BuiltObjective {
                objective: Box::new(RidgeObjective::new(params)?),
                median_values: None,
            }
        }
        ObjectiveSpec::Quadratic {
            n,
            d,
            mu,
            lipschitz,
            sigma,
            seed,
        } => BuiltObjective {
            objective: Box::new(QuadraticObjective::random(
                d, n, seed, mu, lipschitz, sigma,
            )?),
            median_values: None,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmSpec {
    Consensus,
    DistSubgrad,
    Dsgd,
    CentralSubgrad,
    Sgd,
}

impl From<AlgorithmSpec> for Algorithm {
    fn from(a: AlgorithmSpec) -> Self {
        match a {
            AlgorithmSpec::Consensus => Algorithm::Consensus,
            AlgorithmSpec::DistSubgrad => Algorithm::DistributedSubgradient,
            AlgorithmSpec::Dsgd => Algorithm::Dsgd,
            AlgorithmSpec::CentralSubgrad => Algorithm::CentralSubgradient,
            AlgorithmSpec::Sgd => Algorithm::Sgd,
        }
    }
}

fn zero() -> f64 {
    0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant {
        c: f64,
    },
    InvSqrt {
        c: f64,
    },
    Inv {
        c: f64,
        #[serde(default = "zero")]
        offset: f64,
    },
    MuInv {
        mu: f64,
    },
}

impl From<ScheduleSpec> for StepSchedule<f64> {
    fn from(s: ScheduleSpec) -> Self {
        match s {
            ScheduleSpec::Constant { c } => StepSchedule::Constant { c },
            ScheduleSpec::InvSqrt { c } => StepSchedule::InvSqrt { c },
            ScheduleSpec::Inv { c, offset } => StepSchedule::Inv { c, offset },
            ScheduleSpec::MuInv { mu } => StepSchedule::MuInv { mu },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Every(u64),
    Log { dense_until: u64, per_decade: u32 },
}

impl Default for GridSpec {
    fn default() -> Self {
        match MetricGrid::default() {
            MetricGrid::Every(s) => Self::Every(s),
            MetricGrid::Log {
                dense_until,
                per_decade,
            } => Self::Log {
                dense_until,
                per_decade,
            },
        }
    }
}

impl From<GridSpec> for MetricGrid {
    fn from(g: GridSpec) -> Self {
        match g {
            GridSpec::Every(s) => MetricGrid::Every(s),
            GridSpec::Log {
                dense_until,
                per_decade,
            } => MetricGrid::Log {
                dense_until,
                per_decade,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// `z_i(0) = 0`.
    #[default]
    Zero,
    /// Independent `N(0, std^2)` entries, drawn per replication.
    Gaussian { std: f64 },
    /// `z_i(0) = m_i`; median objectives only.
    LocalValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeErrorSpec {
    #[default]
    Iterate,
    RunningAverage,
}

impl From<NodeErrorSpec> for NodeErrorMode {
    fn from(m: NodeErrorSpec) -> Self {
        match m {
            NodeErrorSpec::Iterate => NodeErrorMode::Iterate,
            NodeErrorSpec::RunningAverage => NodeErrorMode::RunningAverage,
        }
    }
}

fn one_rep() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub config_version: u32,
    pub topology: TopologySpec,
    #[serde(default)]
    pub mixing: MixingSpec,
    #[serde(default)]
    pub objective: Option<ObjectiveSpec>,
    pub algorithm: AlgorithmSpec,
    pub schedule: ScheduleSpec,
    pub iterations: u64,
    #[serde(default = "one_rep")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub metric_grid: GridSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub node_error: NodeErrorSpec,
    /// Decision dimension when no objective is given (consensus runs).
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads a configuration, or the configuration echoed inside a run
    /// manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let parse_err = |source| HarnessError::Parse {
            path: path.to_path_buf(),
            source,
        };
        let value: serde_json::Value = serde_json::from_str(&text).map_err(parse_err)?;
        let value = match value.get("manifest_version") {
            Some(_) => value
                .get("config")
                .cloned()
                .unwrap_or(serde_json::Value::Null),
            None => value,
        };
        serde_json::from_value(value).map_err(parse_err)
    }

    /// Dimension of the decision vector.
    pub fn d(&self) -> usize {
        match &self.objective {
            Some(o) => o.d(),
            None => self.dim.unwrap_or(1),
        }
    }

    /// Checks everything that can be checked without building the
    /// instance and reports all problems together.
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let mut errors = Vec::new();
        if self.config_version != CONFIG_VERSION {
            errors.push(format!(
                "config_version is {}, expected {CONFIG_VERSION}",
                self.config_version
            ));
        }
        let n = self.topology.n();
        match self.topology {
            TopologySpec::Ring { n } if n < 3 => errors.push(format!("ring needs n >= 3, got {n}")),
            TopologySpec::Star { n } if n < 2 => errors.push(format!("star needs n >= 2, got {n}")),
            TopologySpec::ErdosRenyi { p, .. } if !(0.0..=1.0).contains(&p) => {
                errors.push(format!("erdos_renyi p must lie in [0, 1], got {p}"))
            }
            _ if n == 0 => errors.push("topology has no nodes".into()),
            _ => {}
        }
        if self.iterations < 1 {
            errors.push("iterations must be >= 1".into());
        }
        if self.replications < 1 {
            errors.push("replications must be >= 1".into());
        }
        let algorithm = Algorithm::from(self.algorithm);
        match &self.objective {
            Some(obj) => {
                if obj.n() != n {
                    errors.push(format!(
                        "objective has n = {} but topology has n = {n}",
                        obj.n()
                    ));
                }
                if let Some(d) = self.dim {
                    if d != obj.d() {
                        errors.push(format!("dim = {d} but objective has d = {}", obj.d()));
                    }
                }
            }
            None if algorithm.needs_objective() => errors.push(format!(
                "algorithm `{}` requires an objective",
                algorithm.name()
            )),
            None => {}
        }
        if self.dim == Some(0) {
            errors.push("dim must be >= 1".into());
        }
        if let Err(e) = StepSchedule::from(self.schedule).validate() {
            errors.push(e.to_string());
        }
        if let Err(e) = MetricGrid::from(self.metric_grid).validate() {
            errors.push(e.to_string());
        }
        match self.init {
            InitSpec::Gaussian { std } if !(std >= 0.0 && std.is_finite()) => {
                errors.push(format!("init std must be finite and >= 0, got {std}"))
            }
            InitSpec::LocalValues
                if !self
                    .objective
                    .as_ref()
                    .is_some_and(ObjectiveSpec::is_median) =>
            {
                errors.push("init `local_values` requires a median objective".into())
            }
            _ => {}
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(errors))
        }
    }
}

/// Everything needed to run replications of one configuration.
pub struct Instance {
    pub topology: Topology,
    pub mixing: MixingMatrix<f64>,
    pub objective: Option<BuiltObjective>,
    pub init: InitSpec,
    pub d: usize,
}

impl Instance {
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let topology = build_topology(&config.topology)?;
        let mixing = MixingMatrix::with_rule(&topology.graph, config.mixing.into())?;
        let objective = config.objective.as_ref().map(build_objective).transpose()?;
        Ok(Self {
            topology,
            mixing,
            objective,
            init: config.init,
            d: config.d(),
        })
    }

    pub fn objective(&self) -> Option<&dyn Objective<f64>> {
        self.objective.as_ref().map(|o| o.objective.as_ref())
    }

    /// Initial iterate block for the replication with seed `seed`.
    pub fn initial_block(&self, seed: u64) -> DenseMatrix<f64> {
        let n = self.topology.graph.n();
        match self.init {
            InitSpec::Zero => DenseMatrix::zeros(n, self.d),
            InitSpec::Gaussian { std } => {
                let mut r = rng::stream(seed, u64::MAX - 1);
                let normal = Normal::new(0.0, std).expect("std validated");
                DenseMatrix::from_fn(n, self.d, |_, _| normal.sample(&mut r))
            }
            InitSpec::LocalValues => {
                let values = self
                    .objective
                    .as_ref()
                    .and_then(|o| o.median_values.clone())
                    .expect("validated: median objective");
                DenseMatrix::from_vec(n, 1, values).expect("one value per node")
            }
        }
    }
}
