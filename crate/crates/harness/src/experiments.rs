//! The median network-size sweep, the two-instance ridge comparison,
//! spectrum tables and arbitrary configured runs.

use std::ops::ControlFlow;
use std::path::PathBuf;

use netindep_core::algorithms::{self, Algorithm, RunSpec, StateView, StepSchedule};
use netindep_core::graph;
use netindep_core::metrics::{
    self, AggregateTrace, MedianStopRule, MetricGrid, NodeErrorMode, RunTrace, TransientMetric,
};
use netindep_core::mixing::{MixingMatrix, MixingRule};
use netindep_core::objectives::{MedianObjective, RidgeObjective, RidgeParams};
use netindep_core::rng;
use netindep_core::DenseMatrix;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use crate::config::{
    build_topology, ExperimentConfig, GridSpec, Instance, MixingSpec, TopologySpec, ZTildeSpec,
};
use crate::error::{ConfigError, HarnessError, Result};
use crate::output::{aggregate_csv, content_hash, fmt_f64, trace_csv, OutputDir, OutputFile};

/// Replications and sweep points run on this pool; results are collected
/// in index order so the thread count never changes the output.
pub fn thread_pool(threads: Option<usize>) -> Result<ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))
}

fn par_collect<T, F>(pool: &ThreadPool, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}

// ---------------------------------------------------------------------------
// median network-size sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianScalingParams {
    pub sizes: Vec<usize>,
    pub epsilon: f64,
    pub horizon: u64,
    /// Recorded for provenance; the sweep uses exact subgradients.
    pub seed: u64,
}

impl Default for MedianScalingParams {
    fn default() -> Self {
        Self {
            sizes: vec![10, 20, 30, 40, 50],
            epsilon: 0.1,
            horizon: 100_000_000,
            seed: 0,
        }
    }
}

impl MedianScalingParams {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let mut errors: Vec<String> = self
            .sizes
            .iter()
            .filter(|&&n| n < 3)
            .map(|n| format!("ring size must be >= 3, got {n}"))
            .collect();
        if self.sizes.is_empty() {
            errors.push("no network sizes given".into());
        }
        if !(self.epsilon > 0.0) {
            errors.push(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if self.horizon < 1 {
            errors.push("horizon must be >= 1".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(errors))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MedianScalingRow {
    pub n: usize,
    pub lambda: f64,
    pub stop_time: Option<u64>,
}

/// First `k` at which the running averages of the distributed subgradient
/// method on a Metropolis-weighted ring satisfy `(1/n) sum_i |y_i(k)| < eps`.
///
/// Nodes start at their own data, `z_i(0) = m_i`, with `m` evenly spaced on
/// `[-10, 10]` and stepsize `1/sqrt(k)`.
pub fn median_stop_time(n: usize, epsilon: f64, horizon: u64) -> Result<MedianScalingRow> {
    let g = graph::ring(n)?;
    let w = MixingMatrix::<f64>::metropolis(&g)?;
    let obj = MedianObjective::evenly_spaced(n, -10.0, 10.0)?;
    let rule = MedianStopRule::new(0.0, epsilon)?;
    let init = DenseMatrix::from_vec(n, 1, obj.values().to_vec()).expect("n values");
    let mut y = obj.values().to_vec();
    let mut stop_time = None;
    algorithms::simulate(
        Algorithm::DistributedSubgradient,
        &StepSchedule::InvSqrt { c: 1.0 },
        horizon,
        0,
        &w,
        Some(&obj),
        &init,
        |k, view| {
            let StateView::Block(z) = view else {
                unreachable!("distributed method")
            };
            // y(k + 1) averages z(0), ..., z(k)
            metrics::running_average_update(&mut y, z.as_slice(), k + 1)
                .expect("index is at least 1");
            if rule.is_met(&y) {
                stop_time = Some(k + 1);
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        },
    )?;
    Ok(MedianScalingRow {
        n,
        lambda: w.lambda(),
        stop_time,
    })
}

pub fn median_scaling(
    params: &MedianScalingParams,
    pool: &ThreadPool,
) -> Result<Vec<MedianScalingRow>> {
    params.validate()?;
    par_collect(pool, params.sizes.len(), |i| {
        median_stop_time(params.sizes[i], params.epsilon, params.horizon)
    })
}

pub fn median_scaling_csv(rows: &[MedianScalingRow]) -> String {
    let mut out = String::from("n,lambda,stop_time\n");
    for r in rows {
        let stop = r
            .stop_time
            .map_or_else(|| "none".to_string(), |k| k.to_string());
        out.push_str(&format!("{},{},{stop}\n", r.n, fmt_f64(r.lambda)));
    }
    out
}

#[derive(Serialize)]
struct ExperimentManifest<'a, P: Serialize> {
    manifest_version: u32,
    experiment: &'static str,
    parameters: &'a P,
    parameters_hash: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    topology_seeds: Vec<(String, Option<u64>)>,
    outputs: &'a [OutputFile],
}

fn params_hash<P: Serialize>(p: &P) -> String {
    content_hash(
        serde_json::to_string(p)
            .expect("parameters serialize")
            .as_bytes(),
    )
}

pub fn write_median_scaling(
    params: &MedianScalingParams,
    rows: &[MedianScalingRow],
    out: &mut OutputDir,
) -> Result<PathBuf> {
    let path = out.write("median_scaling.csv", &median_scaling_csv(rows))?;
    out.write_manifest(&ExperimentManifest {
        manifest_version: 1,
        experiment: "median_scaling",
        parameters: params,
        parameters_hash: params_hash(params),
        topology_seeds: Vec::new(),
        outputs: out.files(),
    })?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// ridge comparison

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RidgeInstance {
    Random { n: usize, p: f64 },
    Grid { rows: usize, cols: usize },
}

impl RidgeInstance {
    pub const RANDOM: Self = Self::Random { n: 50, p: 0.2 };
    pub const GRID: Self = Self::Grid { rows: 7, cols: 7 };

    pub fn name(&self) -> &'static str {
        match self {
            Self::Random { .. } => "random",
            Self::Grid { .. } => "grid",
        }
    }

    fn topology(&self, seed: u64) -> TopologySpec {
        match *self {
            Self::Random { n, p } => TopologySpec::ErdosRenyi { n, p, seed },
            Self::Grid { rows, cols } => TopologySpec::Grid { rows, cols },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RidgeExperiment {
    pub instances: Vec<RidgeInstance>,
    pub reps: usize,
    pub horizon: u64,
    pub seed: u64,
    pub d: usize,
    pub rho: f64,
    pub noise_std: f64,
    pub z_range: (f64, f64),
    pub z_tilde: ZTildeSpec,
    pub grid: GridSpec,
    pub transient_factor: f64,
    pub transient_window: usize,
}

impl Default for RidgeExperiment {
    fn default() -> Self {
        Self {
            instances: vec![RidgeInstance::RANDOM, RidgeInstance::GRID],
            reps: 100,
            horizon: 100_000,
            seed: 0,
            d: 10,
            rho: 0.1,
            noise_std: 1.0,
            z_range: (0.0, 10.0),
            z_tilde: ZTildeSpec::Even,
            grid: GridSpec::default(),
            transient_factor: 2.0,
            transient_window: 10,
        }
    }
}

impl RidgeExperiment {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let mut errors = Vec::new();
        if self.instances.is_empty() {
            errors.push("no instances selected".into());
        }
        if self.reps < 1 {
            errors.push("reps must be >= 1".into());
        }
        if self.horizon < 1 {
            errors.push("horizon must be >= 1".into());
        }
        if self.d < 1 {
            errors.push("d must be >= 1".into());
        }
        if !(self.rho > 0.0) {
            errors.push(format!("rho must be > 0, got {}", self.rho));
        }
        if !(self.transient_factor > 0.0) {
            errors.push(format!(
                "transient factor must be > 0, got {}",
                self.transient_factor
            ));
        }
        if self.transient_window < 1 {
            errors.push("transient window must be >= 1".into());
        }
        if let Err(e) = MetricGrid::from(self.grid).validate() {
            errors.push(e.to_string());
        }
        for inst in &self.instances {
            if let RidgeInstance::Random { p, .. } = inst {
                if !(0.0..=1.0).contains(p) {
                    errors.push(format!("edge probability must lie in [0, 1], got {p}"));
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(errors))
        }
    }
}

#[derive(Debug, Clone)]
pub struct RidgeOutcome {
    pub instance: RidgeInstance,
    pub n: usize,
    pub lambda: f64,
    pub topology_seed: Option<u64>,
    pub dsgd: AggregateTrace<f64>,
    pub sgd: AggregateTrace<f64>,
    /// Transient measured on the optimization error `U` of the average.
    pub transient_optimization: Option<u64>,
    /// Transient measured on the error of a uniformly chosen node.
    pub transient_node: Option<u64>,
}

/// DSGD versus centralized SGD on online ridge regression, both from zero
/// with `alpha_k = 5/k`. Replication `r` of both methods shares the same
/// per-node sample streams.
pub fn ridge(exp: &RidgeExperiment, pool: &ThreadPool) -> Result<Vec<RidgeOutcome>> {
    exp.validate()?;
    exp.instances
        .iter()
        .map(|inst| ridge_instance(exp, *inst, pool))
        .collect()
}

fn ridge_instance(
    exp: &RidgeExperiment,
    inst: RidgeInstance,
    pool: &ThreadPool,
) -> Result<RidgeOutcome> {
    let topology = build_topology(&inst.topology(exp.seed))?;
    let n = topology.graph.n();
    let w = MixingMatrix::<f64>::metropolis(&topology.graph)?;
    let params = RidgeParams::generate(
        n,
        exp.d,
        exp.rho,
        exp.z_range,
        exp.noise_std,
        exp.z_tilde.into(),
        exp.seed,
    )?;
    let obj = RidgeObjective::new(params)?;
    let init = DenseMatrix::zeros(n, exp.d);
    let spec = |algorithm, seed| RunSpec {
        algorithm,
        schedule: StepSchedule::Inv {
            c: 5.0,
            offset: 0.0,
        },
        iterations: exp.horizon,
        seed,
        grid: exp.grid.into(),
        node_error: NodeErrorMode::Iterate,
        label: format!("{}/{}", inst.name(), algorithm.name()),
    };
    let runs = par_collect(pool, 2 * exp.reps, |task| {
        let seed = rng::replication_seed(exp.seed, (task / 2) as u64);
        let algorithm = if task % 2 == 0 {
            Algorithm::Dsgd
        } else {
            Algorithm::Sgd
        };
        Ok(algorithms::run(
            &spec(algorithm, seed),
            &w,
            Some(&obj),
            &init,
        )?)
    })?;
    let (dsgd, sgd): (Vec<_>, Vec<_>) = runs
        .into_iter()
        .enumerate()
        .partition(|(task, _)| task % 2 == 0);
    let strip = |v: Vec<(usize, RunTrace<f64>)>| v.into_iter().map(|(_, t)| t).collect::<Vec<_>>();
    let dsgd = metrics::aggregate(&strip(dsgd))?;
    let sgd = metrics::aggregate(&strip(sgd))?;
    let transient = |metric| {
        metrics::transient_time_with(
            &dsgd,
            &sgd,
            metric,
            exp.transient_factor,
            exp.transient_window,
        )
    };
    Ok(RidgeOutcome {
        instance: inst,
        n,
        lambda: w.lambda(),
        topology_seed: topology.seed,
        transient_optimization: transient(TransientMetric::Optimization)?,
        transient_node: transient(TransientMetric::NodeAverage { nodes: n })?,
        dsgd,
        sgd,
    })
}

pub fn ridge_summary_csv(outcomes: &[RidgeOutcome]) -> String {
    let opt = |x: Option<u64>| x.map_or_else(|| "none".to_string(), |k| k.to_string());
    let mut out =
        String::from("instance,n,lambda,topology_seed,transient_optimization,transient_node\n");
    for o in outcomes {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            o.instance.name(),
            o.n,
            fmt_f64(o.lambda),
            o.topology_seed.map(|s| s.to_string()).unwrap_or_default(),
            opt(o.transient_optimization),
            opt(o.transient_node),
        ));
    }
    out
}

pub fn write_ridge(
    exp: &RidgeExperiment,
    outcomes: &[RidgeOutcome],
    out: &mut OutputDir,
) -> Result<()> {
    for o in outcomes {
        out.write(
            &format!("ridge_{}_dsgd.csv", o.instance.name()),
            &aggregate_csv(&o.dsgd),
        )?;
        out.write(
            &format!("ridge_{}_sgd.csv", o.instance.name()),
            &aggregate_csv(&o.sgd),
        )?;
    }
    out.write("ridge_summary.csv", &ridge_summary_csv(outcomes))?;
    out.write_manifest(&ExperimentManifest {
        manifest_version: 1,
        experiment: "ridge",
        parameters: exp,
        parameters_hash: params_hash(exp),
        topology_seeds: outcomes
            .iter()
            .map(|o| (o.instance.name().to_string(), o.topology_seed))
            .collect(),
        outputs: out.files(),
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// spectrum table

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub topology: String,
    pub n: usize,
    pub rule: MixingRule,
    pub lambda: f64,
}

/// Every standard family at each size; grids use the most square
/// factorization of `n`, random families start from `seed`.
pub fn spectrum_topologies(sizes: &[usize], seed: u64) -> Vec<TopologySpec> {
    let mut out = Vec::new();
    for &n in sizes {
        let rows = (1..=n)
            .take_while(|r| r * r <= n)
            .filter(|r| n % r == 0)
            .last()
            .unwrap_or(1);
        if n >= 3 {
            out.push(TopologySpec::Ring { n });
        }
        out.push(TopologySpec::Path { n });
        if n >= 2 {
            out.push(TopologySpec::Star { n });
        }
        out.push(TopologySpec::Complete { n });
        out.push(TopologySpec::Grid {
            rows,
            cols: n / rows,
        });
        out.push(TopologySpec::RandomTree { n, seed });
        out.push(TopologySpec::ErdosRenyi { n, p: 0.2, seed });
    }
    out
}

pub fn spectrum(topologies: &[TopologySpec]) -> Result<Vec<SpectrumRow>> {
    let mut rows = Vec::new();
    for spec in topologies {
        let topo = build_topology(spec)?;
        for rule in [MixingSpec::Metropolis, MixingSpec::LazyMetropolis] {
            let w = MixingMatrix::<f64>::with_rule(&topo.graph, rule.into())?;
            rows.push(SpectrumRow {
                topology: spec.name().to_string(),
                n: topo.graph.n(),
                rule: rule.into(),
                lambda: w.lambda(),
            });
        }
    }
    Ok(rows)
}

pub fn spectrum_csv(rows: &[SpectrumRow]) -> String {
    let mut out = String::from("topology,n,rule,lambda,inv_spectral_gap\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.topology,
            r.n,
            r.rule.name(),
            fmt_f64(r.lambda),
            fmt_f64(1.0 / (1.0 - r.lambda))
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// configured runs

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub lambda: f64,
    pub topology_seed: Option<u64>,
    pub seeds: Vec<u64>,
    pub traces: Vec<RunTrace<f64>>,
    pub aggregate: AggregateTrace<f64>,
}

/// Replication `r` uses seed `replication_seed(config.seed, r)`.
pub fn run_custom(config: &ExperimentConfig, pool: &ThreadPool) -> Result<RunOutcome> {
    let inst = Instance::build(config)?;
    let seeds: Vec<u64> = (0..config.replications as u64)
        .map(|r| rng::replication_seed(config.seed, r))
        .collect();
    let traces = par_collect(pool, seeds.len(), |r| {
        let spec = RunSpec {
            algorithm: config.algorithm.into(),
            schedule: config.schedule.into(),
            iterations: config.iterations,
            seed: seeds[r],
            grid: config.metric_grid.into(),
            node_error: config.node_error.into(),
            label: format!("rep{r}"),
        };
        Ok(algorithms::run(
            &spec,
            &inst.mixing,
            inst.objective(),
            &inst.initial_block(seeds[r]),
        )?)
    })?;
    let aggregate = metrics::aggregate(&traces)?;
    Ok(RunOutcome {
        lambda: inst.mixing.lambda(),
        topology_seed: inst.topology.seed,
        seeds,
        traces,
        aggregate,
    })
}

#[derive(Serialize)]
struct RunManifest<'a> {
    manifest_version: u32,
    config: &'a ExperimentConfig,
    config_hash: String,
    lambda: f64,
    topology_seed: Option<u64>,
    replication_seeds: &'a [u64],
    outputs: &'a [OutputFile],
}

/// Writes `rep_NNN.csv` per replication, `aggregate.csv` and
/// `manifest.json`. The manifest can be passed back as `--config`.
pub fn write_run(
    config: &ExperimentConfig,
    outcome: &RunOutcome,
    out: &mut OutputDir,
) -> Result<()> {
    for (r, t) in outcome.traces.iter().enumerate() {
        out.write(&format!("rep_{r:03}.csv"), &trace_csv(t))?;
    }
    out.write("aggregate.csv", &aggregate_csv(&outcome.aggregate))?;
    out.write_manifest(&RunManifest {
        manifest_version: 1,
        config,
        config_hash: params_hash(config),
        lambda: outcome.lambda,
        topology_seed: outcome.topology_seed,
        replication_seeds: &outcome.seeds,
        outputs: out.files(),
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_huge_epsilon_stops_immediately() {
        for n in [3, 10, 25] {
            let row = median_stop_time(n, 20.0, 1000).unwrap();
            assert_eq!(row.stop_time, Some(1));
        }
    }

    #[test]
    fn median_horizon_exhausted_is_none() {
        let row = median_stop_time(10, 0.1, 50).unwrap();
        assert_eq!(row.stop_time, None);
        assert!(median_scaling_csv(&[row]).ends_with(",none\n"));
    }

    #[test]
    fn median_params_validated() {
        let p = MedianScalingParams {
            sizes: vec![2, 10],
            epsilon: 0.0,
            ..Default::default()
        };
        assert_eq!(p.validate().unwrap_err().0.len(), 2);
    }

    #[test]
    fn spectrum_covers_families() {
        let specs = spectrum_topologies(&[10], 1);
        let rows = spectrum(&specs).unwrap();
        assert_eq!(rows.len(), 2 * 7);
        let complete = rows.iter().find(|r| r.topology == "complete").unwrap();
        assert!(complete.lambda.abs() < 1e-12);
        assert!(rows.iter().all(|r| r.lambda < 1.0));
        assert!(spectrum_csv(&rows)
            .starts_with("topology,n,rule,lambda,inv_spectral_gap\nring,10,metropolis,"));
    }

    #[test]
    fn grid_factorization() {
        let specs = spectrum_topologies(&[49, 50, 5], 0);
        let grids: Vec<_> = specs
            .iter()
            .filter_map(|s| match s {
                TopologySpec::Grid { rows, cols } => Some((*rows, *cols)),
                _ => None,
            })
            .collect();
        assert_eq!(grids, vec![(7, 7), (5, 10), (1, 5)]);
    }
}
