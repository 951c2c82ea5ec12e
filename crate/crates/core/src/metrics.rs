//! Error functionals and trace bookkeeping.
//!
//! For an iterate block `Z` (row `i` = node `i`) with column mean `z_bar`:
//!
//! * optimization error `U = ||z_bar - z*||^2`
//! * consensus error `V = sum_i ||z_i - z_bar||^2`
//! * centralized error `R = ||z - z*||^2`
//!
//! A single run records these on a grid of iteration indices; expectations
//! are approximated by averaging runs pointwise with [`aggregate`].

use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::scalar::{dist_sq, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("running average index must be >= 1, got {0}")]
    InvalidIndex(u64),
    #[error("no traces to aggregate")]
    Empty,
    #[error("trace grids differ at position {position}")]
    GridMismatch { position: usize },
    #[error("trace {trace} has {got} records, expected {expected}")]
    LengthMismatch {
        trace: usize,
        expected: usize,
        got: usize,
    },
    #[error("metric `{metric}` is missing at k = {k}")]
    MissingMetric { metric: &'static str, k: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// `sum_i ||z_i - z_bar||^2`.
pub fn consensus_error<T: Scalar>(z: &DenseMatrix<T>) -> T {
    let mean = z.column_mean();
    (0..z.rows()).map(|i| dist_sq(z.row(i), &mean)).sum()
}

/// `||z_bar - z*||^2` for one replication.
pub fn optimization_error<T: Scalar>(z: &DenseMatrix<T>, zstar: &[T]) -> T {
    dist_sq(&z.column_mean(), zstar)
}

/// `||z - z*||^2`.
pub fn central_error<T: Scalar>(z: &[T], zstar: &[T]) -> T {
    dist_sq(z, zstar)
}

/// Largest per-node squared distance `max_i ||x_i - z*||^2`.
pub fn node_error_max<T: Scalar>(x: &DenseMatrix<T>, zstar: &[T]) -> T {
    (0..x.rows())
        .map(|i| dist_sq(x.row(i), zstar))
        .fold(T::zero(), T::max)
}

/// Advances `y(k-1) -> y(k)` where `y(k) = (1/k) sum_{l<k} z(l)`:
/// `y <- ((k-1) y + z(k-1)) / k`, in place.
pub fn running_average_update<T: Scalar>(y: &mut [T], z: &[T], k: u64) -> Result<(), MetricsError> {
    if k < 1 {
        return Err(MetricsError::InvalidIndex(k));
    }
    let kf = T::from_u64(k).expect("iteration index representable");
    let prev = kf - T::one();
    for (yi, &zi) in y.iter_mut().zip(z) {
        *yi = (prev * *yi + zi) / kf;
    }
    Ok(())
}

/// Stopping rule `(1/n) sum_i |y_i - z*| < epsilon` on scalar running
/// averages. With `z* = 0` this is `(1/n) sum_i |y_i(k)| < epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianStopRule<T> {
    pub optimum: T,
    pub epsilon: T,
}

impl<T: Scalar> MedianStopRule<T> {
    pub fn new(optimum: T, epsilon: T) -> Result<Self, MetricsError> {
        if !(epsilon > T::zero()) {
            return Err(MetricsError::InvalidParameter(format!(
                "epsilon must be > 0, got {epsilon}"
            )));
        }
        Ok(Self { optimum, epsilon })
    }

    pub fn mean_abs_error(&self, y: &[T]) -> T {
        let total: T = y.iter().map(|&v| (v - self.optimum).abs()).sum();
        total / T::from_usize_lossy(y.len().max(1))
    }

    #[inline]
    pub fn is_met(&self, y: &[T]) -> bool {
        self.mean_abs_error(y) < self.epsilon
    }
}

/// First `k` in a sequence of `(k, y(k))` at which the rule holds, or `None`
/// if it never does.
pub fn median_stop_time<T, I, Y>(ys: I, rule: &MedianStopRule<T>) -> Option<u64>
where
    T: Scalar,
    I: IntoIterator<Item = (u64, Y)>,
    Y: AsRef<[T]>,
{
    ys.into_iter()
        .find(|(_, y)| rule.is_met(y.as_ref()))
        .map(|(k, _)| k)
}

/// Which per-node point the per-node error is measured at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeErrorMode {
    /// Raw iterates `z_i(k)`.
    #[default]
    Iterate,
    /// Running averages `y_i(k) = (1/k) sum_{l<k} z_i(l)`.
    RunningAverage,
}

/// Iteration indices at which metrics are recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricGrid {
    /// `0, s, 2s, ...` plus the final iteration.
    Every(u64),
    /// Every iteration below `dense_until`, then `per_decade` log-spaced
    /// points per factor of ten, plus the final iteration.
    Log { dense_until: u64, per_decade: u32 },
}

impl Default for MetricGrid {
    fn default() -> Self {
        Self::Log {
            dense_until: 1000,
            per_decade: 100,
        }
    }
}

impl MetricGrid {
    pub fn validate(&self) -> Result<(), MetricsError> {
        match *self {
            Self::Every(0) => Err(MetricsError::InvalidParameter("stride must be >= 1".into())),
            Self::Log { dense_until: 0, .. } | Self::Log { per_decade: 0, .. } => {
                Err(MetricsError::InvalidParameter(
                    "log grid needs dense_until, per_decade >= 1".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Strictly increasing grid points in `0..=horizon`.
    pub fn points(&self, horizon: u64) -> Vec<u64> {
        let mut pts = Vec::new();
        match *self {
            Self::Every(stride) => {
                let stride = stride.max(1);
                let mut k = 0;
                while k <= horizon {
                    pts.push(k);
                    k = match k.checked_add(stride) {
                        Some(next) => next,
                        None => break,
                    };
                }
            }
            Self::Log {
                dense_until,
                per_decade,
            } => {
                pts.extend(0..dense_until.min(horizon + 1));
                let per_decade = f64::from(per_decade.max(1));
                let mut j = 0u32;
                loop {
                    let k = (dense_until as f64 * 10f64.powf(f64::from(j) / per_decade)).ceil();
                    if k > horizon as f64 {
                        break;
                    }
                    let k = k as u64;
                    if pts.last().is_none_or(|&last| k > last) {
                        pts.push(k);
                    }
                    j += 1;
                }
            }
        }
        if pts.last() != Some(&horizon) {
            pts.push(horizon);
        }
        pts
    }
}

/// Metrics recorded at one iteration of one replication. Absent metrics are
/// `None` (e.g. `r` for a distributed run, `u` without a known optimum).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record<T> {
    pub k: u64,
    pub u: Option<T>,
    pub v: Option<T>,
    pub r: Option<T>,
    pub node_err_max: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta<T> {
    pub seed: u64,
    pub lambda: T,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<T> {
    pub records: Vec<Record<T>>,
    pub meta: TraceMeta<T>,
}

impl<T: Scalar> RunTrace<T> {
    pub fn ks(&self) -> impl Iterator<Item = u64> + '_ {
        self.records.iter().map(|r| r.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRecord<T> {
    pub k: u64,
    pub u_mean: Option<T>,
    pub v_mean: Option<T>,
    pub r_mean: Option<T>,
}

/// Pointwise replication means.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTrace<T> {
    pub records: Vec<AggregateRecord<T>>,
    pub reps: usize,
}

/// Mean of values summed in ascending order, so the result does not depend
/// on the order replications are listed in.
fn order_free_mean<T: Scalar>(values: &mut [T]) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let total = values.iter().fold(T::zero(), |acc, &x| acc + x);
    total / T::from_usize_lossy(values.len())
}

/// Pointwise means of `U`, `V`, `R` across replications sharing one grid.
pub fn aggregate<T: Scalar>(traces: &[RunTrace<T>]) -> Result<AggregateTrace<T>, MetricsError> {
    let first = traces.first().ok_or(MetricsError::Empty)?;
    let len = first.records.len();
    for (t, trace) in traces.iter().enumerate() {
        if trace.records.len() != len {
            return Err(MetricsError::LengthMismatch {
                trace: t,
                expected: len,
                got: trace.records.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(len);
    let mut buf = Vec::with_capacity(traces.len());
    for pos in 0..len {
        let k = first.records[pos].k;
        if traces.iter().any(|t| t.records[pos].k != k) {
            return Err(MetricsError::GridMismatch { position: pos });
        }
        let mut mean_of = |name: &'static str, get: fn(&Record<T>) -> Option<T>| {
            let present = traces
                .iter()
                .filter(|t| get(&t.records[pos]).is_some())
                .count();
            if present == 0 {
                return Ok(None);
            }
            if present != traces.len() {
                return Err(MetricsError::MissingMetric { metric: name, k });
            }
            buf.clear();
            buf.extend(traces.iter().filter_map(|t| get(&t.records[pos])));
            Ok(Some(order_free_mean(&mut buf)))
        };
        let u_mean = mean_of("U", |r| r.u)?;
        let v_mean = mean_of("V", |r| r.v)?;
        let r_mean = mean_of("R", |r| r.r)?;
        out.push(AggregateRecord {
            k,
            u_mean,
            v_mean,
            r_mean,
        });
    }
    Ok(AggregateTrace {
        records: out,
        reps: traces.len(),
    })
}

/// DSGD error series compared against the centralized `R` by
/// [`transient_time_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransientMetric {
    /// Optimization error `U` of the network average.
    #[default]
    Optimization,
    /// Error of a uniformly chosen node, `(1/n) sum_i ||z_i - z*||^2 = U + V / n`.
    NodeAverage { nodes: usize },
}

/// Smallest grid point `k*` such that `U_dsgd(k) <= factor * R_sgd(k)` at
/// each of the `window` grid points starting at `k*` (fewer at the end of
/// the trace). `None` if no such point exists.
pub fn transient_time<T: Scalar>(
    dsgd: &AggregateTrace<T>,
    sgd: &AggregateTrace<T>,
    factor: T,
    window: usize,
) -> Result<Option<u64>, MetricsError> {
    transient_time_with(dsgd, sgd, TransientMetric::Optimization, factor, window)
}

/// [`transient_time`] with a selectable DSGD error series.
pub fn transient_time_with<T: Scalar>(
    dsgd: &AggregateTrace<T>,
    sgd: &AggregateTrace<T>,
    metric: TransientMetric,
    factor: T,
    window: usize,
) -> Result<Option<u64>, MetricsError> {
    if window < 1 {
        return Err(MetricsError::InvalidParameter("window must be >= 1".into()));
    }
    if !(factor > T::zero()) {
        return Err(MetricsError::InvalidParameter(format!(
            "factor must be > 0, got {factor}"
        )));
    }
    if dsgd.records.len() != sgd.records.len() {
        return Err(MetricsError::LengthMismatch {
            trace: 1,
            expected: dsgd.records.len(),
            got: sgd.records.len(),
        });
    }
    let mut within = Vec::with_capacity(dsgd.records.len());
    for (pos, (a, b)) in dsgd.records.iter().zip(&sgd.records).enumerate() {
        if a.k != b.k {
            return Err(MetricsError::GridMismatch { position: pos });
        }
        let mut u = a.u_mean.ok_or(MetricsError::MissingMetric {
            metric: "U",
            k: a.k,
        })?;
        if let TransientMetric::NodeAverage { nodes } = metric {
            let v = a.v_mean.ok_or(MetricsError::MissingMetric {
                metric: "V",
                k: a.k,
            })?;
            u = u + v / T::from_usize_lossy(nodes.max(1));
        }
        let r = b.r_mean.ok_or(MetricsError::MissingMetric {
            metric: "R",
            k: b.k,
        })?;
        within.push(u <= factor * r);
    }
    // scan backwards tracking the length of the run of satisfied points
    let len = within.len();
    let mut run = 0usize;
    let mut answer = None;
    for pos in (0..len).rev() {
        run = if within[pos] { run + 1 } else { 0 };
        if run >= window.min(len - pos) {
            answer = Some(dsgd.records[pos].k);
        }
    }
    Ok(answer)
}

/// Per-k records from one block trajectory, fed every iteration.
#[derive(Debug, Clone)]
pub struct BlockRecorder<T> {
    points: Vec<u64>,
    next: usize,
    zstar: Option<Vec<T>>,
    mode: NodeErrorMode,
    average: Option<DenseMatrix<T>>,
    records: Vec<Record<T>>,
}

impl<T: Scalar> BlockRecorder<T> {
    pub fn new(grid: MetricGrid, horizon: u64, zstar: Option<&[T]>, mode: NodeErrorMode) -> Self {
        let points = grid.points(horizon);
        Self {
            records: Vec::with_capacity(points.len()),
            points,
            next: 0,
            zstar: zstar.map(<[T]>::to_vec),
            mode,
            average: None,
        }
    }

    /// Observes `Z(k)`; must be called for `k = 0, 1, 2, ...` in order when
    /// running averages are tracked.
    pub fn observe(&mut self, k: u64, z: &DenseMatrix<T>) {
        let track = self.mode == NodeErrorMode::RunningAverage;
        if track && self.average.is_none() {
            self.average = Some(z.clone());
        }
        if self.points.get(self.next) == Some(&k) {
            self.next += 1;
            let point = match (&self.average, track) {
                (Some(y), true) => y,
                _ => z,
            };
            let (u, node) = match &self.zstar {
                Some(zs) => (
                    Some(optimization_error(z, zs)),
                    Some(node_error_max(point, zs)),
                ),
                None => (None, None),
            };
            self.records.push(Record {
                k,
                u,
                v: Some(consensus_error(z)),
                r: None,
                node_err_max: node,
            });
        }
        if track {
            let y = self.average.as_mut().expect("initialized above");
            running_average_update(y.as_mut_slice(), z.as_slice(), k + 1)
                .expect("index is at least 1");
        }
    }

    pub fn finish(self, meta: TraceMeta<T>) -> RunTrace<T> {
        RunTrace {
            records: self.records,
            meta,
        }
    }
}

/// Per-k records from one centralized trajectory.
#[derive(Debug, Clone)]
pub struct CentralRecorder<T> {
    points: Vec<u64>,
    next: usize,
    zstar: Option<Vec<T>>,
    mode: NodeErrorMode,
    average: Option<Vec<T>>,
    records: Vec<Record<T>>,
}

impl<T: Scalar> CentralRecorder<T> {
    pub fn new(grid: MetricGrid, horizon: u64, zstar: Option<&[T]>, mode: NodeErrorMode) -> Self {
        let points = grid.points(horizon);
        Self {
            records: Vec::with_capacity(points.len()),
            points,
            next: 0,
            zstar: zstar.map(<[T]>::to_vec),
            mode,
            average: None,
        }
    }

    pub fn observe(&mut self, k: u64, z: &[T]) {
        let track = self.mode == NodeErrorMode::RunningAverage;
        if track && self.average.is_none() {
            self.average = Some(z.to_vec());
        }
        if self.points.get(self.next) == Some(&k) {
            self.next += 1;
            let point = match (&self.average, track) {
                (Some(y), true) => y.as_slice(),
                _ => z,
            };
            self.records.push(Record {
                k,
                u: None,
                v: None,
                r: self.zstar.as_deref().map(|zs| central_error(point, zs)),
                node_err_max: None,
            });
        }
        if track {
            let y = self.average.as_mut().expect("initialized above");
            running_average_update(y, z, k + 1).expect("index is at least 1");
        }
    }

    pub fn finish(self, meta: TraceMeta<T>) -> RunTrace<T> {
        RunTrace {
            records: self.records,
            meta,
        }
    }
}
