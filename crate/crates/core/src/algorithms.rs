//! Step functions for consensus-based distributed optimization and their
//! centralized counterparts.
//!
//! Distributed methods act on an [`IterateBlock`] (row `i` is node `i`'s
//! copy of the decision vector) and apply `Z <- W (Z - alpha_k G)`: every
//! node takes a local step and the results are then averaged over
//! neighbors. Centralized methods act on a single vector with the averaged
//! gradient of all `n` local functions, so both consume `n` gradient
//! queries per iteration.
//!
//! The step taken from state `k` uses the stepsize evaluated at `k + 1`.

use std::ops::ControlFlow;

use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::metrics::{
    BlockRecorder, CentralRecorder, MetricGrid, NodeErrorMode, RunTrace, TraceMeta,
};
use crate::mixing::{MixingError, MixingMatrix};
use crate::objectives::Objective;
use crate::rng::{self, NodeRng};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgorithmError {
    #[error("non-finite iterate after step {iteration}")]
    Divergence { iteration: u64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("algorithm `{0}` requires an objective")]
    MissingObjective(&'static str),
    #[error("invalid stepsize schedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Mixing(#[from] MixingError),
}

/// Stepsize sequence `alpha_k`, defined for `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule<T> {
    Constant {
        c: T,
    },
    /// `c / sqrt(k)`
    InvSqrt {
        c: T,
    },
    /// `c / (k + offset)`
    Inv {
        c: T,
        offset: T,
    },
    /// `1 / (mu k)`
    MuInv {
        mu: T,
    },
}

impl<T: Scalar> StepSchedule<T> {
    /// Checks nonnegativity and that the sequence is finite and
    /// non-increasing for `k >= 1`.
    pub fn validate(&self) -> Result<(), AlgorithmError> {
        let bad = |m: String| Err(AlgorithmError::InvalidSchedule(m));
        match *self {
            Self::Constant { c } | Self::InvSqrt { c } if !(c >= T::zero() && c.is_finite()) => {
                bad(format!("c must be finite and >= 0, got {c}"))
            }
            Self::Inv { c, offset } => {
                if !(c >= T::zero() && c.is_finite()) {
                    bad(format!("c must be finite and >= 0, got {c}"))
                } else if !(offset > -T::one() && offset.is_finite()) {
                    bad(format!("offset must be finite and > -1, got {offset}"))
                } else {
                    Ok(())
                }
            }
            Self::MuInv { mu } if !(mu > T::zero() && mu.is_finite()) => {
                bad(format!("mu must be finite and > 0, got {mu}"))
            }
            _ => Ok(()),
        }
    }

    /// `alpha_k`.
    ///
    /// # Panics
    /// If `k == 0`.
    #[inline]
    pub fn at(&self, k: u64) -> T {
        assert!(k >= 1, "stepsize schedules are indexed from k = 1");
        let kf = T::from_u64(k).expect("iteration index representable");
        match *self {
            Self::Constant { c } => c,
            Self::InvSqrt { c } => c / kf.sqrt(),
            Self::Inv { c, offset } => c / (kf + offset),
            Self::MuInv { mu } => T::one() / (mu * kf),
        }
    }
}

/// Per-node iterates `z_i(k)` stacked as rows, with the iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateBlock<T> {
    pub z: DenseMatrix<T>,
    pub k: u64,
}

impl<T: Scalar> IterateBlock<T> {
    pub fn new(z: DenseMatrix<T>) -> Self {
        Self { z, k: 0 }
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self::new(DenseMatrix::zeros(n, d))
    }

    pub fn n(&self) -> usize {
        self.z.rows()
    }

    pub fn d(&self) -> usize {
        self.z.cols()
    }
}

/// Single decision vector of a centralized method.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralState<T> {
    pub z: Vec<T>,
    pub k: u64,
}

impl<T: Scalar> CentralState<T> {
    pub fn new(z: Vec<T>) -> Self {
        Self { z, k: 0 }
    }
}

fn check_block<T: Scalar>(
    state: &IterateBlock<T>,
    w: &MixingMatrix<T>,
    obj: Option<&dyn Objective<T>>,
) -> Result<(), AlgorithmError> {
    if state.n() != w.n() {
        return Err(AlgorithmError::DimensionMismatch(format!(
            "iterate block has {} rows, mixing matrix is {}x{}",
            state.n(),
            w.n(),
            w.n()
        )));
    }
    if let Some(obj) = obj {
        if obj.nodes() != state.n() || obj.dim() != state.d() {
            return Err(AlgorithmError::DimensionMismatch(format!(
                "objective has n={}, d={}; iterate block is {}x{}",
                obj.nodes(),
                obj.dim(),
                state.n(),
                state.d()
            )));
        }
    }
    Ok(())
}

fn check_rngs(rngs: &[NodeRng], n: usize) -> Result<(), AlgorithmError> {
    if rngs.len() != n {
        return Err(AlgorithmError::DimensionMismatch(format!(
            "{} random streams for {n} nodes",
            rngs.len()
        )));
    }
    Ok(())
}

fn ensure_finite<T: Scalar>(values: &[T], iteration: u64) -> Result<(), AlgorithmError> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(AlgorithmError::Divergence { iteration })
    }
}

/// Local gradient source for one distributed step.
enum Gradients<'a, T> {
    None,
    Exact(&'a dyn Objective<T>),
    Sampled(&'a dyn Objective<T>, &'a mut [NodeRng]),
}

/// Reusable buffers for block updates.
#[derive(Debug, Clone)]
struct BlockWorkspace<T> {
    local: DenseMatrix<T>,
}

impl<T: Scalar> BlockWorkspace<T> {
    fn new(n: usize, d: usize) -> Self {
        Self {
            local: DenseMatrix::zeros(n, d),
        }
    }

    /// `out <- W (Z - alpha G)`.
    fn step(
        &mut self,
        state: &IterateBlock<T>,
        w: &MixingMatrix<T>,
        grads: Gradients<'_, T>,
        schedule: &StepSchedule<T>,
        out: &mut IterateBlock<T>,
    ) -> Result<(), AlgorithmError> {
        let next = state.k + 1;
        if self.local.rows() != state.n() || self.local.cols() != state.d() {
            self.local = DenseMatrix::zeros(state.n(), state.d());
        }
        match grads {
            Gradients::None => self
                .local
                .as_mut_slice()
                .copy_from_slice(state.z.as_slice()),
            Gradients::Exact(obj) => {
                let alpha = schedule.at(next);
                for i in 0..state.n() {
                    let dst = self.local.row_mut(i);
                    obj.exact_grad(i, state.z.row(i), dst);
                    for (x, &zi) in dst.iter_mut().zip(state.z.row(i)) {
                        *x = zi - alpha * *x;
                    }
                }
            }
            Gradients::Sampled(obj, rngs) => {
                let alpha = schedule.at(next);
                for (i, rng) in rngs.iter_mut().enumerate() {
                    let dst = self.local.row_mut(i);
                    obj.sample_grad(i, state.z.row(i), rng, dst);
                    for (x, &zi) in dst.iter_mut().zip(state.z.row(i)) {
                        *x = zi - alpha * *x;
                    }
                }
            }
        }
        w.mix_into(&self.local, &mut out.z)?;
        out.k = next;
        ensure_finite(out.z.as_slice(), next)?;
        debug_assert!(
            mean_preserved(&self.local, &out.z),
            "mixing changed the network average at step {next}"
        );
        Ok(())
    }
}

/// Column means of `before` and `after` agree to the stochasticity
/// tolerance relative to the largest entry.
fn mean_preserved<T: Scalar>(before: &DenseMatrix<T>, after: &DenseMatrix<T>) -> bool {
    let scale = before
        .as_slice()
        .iter()
        .fold(T::one(), |m, x| m.max(x.abs()));
    let tol = crate::mixing::stochastic_tol::<T>(before.rows()) * scale;
    before
        .column_mean()
        .iter()
        .zip(after.column_mean())
        .all(|(a, b)| (*a - b).abs() <= tol)
}

/// Consensus averaging `z_i(k+1) = sum_j w_ij z_j(k)`.
pub fn consensus_step<T: Scalar>(
    state: &IterateBlock<T>,
    w: &MixingMatrix<T>,
) -> Result<IterateBlock<T>, AlgorithmError> {
    check_block(state, w, None)?;
    let mut out = state.clone();
    BlockWorkspace::new(state.n(), state.d()).step(
        state,
        w,
        Gradients::None,
        &StepSchedule::Constant { c: T::zero() },
        &mut out,
    )?;
    Ok(out)
}

/// Distributed stochastic gradient descent:
/// `z_i(k+1) = sum_j w_ij (z_j(k) - alpha_k g_j(k))`, one gradient sample
/// per node drawn from that node's stream `rngs[j]`.
pub fn dsgd_step<T: Scalar>(
    state: &IterateBlock<T>,
    w: &MixingMatrix<T>,
    obj: &dyn Objective<T>,
    schedule: &StepSchedule<T>,
    rngs: &mut [NodeRng],
) -> Result<IterateBlock<T>, AlgorithmError> {
    check_block(state, w, Some(obj))?;
    check_rngs(rngs, state.n())?;
    let mut out = state.clone();
    BlockWorkspace::new(state.n(), state.d()).step(
        state,
        w,
        Gradients::Sampled(obj, rngs),
        schedule,
        &mut out,
    )?;
    Ok(out)
}

/// Distributed subgradient method with exact local subgradients:
/// `z_i(k+1) = sum_j w_ij (z_j(k) - alpha_k s_j(z_j(k)))`.
pub fn subgradient_step<T: Scalar>(
    state: &IterateBlock<T>,
    w: &MixingMatrix<T>,
    obj: &dyn Objective<T>,
    schedule: &StepSchedule<T>,
) -> Result<IterateBlock<T>, AlgorithmError> {
    check_block(state, w, Some(obj))?;
    let mut out = state.clone();
    BlockWorkspace::new(state.n(), state.d()).step(
        state,
        w,
        Gradients::Exact(obj),
        schedule,
        &mut out,
    )?;
    Ok(out)
}

fn check_central<T: Scalar>(
    state: &CentralState<T>,
    obj: &dyn Objective<T>,
) -> Result<(), AlgorithmError> {
    if state.z.len() != obj.dim() {
        return Err(AlgorithmError::DimensionMismatch(format!(
            "state has d={}, objective has d={}",
            state.z.len(),
            obj.dim()
        )));
    }
    Ok(())
}

fn central_into<T: Scalar>(
    state: &CentralState<T>,
    obj: &dyn Objective<T>,
    schedule: &StepSchedule<T>,
    mut rngs: Option<&mut [NodeRng]>,
    buf: &mut [T],
    sum: &mut [T],
    out: &mut CentralState<T>,
) -> Result<(), AlgorithmError> {
    let next = state.k + 1;
    let alpha = schedule.at(next);
    sum.iter_mut().for_each(|x| *x = T::zero());
    for i in 0..obj.nodes() {
        match rngs.as_deref_mut() {
            Some(rngs) => obj.sample_grad(i, &state.z, &mut rngs[i], buf),
            None => obj.exact_grad(i, &state.z, buf),
        }
        for (s, &g) in sum.iter_mut().zip(buf.iter()) {
            *s = *s + g;
        }
    }
    let n = T::from_usize_lossy(obj.nodes());
    out.z.resize(state.z.len(), T::zero());
    for ((o, &z), &s) in out.z.iter_mut().zip(&state.z).zip(sum.iter()) {
        *o = z - alpha * (s / n);
    }
    out.k = next;
    ensure_finite(&out.z, next)
}

/// Centralized SGD: `z(k+1) = z(k) - alpha_k (1/n) sum_i g_i(z(k))`, drawing
/// node `i`'s sample from `rngs[i]`.
pub fn sgd_step<T: Scalar>(
    state: &CentralState<T>,
    obj: &dyn Objective<T>,
    schedule: &StepSchedule<T>,
    rngs: &mut [NodeRng],
) -> Result<CentralState<T>, AlgorithmError> {
    check_central(state, obj)?;
    check_rngs(rngs, obj.nodes())?;
    let d = obj.dim();
    let mut out = state.clone();
    central_into(
        state,
        obj,
        schedule,
        Some(rngs),
        &mut vec![T::zero(); d],
        &mut vec![T::zero(); d],
        &mut out,
    )?;
    Ok(out)
}

/// Centralized subgradient method: `z(k+1) = z(k) - alpha_k (1/n) sum_j s_j(z(k))`.
pub fn centralized_subgradient_step<T: Scalar>(
    state: &CentralState<T>,
    obj: &dyn Objective<T>,
    schedule: &StepSchedule<T>,
) -> Result<CentralState<T>, AlgorithmError> {
    check_central(state, obj)?;
    let d = obj.dim();
    let mut out = state.clone();
    central_into(
        state,
        obj,
        schedule,
        None,
        &mut vec![T::zero(); d],
        &mut vec![T::zero(); d],
        &mut out,
    )?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Consensus,
    DistributedSubgradient,
    Dsgd,
    CentralSubgradient,
    Sgd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Consensus => "consensus",
            Self::DistributedSubgradient => "dist_subgrad",
            Self::Dsgd => "dsgd",
            Self::CentralSubgradient => "central_subgrad",
            Self::Sgd => "sgd",
        }
    }

    pub fn is_distributed(self) -> bool {
        matches!(
            self,
            Self::Consensus | Self::DistributedSubgradient | Self::Dsgd
        )
    }

    pub fn needs_objective(self) -> bool {
        self != Self::Consensus
    }
}

/// Current state handed to observers.
#[derive(Debug, Clone, Copy)]
pub enum StateView<'a, T> {
    Block(&'a DenseMatrix<T>),
    Central(&'a [T]),
}

/// Iterates `algorithm` for up to `iterations` steps from `init` (an `n x d`
/// block; centralized methods start from its column mean). `observe` sees
/// the state at `k = 0` and after every step and may stop the run early.
/// Node `i` draws its gradient samples from stream `i` under `seed`.
///
/// Returns the number of steps taken.
#[allow(clippy::too_many_arguments)]
pub fn simulate<T, F>(
    algorithm: Algorithm,
    schedule: &StepSchedule<T>,
    iterations: u64,
    seed: u64,
    w: &MixingMatrix<T>,
    objective: Option<&dyn Objective<T>>,
    init: &DenseMatrix<T>,
    mut observe: F,
) -> Result<u64, AlgorithmError>
where
    T: Scalar,
    F: FnMut(u64, StateView<'_, T>) -> ControlFlow<()>,
{
    schedule.validate()?;
    let obj = match (objective, algorithm.needs_objective()) {
        (Some(o), true) => Some(o),
        (None, true) => return Err(AlgorithmError::MissingObjective(algorithm.name())),
        (_, false) => None,
    };
    let mut state = IterateBlock::new(init.clone());
    check_block(&state, w, obj)?;
    let n = init.rows();
    let mut rngs = rng::node_streams(seed, n);

    if algorithm.is_distributed() {
        let mut ws = BlockWorkspace::new(n, init.cols());
        let mut next = state.clone();
        if observe(0, StateView::Block(&state.z)).is_break() {
            return Ok(0);
        }
        for _ in 0..iterations {
            let grads = match (algorithm, obj) {
                (Algorithm::Dsgd, Some(o)) => Gradients::Sampled(o, &mut rngs),
                (Algorithm::DistributedSubgradient, Some(o)) => Gradients::Exact(o),
                _ => Gradients::None,
            };
            ws.step(&state, w, grads, schedule, &mut next)?;
            std::mem::swap(&mut state, &mut next);
            if observe(state.k, StateView::Block(&state.z)).is_break() {
                break;
            }
        }
        Ok(state.k)
    } else {
        let obj = obj.expect("centralized methods need an objective");
        let d = obj.dim();
        let mut central = CentralState::new(init.column_mean());
        let mut next = central.clone();
        let (mut buf, mut sum) = (vec![T::zero(); d], vec![T::zero(); d]);
        if observe(0, StateView::Central(&central.z)).is_break() {
            return Ok(0);
        }
        for _ in 0..iterations {
            let streams = (algorithm == Algorithm::Sgd).then_some(rngs.as_mut_slice());
            central_into(
                &central, obj, schedule, streams, &mut buf, &mut sum, &mut next,
            )?;
            std::mem::swap(&mut central, &mut next);
            if observe(central.k, StateView::Central(&central.z)).is_break() {
                break;
            }
        }
        Ok(central.k)
    }
}

/// Settings for [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec<T> {
    pub algorithm: Algorithm,
    pub schedule: StepSchedule<T>,
    pub iterations: u64,
    pub seed: u64,
    pub grid: MetricGrid,
    pub node_error: NodeErrorMode,
    pub label: String,
}

/// Runs one replication and records metrics on `spec.grid`.
pub fn run<T: Scalar>(
    spec: &RunSpec<T>,
    w: &MixingMatrix<T>,
    objective: Option<&dyn Objective<T>>,
    init: &DenseMatrix<T>,
) -> Result<RunTrace<T>, AlgorithmError> {
    let zstar = objective.and_then(|o| o.optimum());
    let meta = TraceMeta {
        seed: spec.seed,
        lambda: w.lambda(),
        label: spec.label.clone(),
    };
    if spec.algorithm.is_distributed() {
        let mut rec = BlockRecorder::new(spec.grid, spec.iterations, zstar, spec.node_error);
        simulate(
            spec.algorithm,
            &spec.schedule,
            spec.iterations,
            spec.seed,
            w,
            objective,
            init,
            |k, view| {
                if let StateView::Block(z) = view {
                    rec.observe(k, z);
                }
                ControlFlow::Continue(())
            },
        )?;
        Ok(rec.finish(meta))
    } else {
        let mut rec = CentralRecorder::new(spec.grid, spec.iterations, zstar, spec.node_error);
        simulate(
            spec.algorithm,
            &spec.schedule,
            spec.iterations,
            spec.seed,
            w,
            objective,
            init,
            |k, view| {
                if let StateView::Central(z) = view {
                    rec.observe(k, z);
                }
                ControlFlow::Continue(())
            },
        )?;
        Ok(rec.finish(meta))
    }
}
