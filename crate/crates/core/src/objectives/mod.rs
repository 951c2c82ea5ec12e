//! First-order oracles for the objective families `sum_i f_i(z)`.
//!
//! Each node `i` owns one local function `f_i` and can query either its exact
//! (sub)gradient or an unbiased noisy sample drawn from a caller-supplied
//! stream.

mod median;
mod quadratic;
mod ridge;

pub use median::MedianObjective;
pub use quadratic::QuadraticObjective;
pub use ridge::{ridge_optimum, RidgeObjective, RidgeParams, ZTildeMode, RIDGE_SIGMA_BOX};

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::rng::NodeRng;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("invalid objective parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Curvature and noise constants. `mu == 0` or an infinite `lipschitz`
/// marks strong convexity or smoothness as not available; `sigma_sq` bounds
/// the per-sample noise second moment `E ||g_i - grad f_i||^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants<T> {
    pub mu: T,
    pub lipschitz: T,
    pub sigma_sq: T,
}

pub trait Objective<T: Scalar>: Send + Sync {
    /// Decision-vector dimension `d`.
    fn dim(&self) -> usize;

    /// Number of local functions `n`.
    fn nodes(&self) -> usize;

    /// Exact gradient (or a subgradient) of `f_i` at `z`, written to `out`.
    fn exact_grad(&self, i: usize, z: &[T], out: &mut [T]);

    /// Unbiased noisy gradient of `f_i` at `z`, consuming draws from `rng`.
    fn sample_grad(&self, i: usize, z: &[T], rng: &mut NodeRng, out: &mut [T]);

    fn optimum(&self) -> Option<&[T]>;

    fn constants(&self) -> Constants<T>;

    /// Gradient of `f = (1/n) sum_i f_i`.
    fn full_grad(&self, z: &[T], out: &mut [T]) {
        let mut buf = vec![T::zero(); self.dim()];
        out.iter_mut().for_each(|x| *x = T::zero());
        for i in 0..self.nodes() {
            self.exact_grad(i, z, &mut buf);
            for (o, &g) in out.iter_mut().zip(&buf) {
                *o = *o + g;
            }
        }
        let n = T::from_usize_lossy(self.nodes());
        out.iter_mut().for_each(|x| *x = *x / n);
    }
}
