//! Online ridge regression.
//!
//! Agent `i` observes streaming pairs `(u, v)` with `u ~ Uniform[-1, 1]^d`
//! and `v = u'z~_i + eps`, `eps ~ N(0, noise_std^2)`, and minimizes
//! `f_i(z) = E[(u'z - v)^2] + rho ||z||^2`. With `E[u u'] = I/3` the local
//! Hessian is `2 (1/3 + rho) I`, so `mu = L = 2 (1/3 + rho)`.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Constants, Objective, ObjectiveError};
use crate::linalg::{solve, DenseMatrix};
use crate::rng::{self, NodeRng};
use crate::scalar::{dot, Scalar};

/// Half-width of the box `||z||_inf <= RIDGE_SIGMA_BOX` on which the declared
/// noise bound `sigma_sq` holds.
pub const RIDGE_SIGMA_BOX: f64 = 20.0;

/// Second moment of a coordinate of `Uniform[-1, 1]`.
const U_SECOND_MOMENT: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZTildeMode {
    /// Independent uniform draws on the range.
    Random,
    /// Agent `i` gets `lo + (hi - lo) i / (n - 1)` in every coordinate.
    Even,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeParams<T> {
    pub rho: T,
    /// `n x d`, row `i` is agent `i`'s true parameter.
    pub z_tilde: DenseMatrix<T>,
    pub noise_std: T,
}

impl<T: Scalar> RidgeParams<T> {
    pub fn generate(
        n: usize,
        d: usize,
        rho: T,
        range: (T, T),
        noise_std: T,
        mode: ZTildeMode,
        seed: u64,
    ) -> Result<Self, ObjectiveError> {
        if n == 0 || d == 0 {
            return Err(ObjectiveError::InvalidParameter(format!(
                "ridge requires n, d >= 1 (got n={n}, d={d})"
            )));
        }
        let (lo, hi) = range;
        if !(lo <= hi) {
            return Err(ObjectiveError::InvalidParameter(format!(
                "z_tilde range [{lo}, {hi}] is empty"
            )));
        }
        let z_tilde = match mode {
            ZTildeMode::Random => {
                let mut r = rng::stream(seed, u64::MAX);
                let (lo64, hi64) = (lo.as_f64(), hi.as_f64());
                DenseMatrix::from_fn(n, d, |_, _| {
                    let u: f64 = r.random();
                    T::lit(lo64 + (hi64 - lo64) * u)
                })
            }
            ZTildeMode::Even => {
                let denom = T::from_usize_lossy((n - 1).max(1));
                DenseMatrix::from_fn(n, d, |i, _| lo + (hi - lo) * T::from_usize_lossy(i) / denom)
            }
        };
        let p = Self {
            rho,
            z_tilde,
            noise_std,
        };
        p.check()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.z_tilde.rows()
    }

    pub fn d(&self) -> usize {
        self.z_tilde.cols()
    }

    fn check(&self) -> Result<(), ObjectiveError> {
        if !(self.rho > T::zero()) {
            return Err(ObjectiveError::InvalidParameter(format!(
                "rho must be > 0, got {}",
                self.rho
            )));
        }
        if !(self.noise_std >= T::zero()) {
            return Err(ObjectiveError::InvalidParameter(format!(
                "noise_std must be >= 0, got {}",
                self.noise_std
            )));
        }
        if self.n() == 0 || self.d() == 0 || !self.z_tilde.is_finite() {
            return Err(ObjectiveError::InvalidParameter(
                "z_tilde must be a finite non-empty n x d matrix".into(),
            ));
        }
        Ok(())
    }
}

/// Minimizer `(sum_i E[u u'] + n rho I)^{-1} sum_i E[u u'] z~_i`, assembled
/// as a general `d x d` system with `E[u u'] = I/3`.
pub fn ridge_optimum<T: Scalar>(p: &RidgeParams<T>) -> Result<Vec<T>, ObjectiveError> {
    p.check()?;
    let (n, d) = (p.n(), p.d());
    let second = T::lit(U_SECOND_MOMENT);
    let nf = T::from_usize_lossy(n);
    let mut lhs = DenseMatrix::zeros(d, d);
    let mut rhs = vec![T::zero(); d];
    for i in 0..n {
        for j in 0..d {
            lhs[(j, j)] = lhs[(j, j)] + second;
            rhs[j] = rhs[j] + second * p.z_tilde[(i, j)];
        }
    }
    for j in 0..d {
        lhs[(j, j)] = lhs[(j, j)] + nf * p.rho;
    }
    Ok(solve(&lhs, &rhs)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeObjective<T> {
    params: RidgeParams<T>,
    optimum: Vec<T>,
    sigma_sq: T,
}

impl<T: Scalar> RidgeObjective<T> {
    pub fn new(params: RidgeParams<T>) -> Result<Self, ObjectiveError> {
        let optimum = ridge_optimum(&params)?;
        let box_half = T::lit(RIDGE_SIGMA_BOX);
        let worst_dist_sq = (0..params.n())
            .map(|i| {
                params
                    .z_tilde
                    .row(i)
                    .iter()
                    .map(|&x| (box_half + x.abs()) * (box_half + x.abs()))
                    .sum::<T>()
            })
            .fold(T::zero(), T::max);
        let sigma_sq = Self::noise_moment(&params, worst_dist_sq);
        Ok(Self {
            params,
            optimum,
            sigma_sq,
        })
    }

    pub fn params(&self) -> &RidgeParams<T> {
        &self.params
    }

    /// `E ||g - grad f||^2 = 4 (1/5 + (d-2)/9) ||z - z~||^2 + 4 s^2 d / 3`,
    /// from the fourth moment `E[u_j^4] = 1/5` of the uniform features.
    fn noise_moment(params: &RidgeParams<T>, dist_sq: T) -> T {
        let d = T::from_usize_lossy(params.d());
        let four = T::lit(4.0);
        let quad = T::lit(0.2) + (d - T::lit(2.0)) / T::lit(9.0);
        four * quad * dist_sq + four * params.noise_std * params.noise_std * d / T::lit(3.0)
    }

    /// Exact per-sample noise second moment at `z` for agent `i`.
    pub fn noise_second_moment(&self, i: usize, z: &[T]) -> T {
        let dist_sq = crate::scalar::dist_sq(z, self.params.z_tilde.row(i));
        Self::noise_moment(&self.params, dist_sq)
    }

    /// Strong convexity (and smoothness) modulus `2 (1/3 + rho)`.
    pub fn modulus(&self) -> T {
        T::lit(2.0) * (T::lit(U_SECOND_MOMENT) + self.params.rho)
    }
}

impl<T: Scalar> Objective<T> for RidgeObjective<T> {
    fn dim(&self) -> usize {
        self.params.d()
    }

    fn nodes(&self) -> usize {
        self.params.n()
    }

    fn exact_grad(&self, i: usize, z: &[T], out: &mut [T]) {
        let two = T::lit(2.0);
        let second = T::lit(U_SECOND_MOMENT);
        let zt = self.params.z_tilde.row(i);
        for ((o, &zj), &tj) in out.iter_mut().zip(z).zip(zt) {
            *o = two * (second * zj - second * tj) + two * self.params.rho * zj;
        }
    }

    /// `2 (u'z - v) u + 2 rho z` for one fresh pair `(u, v)`.
    fn sample_grad(&self, i: usize, z: &[T], rng: &mut NodeRng, out: &mut [T]) {
        let two = T::lit(2.0);
        for o in out.iter_mut() {
            *o = T::lit(rng.random_range(-1.0..1.0));
        }
        let noise: f64 = rng.sample(StandardNormal);
        let u = &*out;
        let v = dot(u, self.params.z_tilde.row(i)) + self.params.noise_std * T::lit(noise);
        let residual = two * (dot(u, z) - v);
        for (o, &zj) in out.iter_mut().zip(z) {
            *o = residual * *o + two * self.params.rho * zj;
        }
    }

    fn optimum(&self) -> Option<&[T]> {
        Some(&self.optimum)
    }

    fn constants(&self) -> Constants<T> {
        let m = self.modulus();
        Constants {
            mu: m,
            lipschitz: m,
            sigma_sq: self.sigma_sq,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(z_tilde: Vec<Vec<f64>>, rho: f64, noise: f64) -> RidgeParams<f64> {
        RidgeParams {
            rho,
            z_tilde: DenseMatrix::from_rows(&z_tilde).unwrap(),
            noise_std: noise,
        }
    }

    #[test]
    fn exact_grad_one_dimension() {
        let obj = RidgeObjective::new(params(vec![vec![3.0]], 0.1, 1.0)).unwrap();
        let mut g = [0.0];
        obj.exact_grad(0, &[0.0], &mut g);
        assert_relative_eq!(g[0], -2.0, epsilon = 1e-15);
    }

    #[test]
    fn true_parameter_stationary_without_penalty() {
        // rho must be positive; a negligible penalty stands in for zero
        let obj = RidgeObjective::new(params(vec![vec![1.5, -2.0]], 1e-300, 0.0)).unwrap();
        let mut g = [0.0; 2];
        obj.exact_grad(0, &[1.5, -2.0], &mut g);
        assert!(g.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn rho_must_be_positive() {
        assert!(RidgeObjective::new(params(vec![vec![1.0]], 0.0, 1.0)).is_err());
        assert!(RidgeObjective::new(params(vec![vec![1.0]], -1.0, 1.0)).is_err());
    }

    #[test]
    fn optimum_reduced_formula() {
        let c = 2.5;
        let p = params(vec![vec![c; 3]; 4], 0.1, 1.0);
        let z = ridge_optimum(&p).unwrap();
        for x in z {
            assert_relative_eq!(x, c / (1.0 + 3.0 * 0.1), epsilon = 1e-14);
        }
        let p = params(vec![vec![0.0]], 0.1, 1.0);
        assert_eq!(ridge_optimum(&p).unwrap(), vec![0.0]);
    }

    #[test]
    fn optimum_with_mean_five() {
        // z~ rows averaging to 5 in every coordinate, d = 10
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![3.5 + i as f64; 10]).collect();
        let z = ridge_optimum(&params(rows, 0.1, 1.0)).unwrap();
        for x in z {
            assert_relative_eq!(x, 5.0 / 1.3, epsilon = 1e-13);
        }
    }

    #[test]
    fn generated_instances() {
        let p =
            RidgeParams::generate(50, 10, 0.1, (0.0, 10.0), 1.0, ZTildeMode::Random, 3).unwrap();
        assert!(p
            .z_tilde
            .as_slice()
            .iter()
            .all(|&x| (0.0..10.0).contains(&x)));
        assert_eq!(
            p,
            RidgeParams::generate(50, 10, 0.1, (0.0, 10.0), 1.0, ZTildeMode::Random, 3).unwrap()
        );
        let e = RidgeParams::generate(3, 2, 0.1, (0.0, 10.0), 1.0, ZTildeMode::Even, 0).unwrap();
        assert_eq!(e.z_tilde.row(0), &[0.0, 0.0]);
        assert_eq!(e.z_tilde.row(1), &[5.0, 5.0]);
        assert_eq!(e.z_tilde.row(2), &[10.0, 10.0]);
    }

    #[test]
    fn constants() {
        let obj = RidgeObjective::new(params(vec![vec![1.0; 2]], 0.1, 1.0)).unwrap();
        let c = obj.constants();
        assert_relative_eq!(c.mu, 2.0 * (1.0 / 3.0 + 0.1), epsilon = 1e-15);
        assert_eq!(c.mu, c.lipschitz);
        assert!(c.sigma_sq > 0.0);
    }
}
