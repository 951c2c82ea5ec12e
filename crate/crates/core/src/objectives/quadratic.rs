use rand::Rng;
use rand_distr::StandardNormal;

use super::{Constants, Objective, ObjectiveError};
use crate::linalg::{solve, symmetric_eigenvalues, DenseMatrix};
use crate::rng::{self, NodeRng};
use crate::scalar::Scalar;

/// `f_i(z) = 1/2 (z - b_i)' A_i (z - b_i)` with symmetric positive definite
/// `A_i`. Noisy gradients add `N(0, sigma^2 / d I)`, so the per-sample noise
/// second moment is exactly `sigma^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective<T> {
    a: Vec<DenseMatrix<T>>,
    b: Vec<Vec<T>>,
    noise_sigma: T,
    optimum: Vec<T>,
    mu: T,
    lipschitz: T,
}

impl<T: Scalar> QuadraticObjective<T> {
    pub fn new(
        a: Vec<DenseMatrix<T>>,
        b: Vec<Vec<T>>,
        noise_sigma: T,
    ) -> Result<Self, ObjectiveError> {
        let invalid = |m: String| ObjectiveError::InvalidParameter(m);
        if a.is_empty() || a.len() != b.len() {
            return Err(invalid(format!(
                "need one (A_i, b_i) pair per node, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        let d = b[0].len();
        if d == 0 {
            return Err(invalid("dimension must be >= 1".into()));
        }
        if !(noise_sigma >= T::zero()) {
            return Err(invalid(format!(
                "noise sigma must be >= 0, got {noise_sigma}"
            )));
        }
        let mut mu = T::infinity();
        let mut lipschitz = T::zero();
        for (i, (ai, bi)) in a.iter().zip(&b).enumerate() {
            if ai.rows() != d || ai.cols() != d || bi.len() != d {
                return Err(invalid(format!("node {i}: inconsistent dimensions")));
            }
            for r in 0..d {
                for c in r + 1..d {
                    if ai[(r, c)] != ai[(c, r)] {
                        return Err(invalid(format!("A_{i} is not symmetric")));
                    }
                }
            }
            let eig = symmetric_eigenvalues(ai)?;
            let (hi, lo) = (eig[0], eig[d - 1]);
            if !(lo > T::zero()) {
                return Err(invalid(format!("A_{i} is not positive definite")));
            }
            mu = mu.min(lo);
            lipschitz = lipschitz.max(hi);
        }
        let mut lhs = DenseMatrix::zeros(d, d);
        let mut rhs = vec![T::zero(); d];
        for (ai, bi) in a.iter().zip(&b) {
            for r in 0..d {
                for c in 0..d {
                    lhs[(r, c)] = lhs[(r, c)] + ai[(r, c)];
                    rhs[r] = rhs[r] + ai[(r, c)] * bi[c];
                }
            }
        }
        let optimum = solve(&lhs, &rhs)?;
        Ok(Self {
            a,
            b,
            noise_sigma,
            optimum,
            mu,
            lipschitz,
        })
    }

    /// Random instance: all `A_i` share one random eigenbasis; each has
    /// eigenvalue `mu` on the first basis vector, `lipschitz` on the last,
    /// and uniform draws from `[mu, lipschitz]` elsewhere, so the average
    /// Hessian also has extreme eigenvalues exactly `mu` and `lipschitz`.
    /// Centers `b_i` are uniform on `[-5, 5]^d`.
    pub fn random(
        d: usize,
        n: usize,
        seed: u64,
        mu: T,
        lipschitz: T,
        noise_sigma: T,
    ) -> Result<Self, ObjectiveError> {
        if d == 0 || n == 0 {
            return Err(ObjectiveError::InvalidParameter(format!(
                "quadratic requires d, n >= 1 (got d={d}, n={n})"
            )));
        }
        if !(mu > T::zero() && mu <= lipschitz && lipschitz.is_finite()) {
            return Err(ObjectiveError::InvalidParameter(format!(
                "need 0 < mu <= L < inf, got mu={mu}, L={lipschitz}"
            )));
        }
        let mut r = rng::stream(seed, u64::MAX);
        let basis = random_orthonormal::<T>(d, &mut r);
        let (mu64, l64) = (mu.as_f64(), lipschitz.as_f64());
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for _ in 0..n {
            let spectrum: Vec<T> = (0..d)
                .map(|k| {
                    if k == 0 {
                        mu
                    } else if k == d - 1 {
                        lipschitz
                    } else {
                        T::lit(mu64 + (l64 - mu64) * r.random::<f64>())
                    }
                })
                .collect();
            // Q diag(s) Q', symmetrized exactly by filling one triangle
            let mut ai = DenseMatrix::zeros(d, d);
            for row in 0..d {
                for col in 0..=row {
                    let x = (0..d)
                        .map(|k| basis[(row, k)] * spectrum[k] * basis[(col, k)])
                        .sum::<T>();
                    ai[(row, col)] = x;
                    ai[(col, row)] = x;
                }
            }
            a.push(ai);
            b.push((0..d).map(|_| T::lit(r.random_range(-5.0..5.0))).collect());
        }
        let mut obj = Self::new(a, b, noise_sigma)?;
        // rounding in Q diag Q' perturbs the extremes slightly; declare the
        // constructed spectrum
        obj.mu = mu;
        obj.lipschitz = lipschitz;
        Ok(obj)
    }

    pub fn hessian(&self, i: usize) -> &DenseMatrix<T> {
        &self.a[i]
    }

    pub fn center(&self, i: usize) -> &[T] {
        &self.b[i]
    }

    pub fn noise_sigma(&self) -> T {
        self.noise_sigma
    }
}

/// Orthonormal columns from modified Gram-Schmidt on a Gaussian matrix.
fn random_orthonormal<T: Scalar>(d: usize, r: &mut NodeRng) -> DenseMatrix<T> {
    loop {
        let mut q = DenseMatrix::from_fn(d, d, |_, _| T::lit(r.sample(StandardNormal)));
        let mut ok = true;
        for k in 0..d {
            for prev in 0..k {
                let proj = (0..d).map(|i| q[(i, k)] * q[(i, prev)]).sum::<T>();
                for i in 0..d {
                    q[(i, k)] = q[(i, k)] - proj * q[(i, prev)];
                }
            }
            let norm = (0..d).map(|i| q[(i, k)] * q[(i, k)]).sum::<T>().sqrt();
            if !(norm > T::lit(1e-6)) {
                ok = false;
                break;
            }
            for i in 0..d {
                q[(i, k)] = q[(i, k)] / norm;
            }
        }
        if ok {
            return q;
        }
    }
}

impl<T: Scalar> Objective<T> for QuadraticObjective<T> {
    fn dim(&self) -> usize {
        self.b[0].len()
    }

    fn nodes(&self) -> usize {
        self.a.len()
    }

    fn exact_grad(&self, i: usize, z: &[T], out: &mut [T]) {
        let (ai, bi) = (&self.a[i], &self.b[i]);
        for (r, o) in out.iter_mut().enumerate() {
            *o = ai
                .row(r)
                .iter()
                .zip(z.iter().zip(bi))
                .fold(T::zero(), |acc, (&a, (&zc, &bc))| acc + a * (zc - bc));
        }
    }

    fn sample_grad(&self, i: usize, z: &[T], rng: &mut NodeRng, out: &mut [T]) {
        self.exact_grad(i, z, out);
        if self.noise_sigma == T::zero() {
            return;
        }
        let scale = self.noise_sigma / T::from_usize_lossy(self.dim()).sqrt();
        for o in out.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *o = *o + scale * T::lit(e);
        }
    }

    fn optimum(&self) -> Option<&[T]> {
        Some(&self.optimum)
    }

    fn constants(&self) -> Constants<T> {
        Constants {
            mu: self.mu,
            lipschitz: self.lipschitz,
            sigma_sq: self.noise_sigma * self.noise_sigma,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_hessians_basis_centers() {
        let d = 4;
        let a = vec![DenseMatrix::<f64>::identity(d); d];
        let b = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let obj = QuadraticObjective::new(a, b, 0.0).unwrap();
        for &x in obj.optimum().unwrap() {
            assert_relative_eq!(x, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn noiseless_samples_equal_exact() {
        let obj = QuadraticObjective::<f64>::random(3, 4, 9, 1.0, 3.0, 0.0).unwrap();
        let mut r = rng::stream(1, 0);
        let z = [0.3, -1.0, 2.0];
        let (mut g, mut s) = ([0.0; 3], [0.0; 3]);
        for i in 0..4 {
            obj.exact_grad(i, &z, &mut g);
            obj.sample_grad(i, &z, &mut r, &mut s);
            assert_eq!(g, s);
        }
    }

    #[test]
    fn random_instance_spectrum() {
        let obj = QuadraticObjective::<f64>::random(5, 6, 2, 0.5, 4.0, 1.0).unwrap();
        for i in 0..6 {
            let eig = symmetric_eigenvalues(obj.hessian(i)).unwrap();
            assert_relative_eq!(eig[0], 4.0, epsilon = 1e-12);
            assert_relative_eq!(eig[4], 0.5, epsilon = 1e-12);
        }
        let mut g = [0.0; 5];
        obj.full_grad(obj.optimum().unwrap(), &mut g);
        assert!(g.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(QuadraticObjective::<f64>::random(3, 2, 0, 0.0, 1.0, 1.0).is_err());
        assert!(QuadraticObjective::<f64>::random(3, 2, 0, 2.0, 1.0, 1.0).is_err());
        let not_pd = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(QuadraticObjective::new(vec![not_pd], vec![vec![0.0, 0.0]], 0.0).is_err());
    }
}
