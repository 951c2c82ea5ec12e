use super::{Constants, Objective, ObjectiveError};
use crate::rng::NodeRng;
use crate::scalar::Scalar;

/// `f_i(z) = |z - m_i|` in one dimension; the sum is minimized by a median
/// of the `m_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianObjective<T> {
    values: Vec<T>,
    optimum: [T; 1],
}

impl<T: Scalar> MedianObjective<T> {
    pub fn new(values: Vec<T>) -> Result<Self, ObjectiveError> {
        if values.is_empty() {
            return Err(ObjectiveError::InvalidParameter(
                "median objective needs at least one value".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ObjectiveError::InvalidParameter(
                "median values must be finite".into(),
            ));
        }
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let n = sorted.len();
        // even n: midpoint of the flat segment between the two middle values
        let opt = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / T::lit(2.0)
        };
        Ok(Self {
            values,
            optimum: [opt],
        })
    }

    /// `n` values evenly spaced on `[lo, hi]`: `m_i = lo + (hi - lo) i / (n - 1)`.
    pub fn evenly_spaced(n: usize, lo: T, hi: T) -> Result<Self, ObjectiveError> {
        if n == 0 {
            return Err(ObjectiveError::InvalidParameter("n must be >= 1".into()));
        }
        if n == 1 {
            return Self::new(vec![(lo + hi) / T::lit(2.0)]);
        }
        let denom = T::from_usize_lossy(n - 1);
        Self::new(
            (0..n)
                .map(|i| lo + (hi - lo) * T::from_usize_lossy(i) / denom)
                .collect(),
        )
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Subgradient `sign(z - m_i)` with `sign(0) = 0`.
    #[inline]
    pub fn subgradient(&self, i: usize, z: T) -> T {
        let diff = z - self.values[i];
        if diff > T::zero() {
            T::one()
        } else if diff < T::zero() {
            -T::one()
        } else {
            T::zero()
        }
    }

    /// `sum_i |z - m_i|`.
    pub fn value(&self, z: T) -> T {
        self.values.iter().map(|&m| (z - m).abs()).sum()
    }
}

impl<T: Scalar> Objective<T> for MedianObjective<T> {
    fn dim(&self) -> usize {
        1
    }

    fn nodes(&self) -> usize {
        self.values.len()
    }

    fn exact_grad(&self, i: usize, z: &[T], out: &mut [T]) {
        out[0] = self.subgradient(i, z[0]);
    }

    fn sample_grad(&self, i: usize, z: &[T], _rng: &mut NodeRng, out: &mut [T]) {
        self.exact_grad(i, z, out);
    }

    fn optimum(&self) -> Option<&[T]> {
        Some(&self.optimum)
    }

    fn constants(&self) -> Constants<T> {
        Constants {
            mu: T::zero(),
            lipschitz: T::infinity(),
            sigma_sq: T::zero(),
        }
    }
}
