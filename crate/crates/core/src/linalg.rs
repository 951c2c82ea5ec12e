//! Small dense linear algebra: row-major matrices, a symmetric eigenvalue
//! solver (Householder tridiagonalization followed by implicit QL), and a
//! pivoted Gaussian elimination solve.

use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(LinalgError::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                got: rhs.rows,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == T::zero() {
                    continue;
                }
                let src = rhs.row(l);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    /// Column means as a vector of length `cols`.
    pub fn column_mean(&self) -> Vec<T> {
        let mut mean = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for (m, &x) in mean.iter_mut().zip(self.row(i)) {
                *m = *m + x;
            }
        }
        let n = T::from_usize_lossy(self.rows.max(1));
        mean.iter_mut().for_each(|m| *m = *m / n);
        mean
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues of a symmetric matrix, sorted in descending order.
///
/// Only the lower triangle is read.
pub fn symmetric_eigenvalues<T: Scalar>(a: &DenseMatrix<T>) -> Result<Vec<T>, LinalgError> {
    if a.rows() != a.cols() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let (mut diag, mut off) = tridiagonalize(a);
    tridiagonal_ql(&mut diag, &mut off)?;
    diag.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    Ok(diag)
}

/// Householder reduction to tridiagonal form. Returns the diagonal and the
/// subdiagonal (the latter padded with a trailing zero to length n).
fn tridiagonalize<T: Scalar>(a: &DenseMatrix<T>) -> (Vec<T>, Vec<T>) {
    let n = a.rows();
    let mut m = DenseMatrix::from_fn(n, n, |i, j| if i >= j { a[(i, j)] } else { a[(j, i)] });
    let two = T::lit(2.0);
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let x_norm = (k + 1..n)
            .fold(T::zero(), |acc, i| acc + m[(i, k)] * m[(i, k)])
            .sqrt();
        if x_norm == T::zero() {
            continue;
        }
        let x0 = m[(k + 1, k)];
        let alpha = if x0 >= T::zero() { -x_norm } else { x_norm };
        for (t, i) in (k + 1..n).enumerate() {
            v[t] = m[(i, k)];
        }
        v[0] = v[0] - alpha;
        let v_norm = v[..len]
            .iter()
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt();
        if v_norm == T::zero() {
            continue;
        }
        v[..len].iter_mut().for_each(|x| *x = *x / v_norm);

        // p = A_sub v, K = v'p, q = p - K v; A_sub <- A_sub - 2 v q' - 2 q v'
        for (t, i) in (k + 1..n).enumerate() {
            p[t] = (k + 1..n)
                .enumerate()
                .fold(T::zero(), |acc, (s, j)| acc + m[(i, j)] * v[s]);
        }
        let kk = v[..len]
            .iter()
            .zip(&p[..len])
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        for t in 0..len {
            p[t] = p[t] - kk * v[t];
        }
        for (t, i) in (k + 1..n).enumerate() {
            for (s, j) in (k + 1..n).enumerate() {
                m[(i, j)] = m[(i, j)] - two * (v[t] * p[s] + p[t] * v[s]);
            }
        }
        m[(k + 1, k)] = alpha;
        m[(k, k + 1)] = alpha;
        for i in k + 2..n {
            m[(i, k)] = T::zero();
            m[(k, i)] = T::zero();
        }
    }

    let diag = (0..n).map(|i| m[(i, i)]).collect();
    let mut off: Vec<T> = (0..n.saturating_sub(1)).map(|i| m[(i + 1, i)]).collect();
    off.push(T::zero());
    (diag, off)
}

/// Implicit QL with Wilkinson-type shifts on a symmetric tridiagonal matrix.
/// On return `diag` holds the (unsorted) eigenvalues.
fn tridiagonal_ql<T: Scalar>(diag: &mut [T], off: &mut [T]) -> Result<(), LinalgError> {
    let n = diag.len();
    let two = T::lit(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(LinalgError::NoConvergence);
            }
            let mut g = (diag[l + 1] - diag[l]) / (two * off[l]);
            let mut r = g.hypot(T::one());
            let shifted = if g >= T::zero() { g + r } else { g - r };
            g = diag[m] - diag[l] + off[l] / shifted;
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == T::zero() {
                    diag[i + 1] = diag[i + 1] - p;
                    off[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + two * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            diag[l] = diag[l] - p;
            off[l] = g;
            off[m] = T::zero();
        }
    }
    Ok(())
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m
        .as_slice()
        .iter()
        .fold(T::zero(), |acc, v| acc.max(v.abs()));
    let tiny = scale * T::epsilon() * T::from_usize_lossy(n.max(1));

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                m[(i, col)]
                    .abs()
                    .partial_cmp(&m[(j, col)].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty pivot range");
        if !(m[(pivot, col)].abs() > tiny) {
            return Err(LinalgError::Singular);
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(pivot, j)];
                m[(pivot, j)] = tmp;
            }
            x.swap(col, pivot);
        }
        let d = m[(col, col)];
        for i in col + 1..n {
            let factor = m[(i, col)] / d;
            if factor == T::zero() {
                continue;
            }
            for j in col..n {
                m[(i, j)] = m[(i, j)] - factor * m[(col, j)];
            }
            x[i] = x[i] - factor * x[col];
        }
    }
    for i in (0..n).rev() {
        let s = (i + 1..n).fold(x[i], |acc, j| acc - m[(i, j)] * x[j]);
        x[i] = s / m[(i, i)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_matrix_eigenvalues_sorted() {
        let a = DenseMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 3.0, 0.0],
            vec![0.0, 0.0, -2.0],
        ])
        .unwrap();
        let e = symmetric_eigenvalues(&a).unwrap();
        assert_eq!(e, vec![3.0, 1.0, -2.0]);
    }

    #[test]
    fn two_by_two_by_hand() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = symmetric_eigenvalues(&a).unwrap();
        assert_relative_eq!(e[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(e[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn tridiagonal_toeplitz_closed_form() {
        // tridiag(1, 2, 1) of size n: eigenvalues 2 + 2 cos(pi j / (n+1))
        let n = 12;
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                1.0
            } else {
                0.0
            }
        });
        let e = symmetric_eigenvalues(&a).unwrap();
        let mut expected: Vec<f64> = (1..=n)
            .map(|j| 2.0 + 2.0 * (std::f64::consts::PI * j as f64 / (n + 1) as f64).cos())
            .collect();
        expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (x, y) in e.iter().zip(&expected) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_and_singleton() {
        let a = DenseMatrix::<f64>::zeros(0, 0);
        assert!(symmetric_eigenvalues(&a).unwrap().is_empty());
        let b = DenseMatrix::from_rows(&[vec![0.25]]).unwrap();
        assert_eq!(symmetric_eigenvalues(&b).unwrap(), vec![0.25]);
    }

    #[test]
    fn rejects_non_square() {
        let a = DenseMatrix::<f64>::zeros(2, 3);
        assert!(matches!(
            symmetric_eigenvalues(&a),
            Err(LinalgError::NotSquare { .. })
        ));
    }

    #[test]
    fn solve_small_system() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let x = solve(&a, &[4.0, 5.0]).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn solve_detects_singular() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(solve(&a, &[1.0, 1.0]), Err(LinalgError::Singular));
    }

    #[test]
    fn f32_eigenvalues() {
        let a = DenseMatrix::<f32>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = symmetric_eigenvalues(&a).unwrap();
        assert!((e[0] - 3.0).abs() < 1e-5 && (e[1] - 1.0).abs() < 1e-5);
    }
}
