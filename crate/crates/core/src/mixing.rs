//! Doubly stochastic mixing matrices over a communication graph.
//!
//! A [`MixingMatrix`] is nonnegative, symmetric and doubly stochastic with a
//! sparsity pattern that matches its graph. Multiplying an iterate block by
//! it is one round of neighbor averaging. The spectral quantity
//! `lambda = max(|l_2|, |l_n|)` bounds how fast repeated averaging contracts
//! the disagreement between nodes, and is cached at construction.

use std::fmt;

use thiserror::Error;

use crate::graph::Graph;
use crate::linalg::{symmetric_eigenvalues, DenseMatrix, LinalgError};
use crate::scalar::Scalar;

/// Tolerance for row and column sums in `f64`.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Row/column-sum tolerance for an `n`-node matrix in scalar type `T`:
/// [`STOCHASTIC_TOL`], widened to `4 n eps` for low-precision types.
pub fn stochastic_tol<T: Scalar>(n: usize) -> T {
    let rounding = T::lit(4.0) * T::from_usize_lossy(n.max(1)) * T::epsilon();
    rounding.max(T::lit(STOCHASTIC_TOL))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixingError {
    #[error("graph is not connected")]
    Disconnected,
    #[error("invalid mixing matrix: {0}")]
    Invalid(ValidationReport),
    #[error("dimension mismatch: matrix has {expected} rows, iterate block has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixingRule {
    Metropolis,
    LazyMetropolis,
    Custom,
}

impl MixingRule {
    pub fn name(self) -> &'static str {
        match self {
            Self::Metropolis => "metropolis",
            Self::LazyMetropolis => "lazy_metropolis",
            Self::Custom => "custom",
        }
    }
}

impl fmt::Display for MixingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotSquare { rows: usize, cols: usize },
    SizeMismatch { matrix: usize, graph: usize },
    NonFinite { i: usize, j: usize },
    Negative { i: usize, j: usize, value: f64 },
    Asymmetric { i: usize, j: usize },
    RowSum { i: usize, sum: f64 },
    ColumnSum { j: usize, sum: f64 },
    SparsityPattern { i: usize, j: usize },
    NoPositiveDiagonal,
    Disconnected,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotSquare { rows, cols } => write!(f, "matrix not square ({rows}x{cols})"),
            Self::SizeMismatch { matrix, graph } => {
                write!(f, "size mismatch: matrix n={matrix}, graph n={graph}")
            }
            Self::NonFinite { i, j } => write!(f, "non-finite entry at ({i}, {j})"),
            Self::Negative { i, j, value } => {
                write!(f, "nonnegativity violated at ({i}, {j}): {value}")
            }
            Self::Asymmetric { i, j } => write!(f, "symmetry violated at ({i}, {j})"),
            Self::RowSum { i, sum } => {
                write!(f, "row-stochasticity violated: row {i} sums to {sum}")
            }
            Self::ColumnSum { j, sum } => {
                write!(f, "column-stochasticity violated: column {j} sums to {sum}")
            }
            Self::SparsityPattern { i, j } => {
                write!(
                    f,
                    "sparsity-pattern violated: w[{i}][{j}] > 0 but ({i}, {j}) is not an edge"
                )
            }
            Self::NoPositiveDiagonal => f.write_str("no strictly positive diagonal entry"),
            Self::Disconnected => f.write_str("graph is not connected"),
        }
    }
}

/// Outcome of [`validate`]; empty means every check passed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Checks a candidate matrix against the mixing-matrix requirements. When a
/// graph is supplied, also checks connectivity and that off-diagonal
/// support lies on edges.
pub fn validate<T: Scalar>(w: &DenseMatrix<T>, graph: Option<&Graph>) -> ValidationReport {
    let mut violations = Vec::new();
    let n = w.rows();
    if w.cols() != n {
        violations.push(Violation::NotSquare {
            rows: n,
            cols: w.cols(),
        });
        return ValidationReport { violations };
    }
    if let Some(g) = graph {
        if g.n() != n {
            violations.push(Violation::SizeMismatch {
                matrix: n,
                graph: g.n(),
            });
            return ValidationReport { violations };
        }
        if !g.is_connected() {
            violations.push(Violation::Disconnected);
        }
    }
    let tol = stochastic_tol::<T>(n);
    for i in 0..n {
        for j in 0..n {
            let x = w[(i, j)];
            if !x.is_finite() {
                violations.push(Violation::NonFinite { i, j });
                continue;
            }
            if x < T::zero() {
                violations.push(Violation::Negative {
                    i,
                    j,
                    value: x.as_f64(),
                });
            }
            if j > i && x != w[(j, i)] {
                violations.push(Violation::Asymmetric { i, j });
            }
            if let Some(g) = graph {
                if i != j && x > T::zero() && !g.has_edge(i, j) {
                    violations.push(Violation::SparsityPattern { i, j });
                }
            }
        }
        let row: T = w.row(i).iter().copied().sum();
        if (row - T::one()).abs() > tol || !row.is_finite() {
            violations.push(Violation::RowSum {
                i,
                sum: row.as_f64(),
            });
        }
    }
    for j in 0..n {
        let col: T = (0..n).map(|i| w[(i, j)]).sum();
        if (col - T::one()).abs() > tol || !col.is_finite() {
            violations.push(Violation::ColumnSum {
                j,
                sum: col.as_f64(),
            });
        }
    }
    if n > 0 && !(0..n).any(|i| w[(i, i)] > T::zero()) {
        violations.push(Violation::NoPositiveDiagonal);
    }
    ValidationReport { violations }
}

/// `max(|l_2|, |l_n|)` for a valid mixing matrix, from a symmetric
/// eigensolver. A 1x1 matrix has no second eigenvalue and yields 0.
pub fn spectral_lambda<T: Scalar>(w: &DenseMatrix<T>) -> Result<T, MixingError> {
    let report = validate(w, None);
    if !report.is_valid() {
        return Err(MixingError::Invalid(report));
    }
    lambda_of(w)
}

fn lambda_of<T: Scalar>(w: &DenseMatrix<T>) -> Result<T, MixingError> {
    let eig = symmetric_eigenvalues(w)?;
    Ok(match eig.len() {
        0 | 1 => T::zero(),
        len => eig[1].abs().max(eig[len - 1].abs()),
    })
}

/// Validated mixing matrix with its cached spectral quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix<T> {
    w: DenseMatrix<T>,
    lambda: T,
    rule: MixingRule,
    // nonzero (column, weight) pairs per row, ascending column order
    support: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> MixingMatrix<T> {
    /// Lazy Metropolis weights: `1 / (2 max(deg i, deg j))` on edges, the
    /// complement on the diagonal. Every diagonal entry is at least 1/2.
    pub fn lazy_metropolis(g: &Graph) -> Result<Self, MixingError> {
        Self::from_edge_weights(g, MixingRule::LazyMetropolis, |di, dj| {
            T::one() / (T::lit(2.0) * T::from_usize_lossy(di.max(dj)))
        })
    }

    /// Standard Metropolis weights: `1 / (1 + max(deg i, deg j))` on edges,
    /// the complement on the diagonal.
    pub fn metropolis(g: &Graph) -> Result<Self, MixingError> {
        Self::from_edge_weights(g, MixingRule::Metropolis, |di, dj| {
            T::one() / (T::one() + T::from_usize_lossy(di.max(dj)))
        })
    }

    pub fn with_rule(g: &Graph, rule: MixingRule) -> Result<Self, MixingError> {
        match rule {
            MixingRule::Metropolis => Self::metropolis(g),
            MixingRule::LazyMetropolis => Self::lazy_metropolis(g),
            MixingRule::Custom => Err(MixingError::Invalid(ValidationReport::default())),
        }
    }

    fn from_edge_weights(
        g: &Graph,
        rule: MixingRule,
        weight: impl Fn(usize, usize) -> T,
    ) -> Result<Self, MixingError> {
        if !g.is_connected() {
            return Err(MixingError::Disconnected);
        }
        let n = g.n();
        let deg: Vec<usize> = (0..n).map(|i| g.neighbors(i).len()).collect();
        let mut w = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let mut off = T::zero();
            for &j in g.neighbors(i) {
                let x = weight(deg[i], deg[j]);
                w[(i, j)] = x;
                off = off + x;
            }
            w[(i, i)] = T::one() - off;
        }
        let report = validate(&w, Some(g));
        if !report.is_valid() {
            return Err(MixingError::Invalid(report));
        }
        Self::assemble(w, rule)
    }

    /// Wraps a user-supplied matrix after validating it (without a graph).
    pub fn custom(w: DenseMatrix<T>) -> Result<Self, MixingError> {
        let report = validate(&w, None);
        if !report.is_valid() {
            return Err(MixingError::Invalid(report));
        }
        Self::assemble(w, MixingRule::Custom)
    }

    /// Exact averaging `(1/n) 11'`.
    pub fn uniform(n: usize) -> Result<Self, MixingError> {
        let x = T::one() / T::from_usize_lossy(n);
        Self::custom(DenseMatrix::from_fn(n, n, |_, _| x))
    }

    pub fn identity(n: usize) -> Result<Self, MixingError> {
        Self::custom(DenseMatrix::identity(n))
    }

    fn assemble(w: DenseMatrix<T>, rule: MixingRule) -> Result<Self, MixingError> {
        let lambda = lambda_of(&w)?;
        let support = (0..w.rows())
            .map(|i| {
                w.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x != T::zero())
                    .map(|(j, &x)| (j, x))
                    .collect()
            })
            .collect();
        Ok(Self {
            w,
            lambda,
            rule,
            support,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.w.rows()
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn rule(&self) -> MixingRule {
        self.rule
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.w
    }

    pub fn weight(&self, i: usize, j: usize) -> T {
        self.w[(i, j)]
    }

    pub fn validate(&self, g: &Graph) -> ValidationReport {
        validate(&self.w, Some(g))
    }

    /// `out = W z`, summing each row's nonzero terms in ascending column
    /// order.
    pub fn mix_into(
        &self,
        z: &DenseMatrix<T>,
        out: &mut DenseMatrix<T>,
    ) -> Result<(), MixingError> {
        if z.rows() != self.n() {
            return Err(MixingError::DimensionMismatch {
                expected: self.n(),
                got: z.rows(),
            });
        }
        if out.rows() != z.rows() || out.cols() != z.cols() {
            *out = DenseMatrix::zeros(z.rows(), z.cols());
        }
        for (i, row) in self.support.iter().enumerate() {
            let dst = out.row_mut(i);
            dst.iter_mut().for_each(|x| *x = T::zero());
            for &(j, wij) in row {
                for (o, &s) in dst.iter_mut().zip(z.row(j)) {
                    *o = *o + wij * s;
                }
            }
        }
        Ok(())
    }

    /// One round of neighbor averaging: returns `W z`.
    pub fn mix(&self, z: &DenseMatrix<T>) -> Result<DenseMatrix<T>, MixingError> {
        let mut out = DenseMatrix::zeros(z.rows(), z.cols());
        self.mix_into(z, &mut out)?;
        Ok(out)
    }
}
