//! Correlation matrices for simulation and the row-scan reduction bound.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{param, Error, Result};

/// Eigenvalues in `[-CLAMP, 0)` are treated as roundoff and set to zero.
const EIGEN_CLAMP: f64 = 1e-10;

/// A correlation matrix. The equicorrelated case is kept symbolic so that
/// large `n` never materializes an `n × n` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorrelationMatrix {
    /// Unit diagonal and every off-diagonal entry equal to `rho`.
    Equicorrelated { n: usize, rho: f64 },
    /// Row-major dense entries.
    Dense { n: usize, entries: Vec<f64> },
}

impl CorrelationMatrix {
    pub fn equicorrelated(n: usize, rho: f64) -> Result<Self> {
        if n == 0 {
            return Err(param("n", "matrix dimension must be at least 1"));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(param("rho", format!("equicorrelation must lie in [0, 1], got {rho}")));
        }
        Ok(Self::Equicorrelated { n, rho })
    }

    pub fn dense(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::Domain(format!("correlation matrix must be square and nonempty, got {}x{}", n, matrix.ncols())));
        }
        let m = Self::Dense { n, entries: matrix.transpose().as_slice().to_vec() };
        m.validate()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Domain("correlation matrix rows must all have length n".into()));
        }
        Self::dense(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Equicorrelated { n, .. } | Self::Dense { n, .. } => *n,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Self::Equicorrelated { rho, .. } => {
                if i == j {
                    1.0
                } else {
                    *rho
                }
            }
            Self::Dense { n, entries } => entries[i * n + j],
        }
    }

    /// Checks symmetry, unit diagonal and off-diagonal range.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Equicorrelated { n, rho } => {
                Self::equicorrelated(*n, *rho)?;
            }
            Self::Dense { n, entries } => {
                if entries.len() != n * n {
                    return Err(Error::Domain(format!("expected {} entries, got {}", n * n, entries.len())));
                }
                for i in 0..*n {
                    if (self.get(i, i) - 1.0).abs() > 1e-12 {
                        return Err(Error::Domain(format!("diagonal entry {i} is {}, not 1", self.get(i, i))));
                    }
                    for j in 0..i {
                        let (a, b) = (self.get(i, j), self.get(j, i));
                        if !a.is_finite() || (a - b).abs() > 1e-12 {
                            return Err(Error::Domain(format!("matrix is not symmetric at ({i}, {j})")));
                        }
                        if !(a > -1.0 && a <= 1.0) {
                            return Err(Error::Domain(format!("entry ({i}, {j}) = {a} outside (-1, 1]")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Rows whose off-diagonal entries are all at least `delta`.
    pub fn rows_at_least(&self, delta: f64) -> Vec<usize> {
        match self {
            Self::Equicorrelated { n, rho } => {
                if *n == 1 || *rho >= delta {
                    (0..*n).collect()
                } else {
                    Vec::new()
                }
            }
            Self::Dense { n, .. } => (0..*n)
                .filter(|&i| (0..*n).all(|j| j == i || self.get(i, j) >= delta))
                .collect(),
        }
    }

    /// A square root `L` with `L Lᵀ = Σ`: Cholesky when it succeeds, otherwise
    /// the symmetric eigendecomposition with roundoff-level negative
    /// eigenvalues clamped to zero.
    pub fn square_root(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        let m = DMatrix::from_fn(n, n, |i, j| self.get(i, j));
        if let Some(ch) = m.clone().cholesky() {
            return Ok(ch.l());
        }
        let eig = SymmetricEigen::new(m);
        let mut scales = eig.eigenvalues.clone();
        for (k, lam) in scales.iter_mut().enumerate() {
            if *lam < -EIGEN_CLAMP {
                return Err(Error::Factorization(format!(
                    "matrix is not positive semi-definite: eigenvalue {k} is {lam:e}"
                )));
            }
            *lam = lam.max(0.0).sqrt();
        }
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&scales))
    }

    /// Stable short identifier: `equi/n=…/rho=…` or a content hash.
    pub fn id(&self) -> String {
        match self {
            Self::Equicorrelated { n, rho } => format!("equi/n={n}/rho={rho}"),
            Self::Dense { entries, .. } => {
                let mut h = Sha256::new();
                for e in entries {
                    h.update(e.to_le_bytes());
                }
                let digest = h.finalize();
                let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
                format!("sigma-{hex}")
            }
        }
    }
}
