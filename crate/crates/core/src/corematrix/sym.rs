use serde::{Deserialize, Serialize};

use super::{spectral, TOL_PSD};
use crate::error::{MrcError, Result};

/// Dense symmetric matrix. Every mutator writes both `(i, j)` and `(j, i)`, so
/// the stored buffer is symmetric by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on `i <= j` only.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// `(1 - rho) I + rho J`.
    pub fn equicorrelation(dim: usize, rho: f64) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { rho })
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Reads a full row-major buffer, rejecting asymmetric input beyond `1e-12`.
    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(MrcError::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let (u, l) = (data[i * dim + j], data[j * dim + i]);
                if (u - l).abs() > 1e-12 * (1.0 + u.abs()) {
                    return Err(MrcError::InvalidParameter(format!(
                        "matrix is not symmetric at ({i}, {j}): {u} vs {l}"
                    )));
                }
                m.set(i, j, 0.5 * (u + l));
            }
        }
        Ok(m)
    }

    /// Wraps a buffer the caller guarantees to be symmetric.
    pub(crate) fn from_symmetric_buffer(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        SymMatrix { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    /// Full row-major view.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Mutable row-major view; callers must keep the buffer symmetric.
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).take(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Plain product `self * other` as a row-major buffer (not symmetric in general).
    pub fn matmul(&self, other: &SymMatrix) -> Vec<f64> {
        assert_eq!(self.dim, other.dim);
        matmul(&self.data, &other.data, self.dim)
    }

    /// Principal submatrix on the given index list.
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut vals = spectral::SymEigen::new(self).values;
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = MrcError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(MrcError::DimensionMismatch { expected: dim, got: bad.len() });
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_row_major(dim, &flat)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.rows()
    }
}

pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Symmetric matrix with unit diagonal and nonnegative spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymMatrix", into = "SymMatrix")]
pub struct CorrelationMatrix(SymMatrix);

impl CorrelationMatrix {
    pub fn identity(dim: usize) -> Self {
        CorrelationMatrix(SymMatrix::identity(dim))
    }

    /// Equicorrelation matrix; valid for `rho` in `[-1/(d-1), 1]`.
    pub fn equicorrelation(dim: usize, rho: f64) -> Result<Self> {
        super::validate_correlation(&SymMatrix::equicorrelation(dim, rho), TOL_PSD)
    }

    /// Wraps without checking. Used by kernels whose output is valid by construction.
    pub(crate) fn new_unchecked(m: SymMatrix) -> Self {
        CorrelationMatrix(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.0
    }

    pub fn into_sym(self) -> SymMatrix {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    /// Principal submatrix, itself a correlation matrix.
    pub fn submatrix(&self, idx: &[usize]) -> CorrelationMatrix {
        CorrelationMatrix(self.0.submatrix(idx))
    }
}

impl TryFrom<SymMatrix> for CorrelationMatrix {
    type Error = MrcError;

    fn try_from(m: SymMatrix) -> Result<Self> {
        super::validate_correlation(&m, TOL_PSD)
    }
}

impl From<CorrelationMatrix> for SymMatrix {
    fn from(c: CorrelationMatrix) -> Self {
        c.0
    }
}

impl AsRef<SymMatrix> for CorrelationMatrix {
    fn as_ref(&self) -> &SymMatrix {
        &self.0
    }
}
