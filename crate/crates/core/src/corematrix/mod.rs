//! Correlation-matrix domain types and the linear algebra used by every other
//! module: PSD square roots, projections, extended Cholesky and the first-row
//! reduction.

mod cholesky;
mod params;
pub(crate) mod spectral;
mod sym;

pub use cholesky::{extended_cholesky, reduce_first_coordinate, ExtCholFactors, ReducedForm};
pub(crate) use cholesky::{ext_chol_kernel, CholScratch};
pub use params::MrcParams;
pub use spectral::SymEigen;
pub(crate) use spectral::SpectralScratch;
pub use sym::{CorrelationMatrix, SymMatrix};

use crate::error::{MrcError, Result};

/// Default PSD tolerance, relative to the largest eigenvalue magnitude.
pub const TOL_PSD: f64 = 1e-10;
/// Default reconstruction tolerance for factorizations.
pub const TOL_RECON: f64 = 1e-10;
/// Default pivot threshold of the extended Cholesky factorization.
pub const TOL_RANK: f64 = 1e-12;

#[inline]
fn psd_floor(max_abs: f64, tol: f64) -> f64 {
    -tol * max_abs.max(f64::MIN_POSITIVE)
}

/// Checks the unit diagonal and the spectrum; snaps the diagonal to exactly 1
/// and clips off-diagonal rounding noise into `[-1, 1]`.
pub fn validate_correlation(x: &SymMatrix, tol: f64) -> Result<CorrelationMatrix> {
    let d = x.dim();
    for i in 0..d {
        let v = x.get(i, i);
        if !((v - 1.0).abs() <= tol) {
            return Err(MrcError::NotUnitDiagonal { index: i, value: v });
        }
    }
    let vals = x.eigenvalues();
    if let Some(&min) = vals.first() {
        let max_abs = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(min >= psd_floor(max_abs, tol)) {
            return Err(MrcError::NotPositiveSemidefinite { eigenvalue: min });
        }
    }
    let mut out = x.clone();
    for i in 0..d {
        out.set(i, i, 1.0);
        for j in (i + 1)..d {
            out.set(i, j, out.get(i, j).clamp(-1.0, 1.0));
        }
    }
    Ok(CorrelationMatrix::new_unchecked(out))
}

/// `p(y)_{ij} = y_ij / sqrt(y_ii y_jj)`.
pub fn project_correlation(y: &SymMatrix) -> Result<CorrelationMatrix> {
    let d = y.dim();
    for i in 0..d {
        let v = y.get(i, i);
        if !(v > 0.0) {
            return Err(MrcError::NonpositiveDiagonal { index: i, value: v });
        }
    }
    let mut out = y.clone();
    project_kernel(out.data_mut(), d);
    Ok(CorrelationMatrix::new_unchecked(out))
}

/// In-place projection of a row-major buffer with positive diagonal.
pub(crate) fn project_kernel(y: &mut [f64], d: usize) {
    let mut inv = [0.0f64; 64];
    let mut heap;
    let s: &mut [f64] = if d <= 64 {
        &mut inv[..d]
    } else {
        heap = vec![0.0; d];
        &mut heap
    };
    for i in 0..d {
        s[i] = 1.0 / y[i * d + i].sqrt();
    }
    for i in 0..d {
        y[i * d + i] = 1.0;
        for j in (i + 1)..d {
            let v = (y[i * d + j] * s[i] * s[j]).clamp(-1.0, 1.0);
            y[i * d + j] = v;
            y[j * d + i] = v;
        }
    }
}

/// Unique symmetric PSD square root. Eigenvalues within `tol_psd` (relative) of
/// zero are treated as zero.
pub fn psd_sqrt(y: &SymMatrix) -> Result<SymMatrix> {
    let n = y.dim();
    let mut out = vec![0.0; n * n];
    let scale = y.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs())) * n as f64;
    let floor = TOL_PSD * scale;
    let (min, max_abs) =
        SpectralScratch::new(n).map(y.as_slice(), n, &mut out, |l| if l <= floor { 0.0 } else { l.sqrt() });
    if n > 0 && !(min >= psd_floor(max_abs, TOL_PSD)) {
        return Err(MrcError::NotPositiveSemidefinite { eigenvalue: min });
    }
    Ok(SymMatrix::from_symmetric_buffer(n, out))
}

/// Same eigenvectors, eigenvalues replaced by `max(λ, 0)`.
pub fn positive_part(x: &SymMatrix) -> SymMatrix {
    let n = x.dim();
    let mut out = vec![0.0; n * n];
    SpectralScratch::new(n).map(x.as_slice(), n, &mut out, |l| l.max(0.0));
    SymMatrix::from_symmetric_buffer(n, out)
}

/// `sqrt(x - x e^n x)`, assembled from the square root of the `(d-1)` block
/// `Subm(x, n) - x^n (x^n)ᵀ`; row and column `n` of the result are zero.
pub fn diffusion_factor(x: &CorrelationMatrix, n: usize) -> Result<SymMatrix> {
    let d = x.dim();
    if n >= d {
        return Err(MrcError::InvalidParameter(format!("index {n} out of range for d = {d}")));
    }
    let mut ws = DiffusionScratch::new(d);
    let mut out = vec![0.0; d * d];
    let (min, max_abs) = ws.factor(x.as_slice(), d, n, &mut out);
    if d > 1 && !(min >= psd_floor(max_abs.max(1.0), TOL_PSD)) {
        return Err(MrcError::NotPositiveSemidefinite { eigenvalue: min });
    }
    Ok(SymMatrix::from_symmetric_buffer(d, out))
}

/// Reusable buffers for [`diffusion_factor`] in hot loops.
#[derive(Clone, Debug)]
pub(crate) struct DiffusionScratch {
    block: Vec<f64>,
    root: Vec<f64>,
    spectral: SpectralScratch,
}

impl DiffusionScratch {
    pub(crate) fn new(d: usize) -> Self {
        let m = d.saturating_sub(1);
        DiffusionScratch {
            block: vec![0.0; m * m],
            root: vec![0.0; m * m],
            spectral: SpectralScratch::new(m),
        }
    }

    /// Writes the factor for index `n` into the `d x d` buffer `out`.
    pub(crate) fn factor(&mut self, x: &[f64], d: usize, n: usize, out: &mut [f64]) -> (f64, f64) {
        let m = d - 1;
        let other = |a: usize| if a < n { a } else { a + 1 };
        for a in 0..m {
            let ia = other(a);
            for b in a..m {
                let ib = other(b);
                let v = x[ia * d + ib] - x[n * d + ia] * x[n * d + ib];
                self.block[a * m + b] = v;
                self.block[b * m + a] = v;
            }
        }
        let res = if m == 1 {
            let v = self.block[0];
            self.root[0] = v.max(0.0).sqrt();
            (v, v.abs())
        } else {
            let floor = TOL_PSD;
            self.spectral.map(&self.block, m, &mut self.root, |l| if l <= floor { 0.0 } else { l.sqrt() })
        };
        out[..d * d].fill(0.0);
        for a in 0..m {
            let ia = other(a);
            for b in 0..m {
                out[ia * d + other(b)] = self.root[a * m + b];
            }
        }
        res
    }
}
