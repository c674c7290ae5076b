//! Cyclic Jacobi eigensolver: the single spectral primitive behind PSD tests,
//! square roots and positive parts.

use super::SymMatrix;

const MAX_SWEEPS: usize = 64;

/// Diagonalizes the symmetric `n x n` row-major buffer `a` in place.
///
/// On return the diagonal of `a` holds the eigenvalues and the columns of `v`
/// the matching orthonormal eigenvectors.
pub(crate) fn jacobi_in_place(a: &mut [f64], v: &mut [f64], n: usize) {
    v[..n * n].fill(0.0);
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n < 2 {
        return;
    }
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        let mut diag = 0.0;
        for p in 0..n {
            diag += a[p * n + p] * a[p * n + p];
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= 1e-32 * (diag + off) || off < 1e-300 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
}

/// Scratch buffers for repeated spectral maps of the same size.
#[derive(Clone, Debug, Default)]
pub(crate) struct SpectralScratch {
    a: Vec<f64>,
    v: Vec<f64>,
    vals: Vec<f64>,
}

impl SpectralScratch {
    pub(crate) fn new(n: usize) -> Self {
        SpectralScratch { a: vec![0.0; n * n], v: vec![0.0; n * n], vals: vec![0.0; n] }
    }

    fn ensure(&mut self, n: usize) {
        if self.vals.len() < n {
            *self = Self::new(n);
        }
    }

    /// Writes `V f(Λ) Vᵀ` of the `n x n` symmetric `input` into `out` and
    /// returns the smallest and largest-magnitude eigenvalues.
    pub(crate) fn map(
        &mut self,
        input: &[f64],
        n: usize,
        out: &mut [f64],
        f: impl Fn(f64) -> f64,
    ) -> (f64, f64) {
        self.ensure(n);
        let a = &mut self.a[..n * n];
        a.copy_from_slice(&input[..n * n]);
        jacobi_in_place(a, &mut self.v[..n * n], n);
        let mut min = f64::INFINITY;
        let mut max_abs: f64 = 0.0;
        for i in 0..n {
            let l = a[i * n + i];
            min = min.min(l);
            max_abs = max_abs.max(l.abs());
            self.vals[i] = f(l);
        }
        let v = &self.v[..n * n];
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += v[i * n + k] * self.vals[k] * v[j * n + k];
                }
                out[i * n + j] = s;
                out[j * n + i] = s;
            }
        }
        (min, max_abs)
    }
}

/// Eigen-decomposition of a symmetric matrix (values unsorted, vectors in columns).
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl SymEigen {
    pub fn new(m: &SymMatrix) -> Self {
        let n = m.dim();
        let mut a = m.as_slice().to_vec();
        let mut v = vec![0.0; n * n];
        jacobi_in_place(&mut a, &mut v, n);
        let values = (0..n).map(|i| a[i * n + i]).collect();
        SymEigen { values, vectors: v }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_random_matrix() {
        let n = 7;
        let m = SymMatrix::from_fn(n, |i, j| ((i * 7 + j * 3) as f64).sin());
        let e = SymEigen::new(&m);
        let mut rec = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                rec[i * n + j] =
                    (0..n).map(|k| e.vectors[i * n + k] * e.values[k] * e.vectors[j * n + k]).sum();
            }
        }
        for (a, b) in rec.iter().zip(m.as_slice()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn equicorrelation_spectrum() {
        let vals = SymMatrix::equicorrelation(3, 0.7).eigenvalues();
        assert!((vals[0] - 0.3).abs() < 1e-14);
        assert!((vals[1] - 0.3).abs() < 1e-14);
        assert!((vals[2] - 2.4).abs() < 1e-14);
    }

    #[test]
    fn vectors_are_orthonormal() {
        let n = 12;
        let m = SymMatrix::from_fn(n, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let e = SymEigen::new(&m);
        for p in 0..n {
            for q in 0..n {
                let dot: f64 = (0..n).map(|k| e.vectors[k * n + p] * e.vectors[k * n + q]).sum();
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }
}
