use super::{validate_correlation, CorrelationMatrix, SymMatrix, TOL_PSD, TOL_RANK};
use crate::error::{MrcError, Result};

/// Pivoted outer-product factorization `p q pᵀ = m mᵀ` with
/// `m = [[m_r, 0], [k_r, 0]]`.
///
/// `perm[a]` is the original index placed at position `a`, so
/// `(p q pᵀ)_{ab} = q_{perm[a], perm[b]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtCholFactors {
    pub n: usize,
    pub perm: Vec<usize>,
    /// Lower-triangular `r x r`, row-major.
    pub m_r: Vec<f64>,
    /// `(n - r) x r`, row-major.
    pub k_r: Vec<f64>,
    pub rank: usize,
}

impl ExtCholFactors {
    /// The full `n x n` factor `m` in pivoted order.
    pub fn m_full(&self) -> Vec<f64> {
        let (n, r) = (self.n, self.rank);
        let mut m = vec![0.0; n * n];
        for a in 0..r {
            m[a * n..a * n + r].copy_from_slice(&self.m_r[a * r..(a + 1) * r]);
        }
        for a in r..n {
            m[a * n..a * n + r].copy_from_slice(&self.k_r[(a - r) * r..(a - r + 1) * r]);
        }
        m
    }

    /// `pᵀ m mᵀ p`, which should equal the factored matrix.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.n;
        let m = self.m_full();
        let mut out = SymMatrix::zeros(n);
        for a in 0..n {
            for b in a..n {
                let v: f64 = (0..self.rank).map(|k| m[a * n + k] * m[b * n + k]).sum();
                out.set(self.perm[a], self.perm[b], v);
            }
        }
        out
    }
}

/// Reusable buffers for the factorization kernel.
#[derive(Clone, Debug)]
pub(crate) struct CholScratch {
    pub(crate) work: Vec<f64>,
    /// Factor `m` in pivoted order, `n x n`, columns `>= rank` zero.
    pub(crate) l: Vec<f64>,
    pub(crate) perm: Vec<usize>,
}

impl CholScratch {
    pub(crate) fn new(n: usize) -> Self {
        CholScratch { work: vec![0.0; n * n], l: vec![0.0; n * n], perm: (0..n).collect() }
    }
}

/// Diagonal-pivoting outer-product Cholesky (largest remaining diagonal, ties
/// to the lowest index). Returns the rank. With `strict` unset, negative
/// pivots are treated as zero instead of raising.
pub(crate) fn ext_chol_kernel(
    q: &[f64],
    n: usize,
    tol_rank: f64,
    strict: bool,
    s: &mut CholScratch,
) -> Result<usize> {
    let a = &mut s.work[..n * n];
    a.copy_from_slice(&q[..n * n]);
    let l = &mut s.l[..n * n];
    l.fill(0.0);
    let perm = &mut s.perm[..n];
    for (i, p) in perm.iter_mut().enumerate() {
        *p = i;
    }
    let mut rank = n;
    for k in 0..n {
        let mut piv = k;
        for j in (k + 1)..n {
            if a[j * n + j] > a[piv * n + piv] {
                piv = j;
            }
        }
        if !(a[piv * n + piv] > tol_rank) {
            if strict {
                for j in k..n {
                    let v = a[j * n + j];
                    if v < -tol_rank || v.is_nan() {
                        return Err(MrcError::NotPositiveSemidefinite { eigenvalue: v });
                    }
                }
            }
            rank = k;
            break;
        }
        if piv != k {
            perm.swap(k, piv);
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            for r in 0..n {
                a.swap(r * n + k, r * n + piv);
            }
            for c in 0..k {
                l.swap(k * n + c, piv * n + c);
            }
        }
        let pivot = a[k * n + k].sqrt();
        l[k * n + k] = pivot;
        for i in (k + 1)..n {
            l[i * n + k] = a[i * n + k] / pivot;
        }
        for i in (k + 1)..n {
            let lik = l[i * n + k];
            for j in (k + 1)..=i {
                let v = a[i * n + j] - lik * l[j * n + k];
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
    }
    Ok(rank)
}

/// Extended Cholesky decomposition of a PSD matrix.
pub fn extended_cholesky(q: &SymMatrix, tol_rank: f64) -> Result<ExtCholFactors> {
    let n = q.dim();
    let mut s = CholScratch::new(n);
    let r = ext_chol_kernel(q.as_slice(), n, tol_rank, true, &mut s)?;
    let mut m_r = vec![0.0; r * r];
    let mut k_r = vec![0.0; (n - r) * r];
    for a in 0..n {
        for b in 0..r {
            let v = s.l[a * n + b];
            if a < r {
                m_r[a * r + b] = v;
            } else {
                k_r[(a - r) * r + b] = v;
            }
        }
    }
    Ok(ExtCholFactors { n, perm: s.perm, m_r, k_r, rank: r })
}

/// `x = p m č mᵀ pᵀ` with the lower-right block of `č` equal to the identity.
///
/// `perm_p[a]` is the original index at position `a` (`perm_p[0] = 0`), so
/// `(pᵀ x p)_{ab} = x_{perm_p[a], perm_p[b]}`.
#[derive(Clone, Debug)]
pub struct ReducedForm {
    pub perm_p: Vec<usize>,
    /// `d x d` block matrix `diag(1, [[m_r, 0], [k_r, 0]])`, row-major.
    pub m: Vec<f64>,
    pub c_check: CorrelationMatrix,
    pub rank: usize,
}

impl ReducedForm {
    pub fn dim(&self) -> usize {
        self.c_check.dim()
    }

    /// First row of `č` without its leading 1: the unit-ball vector.
    pub fn first_row(&self) -> Vec<f64> {
        (1..self.dim()).map(|j| self.c_check.get(0, j)).collect()
    }

    /// The permutation matrix `p` (row-major).
    pub fn perm_matrix(&self) -> Vec<f64> {
        let d = self.dim();
        let mut p = vec![0.0; d * d];
        for (a, &i) in self.perm_p.iter().enumerate() {
            p[i * d + a] = 1.0;
        }
        p
    }

    /// Rebuilds `p m č' mᵀ pᵀ` where `č'` carries `first_row` (length `d - 1`,
    /// inside the closed unit ball).
    pub fn rebuild(&self, first_row: &[f64]) -> Result<CorrelationMatrix> {
        let d = self.dim();
        if first_row.len() + 1 != d {
            return Err(MrcError::DimensionMismatch { expected: d - 1, got: first_row.len() });
        }
        let norm2: f64 = first_row.iter().map(|v| v * v).sum();
        if norm2 > 1.0 + 1e-12 {
            return Err(MrcError::LeftDomain(format!("first row has squared norm {norm2}")));
        }
        let mut c = SymMatrix::identity(d);
        for (j, &v) in first_row.iter().enumerate() {
            c.set(0, j + 1, v);
        }
        let mc = super::sym::matmul(&self.m, c.as_slice(), d);
        let mut out = SymMatrix::zeros(d);
        for a in 0..d {
            for b in a..d {
                let v: f64 = (0..d).map(|k| mc[a * d + k] * self.m[b * d + k]).sum();
                out.set(self.perm_p[a], self.perm_p[b], v);
            }
        }
        validate_correlation(&out, 1e-9)
    }
}

/// Factors `x` so that only the first row of `č` is non-trivial.
pub fn reduce_first_coordinate(x: &CorrelationMatrix) -> Result<ReducedForm> {
    let d = x.dim();
    if d < 2 {
        return Err(MrcError::InvalidParameter("reduction needs d >= 2".into()));
    }
    let lower = x.as_sym().submatrix(&(1..d).collect::<Vec<_>>());
    let f = extended_cholesky(&lower, TOL_RANK)?;
    let (n, r) = (d - 1, f.rank);
    let mut perm_p = vec![0usize; d];
    for a in 0..n {
        perm_p[a + 1] = f.perm[a] + 1;
    }
    let mfull = f.m_full();
    let mut m = vec![0.0; d * d];
    m[0] = 1.0;
    for a in 0..n {
        for b in 0..n {
            m[(a + 1) * d + b + 1] = mfull[a * n + b];
        }
    }
    // forward substitution m_r u = c_1^r
    let mut u = vec![0.0; n];
    for a in 0..r {
        let mut s = x.get(0, perm_p[a + 1]);
        for b in 0..a {
            s -= f.m_r[a * r + b] * u[b];
        }
        u[a] = s / f.m_r[a * r + a];
    }
    // rank-deficient x puts u on the sphere, where rounding can push it outside
    let n2: f64 = u.iter().map(|v| v * v).sum();
    if n2 > 1.0 && n2 <= 1.0 + 1e-9 {
        let s = n2.sqrt().recip();
        u.iter_mut().for_each(|v| *v *= s);
    }
    let mut c = SymMatrix::identity(d);
    for (j, &v) in u.iter().enumerate() {
        c.set(0, j + 1, v);
    }
    let c_check = validate_correlation(&c, TOL_PSD.max(1e-9))?;
    Ok(ReducedForm { perm_p, m, c_check, rank: r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_factor() {
        let f = extended_cholesky(&SymMatrix::identity(4), TOL_RANK).unwrap();
        assert_eq!(f.rank, 4);
        assert_eq!(f.perm, vec![0, 1, 2, 3]);
        assert_eq!(f.m_full(), SymMatrix::identity(4).into_vec());
    }

    #[test]
    fn all_ones_rank_one() {
        let f = extended_cholesky(&SymMatrix::from_fn(2, |_, _| 1.0), TOL_RANK).unwrap();
        assert_eq!(f.rank, 1);
        assert_eq!(f.m_r, vec![1.0]);
        assert_eq!(f.k_r, vec![1.0]);
    }

    #[test]
    fn rank_two_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q = SymMatrix::from_fn(5, |i, j| v[i] * v[j] + w[i] * w[j]);
        let f = extended_cholesky(&q, 1e-12).unwrap();
        assert_eq!(f.rank, 2);
        assert!(f.reconstruct().max_abs_diff(&q) < 1e-10);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(extended_cholesky(&SymMatrix::from_diag(&[1.0, -0.5]), TOL_RANK).is_err());
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let f = extended_cholesky(&SymMatrix::zeros(3), TOL_RANK).unwrap();
        assert_eq!(f.rank, 0);
        assert!(f.m_r.is_empty() && f.k_r.is_empty());
    }

    #[test]
    fn reduce_identity_lower_block() {
        let mut x = SymMatrix::identity(3);
        x.set(0, 1, 0.3);
        x.set(0, 2, -0.4);
        let x = validate_correlation(&x, TOL_PSD).unwrap();
        let r = reduce_first_coordinate(&x).unwrap();
        assert_eq!(r.perm_p, vec![0, 1, 2]);
        assert_eq!(r.m, SymMatrix::identity(3).into_vec());
        assert_eq!(&r.c_check, &x);
    }

    #[test]
    fn reduce_round_trip() {
        let x = CorrelationMatrix::equicorrelation(3, 0.7).unwrap();
        let r = reduce_first_coordinate(&x).unwrap();
        let back = r.rebuild(&r.first_row()).unwrap();
        assert!(back.as_sym().max_abs_diff(x.as_sym()) < 1e-10);
        for j in 1..3 {
            for k in 1..3 {
                let want = if j == k { 1.0 } else { 0.0 };
                assert_eq!(r.c_check.get(j, k), want);
            }
        }
    }

    #[test]
    fn reduce_rank_deficient_lower_block() {
        // rows 2 and 3 identical
        let x = SymMatrix::from_row_major(
            4,
            &[1.0, 0.5, 0.5, 0.2, 0.5, 1.0, 1.0, 0.3, 0.5, 1.0, 1.0, 0.3, 0.2, 0.3, 0.3, 1.0],
        )
        .unwrap();
        let x = validate_correlation(&x, TOL_PSD).unwrap();
        let r = reduce_first_coordinate(&x).unwrap();
        assert_eq!(r.rank, 2);
        assert_eq!(r.first_row()[2], 0.0);
        let back = r.rebuild(&r.first_row()).unwrap();
        assert!(back.as_sym().max_abs_diff(x.as_sym()) < 1e-10);
    }
}
