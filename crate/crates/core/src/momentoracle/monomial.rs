use std::fmt;
use std::str::FromStr;

use crate::corematrix::SymMatrix;
use crate::error::{MrcError, Result};

/// Exponent pattern `m` of the monomial `x^m = Π_{i<j} x_ij^{m_ij}`; diagonal
/// exponents are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MonomialIndex {
    dim: usize,
    exps: Vec<u32>,
}

#[inline]
fn pair_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * dim - i * (i + 1) / 2 + (j - i - 1)
}

impl MonomialIndex {
    pub fn one(dim: usize) -> Self {
        MonomialIndex { dim, exps: vec![0; dim * dim.saturating_sub(1) / 2] }
    }

    /// Product of `x_ij^p` over `(i, j, p)`; indices are 0-based and `i != j`.
    pub fn from_pairs(dim: usize, pairs: &[(usize, usize, u32)]) -> Result<Self> {
        let mut m = Self::one(dim);
        for &(i, j, p) in pairs {
            if i == j || i >= dim || j >= dim {
                return Err(MrcError::InvalidParameter(format!("invalid pair ({i}, {j}) for d = {dim}")));
            }
            m.exps[pair_index(dim, i, j)] += p;
        }
        Ok(m)
    }

    /// Upper-triangle exponents in row order `(0,1), (0,2), ..., (d-2,d-1)`.
    pub fn from_upper(dim: usize, exps: Vec<u32>) -> Result<Self> {
        let want = dim * dim.saturating_sub(1) / 2;
        if exps.len() != want {
            return Err(MrcError::DimensionMismatch { expected: want, got: exps.len() });
        }
        Ok(MonomialIndex { dim, exps })
    }

    pub fn upper(&self) -> &[u32] {
        &self.exps
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `m_ij`, with `m_ii = 0`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        if i == j {
            0
        } else {
            self.exps[pair_index(self.dim, i, j)]
        }
    }

    pub(crate) fn bump(&mut self, i: usize, j: usize, delta: i32) {
        if i != j {
            let e = &mut self.exps[pair_index(self.dim, i, j)];
            *e = (*e as i32 + delta) as u32;
        }
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    /// Row sums `S_i = Σ_j m_ij`.
    pub fn row_sums(&self) -> Vec<u32> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j)).sum()).collect()
    }

    /// Nonzero entries as `(i, j, power)` with `i < j`.
    pub fn pairs(&self) -> Vec<(usize, usize, u32)> {
        let mut out = Vec::new();
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let p = self.get(i, j);
                if p > 0 {
                    out.push((i, j, p));
                }
            }
        }
        out
    }

    pub fn eval(&self, x: &SymMatrix) -> f64 {
        self.pairs().iter().map(|&(i, j, p)| x.get(i, j).powi(p as i32)).product()
    }

    /// Parses the text form into a monomial of dimension `dim`.
    pub fn parse_with_dim(s: &str, dim: usize) -> Result<Self> {
        let m: MonomialIndex = s.parse()?;
        let mut out = Self::one(dim);
        for (i, j, p) in m.pairs() {
            if j >= dim {
                return Err(MrcError::Usage(format!("monomial `{s}` refers to index {} > d = {dim}", j + 1)));
            }
            out.exps[pair_index(dim, i, j)] += p;
        }
        Ok(out)
    }
}

/// Text form: factors `i-j` or `i-j^p` (1-based) joined by `*`; `1` is the
/// empty monomial.
impl fmt::Display for MonomialIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs = self.pairs();
        if pairs.is_empty() {
            return write!(f, "1");
        }
        for (n, (i, j, p)) in pairs.into_iter().enumerate() {
            if n > 0 {
                write!(f, "*")?;
            }
            write!(f, "{}-{}", i + 1, j + 1)?;
            if p > 1 {
                write!(f, "^{p}")?;
            }
        }
        Ok(())
    }
}

/// Parses the text form; the dimension is the largest index mentioned.
impl FromStr for MonomialIndex {
    type Err = MrcError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || MrcError::Usage(format!("malformed monomial `{s}` (expected e.g. `1-2^2*2-3`)"));
        let s = s.trim();
        if s == "1" {
            return Ok(Self::one(0));
        }
        let mut pairs = Vec::new();
        for factor in s.split('*') {
            let (pair, pow) = match factor.trim().split_once('^') {
                Some((a, b)) => (a, b.trim().parse::<u32>().map_err(|_| bad())?),
                None => (factor.trim(), 1),
            };
            let (i, j) = pair.split_once('-').ok_or_else(bad)?;
            let i: usize = i.trim().parse().map_err(|_| bad())?;
            let j: usize = j.trim().parse().map_err(|_| bad())?;
            if i == 0 || j == 0 || i == j || pow == 0 {
                return Err(bad());
            }
            pairs.push((i - 1, j - 1, pow));
        }
        let dim = pairs.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(0);
        Self::from_pairs(dim, &pairs)
    }
}
