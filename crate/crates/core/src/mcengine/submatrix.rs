use serde::{Deserialize, Serialize};

use super::{simulate_observables, McEstimate, Terminal, TimeGrid};
use crate::corematrix::MrcParams;
use crate::error::{MrcError, Result};
use crate::momentoracle::{MomentTable, MonomialIndex};
use crate::schemes::SchemeKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmatrixRow {
    /// Monomial in the indices of the sub-block.
    pub monomial: String,
    pub estimate: McEstimate,
    pub exact: f64,
}

impl SubmatrixRow {
    pub fn passed(&self) -> bool {
        self.estimate.within(self.exact, 3.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmatrixReport {
    pub indices: Vec<usize>,
    pub rows: Vec<SubmatrixRow>,
}

impl SubmatrixReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(SubmatrixRow::passed)
    }
}

/// Simulates the full process and compares the order-1 and order-2 moments of
/// the principal sub-block on `indices` at `T` with the exact moments of the
/// MRC process with restricted parameters.
pub fn submatrix_consistency_test(
    params: &MrcParams,
    indices: &[usize],
    scheme: SchemeKind,
    grid: TimeGrid,
    n_paths: u64,
    seed: u64,
) -> Result<SubmatrixReport> {
    let d = params.dim();
    if indices.len() < 2 {
        return Err(MrcError::InvalidParameter("sub-block needs at least two indices".into()));
    }
    let sub = params.restrict(indices)?;
    let k = indices.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let mut monos = Vec::new();
    for (p, &(i, j)) in pairs.iter().enumerate() {
        monos.push(MonomialIndex::from_pairs(k, &[(i, j, 1)])?);
        for &(m, n) in &pairs[p..] {
            let mono = if (m, n) == (i, j) {
                MonomialIndex::from_pairs(k, &[(i, j, 2)])?
            } else {
                MonomialIndex::from_pairs(k, &[(i, j, 1), (m, n, 1)])?
            };
            monos.push(mono);
        }
    }
    let full: Vec<Vec<(usize, u32)>> = monos
        .iter()
        .map(|m| m.pairs().iter().map(|&(i, j, p)| (indices[i] * d + indices[j], p)).collect())
        .collect();
    let obs = Terminal {
        len: monos.len(),
        f: |x: &[f64], out: &mut [f64]| {
            for (o, m) in out.iter_mut().zip(&full) {
                *o = m.iter().map(|&(e, p)| x[e].powi(p as i32)).product();
            }
        },
    };
    let est = simulate_observables(params, scheme, grid, n_paths, seed, &obs)?;
    let mut table = MomentTable::new(sub);
    let rows = monos
        .iter()
        .zip(est)
        .map(|(m, e)| Ok(SubmatrixRow { monomial: m.to_string(), estimate: e, exact: table.moment(m)?.eval(grid.horizon) }))
        .collect::<Result<Vec<_>>>()?;
    Ok(SubmatrixReport { indices: indices.to_vec(), rows })
}
