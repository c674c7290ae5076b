use std::io::Write;

use serde::{Deserialize, Serialize};

use super::run_blocks;
use crate::corematrix::MrcParams;
use crate::error::{MrcError, Result};
use crate::schemes::{rng::LANE_TEST, RngStream, SchemeKind, Stepper, Workspace};

/// Instantaneous covariation `d⟨X_ij, X_kl⟩/dt` at state `x` (row-major).
pub fn bracket(params: &MrcParams, x: &[f64], i: usize, j: usize, k: usize, l: usize) -> f64 {
    let d = params.dim();
    let g = |p: usize, q: usize| x[p * d + q];
    let ind = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
    let (ai, aj) = (params.a[i] * params.a[i], params.a[j] * params.a[j]);
    ai * (ind(i, k) * (g(j, l) - g(i, j) * g(i, l)) + ind(i, l) * (g(j, k) - g(i, j) * g(i, k)))
        + aj * (ind(j, k) * (g(i, l) - g(i, j) * g(j, l)) + ind(j, l) * (g(i, k) - g(i, j) * g(j, k)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QvRow {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub empirical: f64,
    pub theoretical: f64,
    pub se: f64,
}

impl QvRow {
    pub fn deviation(&self) -> f64 {
        if self.se > 0.0 {
            (self.empirical - self.theoretical).abs() / self.se
        } else if self.empirical == self.theoretical {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QvReport {
    pub h: f64,
    pub n_draws: u64,
    pub rows: Vec<QvRow>,
}

impl QvReport {
    /// Rows more than 4 standard errors away from the bracket.
    pub fn flagged(&self) -> Vec<&QvRow> {
        self.rows.iter().filter(|r| r.deviation() > 4.0).collect()
    }

    pub fn passed(&self) -> bool {
        self.flagged().is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| MrcError::Io(e.into());
        wr.write_record(["i", "j", "k", "l", "empirical", "theoretical", "se"]).map_err(io)?;
        for r in &self.rows {
            wr.write_record([
                (r.i + 1).to_string(),
                (r.j + 1).to_string(),
                (r.k + 1).to_string(),
                (r.l + 1).to_string(),
                format!("{:.8e}", r.empirical),
                format!("{:.8e}", r.theoretical),
                format!("{:.3e}", r.se),
            ])
            .map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Compares `cov(ΔX_ij, ΔX_kl)/h` over `n_draws` Euler steps of size `h` from
/// `params.x` with the bracket, for every pair of off-diagonal entries.
pub fn qv_test(params: &MrcParams, h: f64, n_draws: u64, seed: u64) -> Result<QvReport> {
    if !(h > 0.0 && h <= 1e-2) {
        return Err(MrcError::InvalidParameter(format!("qv step {h} must lie in (0, 1e-2]")));
    }
    let d = params.dim();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let quads: Vec<(usize, usize)> = (0..pairs.len()).flat_map(|p| (p..pairs.len()).map(move |q| (p, q))).collect();
    let np = pairs.len();
    let stepper = Stepper::new(params, SchemeKind::EulerCorrected, h)?;
    let x0 = params.x.as_slice().to_vec();
    let est = run_blocks(
        n_draws,
        np + quads.len(),
        || (Workspace::new(d), vec![0.0; d * d]),
        |(ws, x), p, out| {
            let mut rng = RngStream::for_path(seed, LANE_TEST, p);
            x.copy_from_slice(&x0);
            stepper.step(x, ws, &mut rng)?;
            for (o, &(i, j)) in out.iter_mut().zip(&pairs) {
                *o = x[i * d + j] - x0[i * d + j];
            }
            for (n, &(p, q)) in quads.iter().enumerate() {
                out[np + n] = out[p] * out[q];
            }
            Ok(())
        },
    )?;
    let rows = quads
        .iter()
        .enumerate()
        .map(|(n, &(p, q))| {
            let ((i, j), (k, l)) = (pairs[p], pairs[q]);
            let prod = est[np + n];
            QvRow {
                i,
                j,
                k,
                l,
                empirical: (prod.mean - est[p].mean * est[q].mean) / h,
                theoretical: bracket(params, &x0, i, j, k, l),
                se: prod.std_error / h,
            }
        })
        .collect();
    Ok(QvReport { h, n_draws, rows })
}
