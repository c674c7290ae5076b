use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{simulate_observables, McEstimate, Terminal, TimeGrid};
use crate::corematrix::MrcParams;
use crate::error::{MrcError, Result};
use crate::momentoracle::{fig1_observables, functional_fig1_with, MomentTable};
use crate::schemes::SchemeKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub estimate: McEstimate,
    pub exact: f64,
    pub abs_error: f64,
}

impl ConvergenceRow {
    /// Error clearly above the Monte Carlo noise floor.
    pub fn resolved(&self) -> bool {
        self.abs_error > 3.0 * self.estimate.ci_half_width_95
    }
}

/// Weak error of one functional against its exact value, per grid size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scheme: SchemeKind,
    pub functional: String,
    pub rows: Vec<ConvergenceRow>,
    /// `ν` in `error ≈ C N^{-ν}`, from the resolved rows; `None` with fewer
    /// than two of them.
    pub slope: Option<f64>,
}

impl ConvergenceReport {
    pub fn write_csv<W: Write>(&self, w: W, header: bool) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        let io = |e: csv::Error| MrcError::Io(e.into());
        if header {
            wr.write_record(["functional", "scheme", "N", "estimate", "ci", "exact", "error"])
                .map_err(io)?;
        }
        for r in &self.rows {
            wr.write_record([
                self.functional.clone(),
                self.scheme.to_string(),
                r.steps.to_string(),
                format!("{:.12e}", r.estimate.mean),
                format!("{:.6e}", r.estimate.ci_half_width_95),
                format!("{:.12e}", r.exact),
                format!("{:.6e}", r.abs_error),
            ])
            .map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Least-squares slope of `-log(error)` against `log N`.
pub fn fit_slope(points: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|&(n, e)| ((n as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

/// Errors of the two `d = 3` benchmark functionals (`order3` and `order1`)
/// for each grid size. All grids reuse the same seed.
pub fn convergence_study(
    params: &MrcParams,
    scheme: SchemeKind,
    horizon: f64,
    n_list: &[usize],
    n_paths: u64,
    seed: u64,
) -> Result<Vec<ConvergenceReport>> {
    let mut table = MomentTable::new(params.clone());
    let (exact3, exact1) = functional_fig1_with(&mut table, horizon)?;
    let obs = Terminal {
        len: 2,
        f: |x: &[f64], out: &mut [f64]| {
            let (o3, o1) = fig1_observables(x);
            out[0] = o3;
            out[1] = o1;
        },
    };
    let mut rows3 = Vec::new();
    let mut rows1 = Vec::new();
    for &n in n_list {
        let grid = TimeGrid::new(horizon, n)?;
        let est = simulate_observables(params, scheme, grid, n_paths, seed, &obs)?;
        for (rows, e, exact) in [(&mut rows3, est[0], exact3), (&mut rows1, est[1], exact1)] {
            rows.push(ConvergenceRow { steps: n, estimate: e, exact, abs_error: (e.mean - exact).abs() });
        }
    }
    let report = |name: &str, rows: Vec<ConvergenceRow>| {
        let pts: Vec<(usize, f64)> = rows.iter().filter(|r| r.resolved()).map(|r| (r.steps, r.abs_error)).collect();
        ConvergenceReport { scheme, functional: name.to_string(), slope: fit_slope(&pts), rows }
    };
    Ok(vec![report("order3", rows3), report("order1", rows1)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corematrix::CorrelationMatrix;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(usize, f64)> = [4, 8, 16, 32].iter().map(|&n| (n, 3.0 * (n as f64).powf(-2.0))).collect();
        assert!((fit_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_slope(&pts[..1]).is_none());
    }

    #[test]
    fn noiseless_errors_at_flow_precision() {
        let x = CorrelationMatrix::equicorrelation(3, 0.7).unwrap();
        let p = MrcParams::isotropic(x, 1.25, CorrelationMatrix::identity(3), 0.0).unwrap();
        let reps = convergence_study(&p, SchemeKind::SecondOrderDirect, 1.0, &[4, 8], 64, 3).unwrap();
        for r in &reps {
            for row in &r.rows {
                assert!(row.abs_error <= 1e-12, "{} {}", r.functional, row.abs_error);
            }
        }
        // the Euler drift is first order: the error halves with the step
        let reps = convergence_study(&p, SchemeKind::EulerCorrected, 1.0, &[64, 128], 8, 3).unwrap();
        for r in &reps {
            let ratio = r.rows[0].abs_error / r.rows[1].abs_error;
            assert!((ratio - 2.0).abs() < 0.05, "{} {ratio}", r.functional);
        }
    }

    #[test]
    fn csv_layout() {
        let x = CorrelationMatrix::equicorrelation(3, 0.7).unwrap();
        let p = MrcParams::isotropic(x, 1.25, CorrelationMatrix::identity(3), 0.0).unwrap();
        let reps = convergence_study(&p, SchemeKind::SecondOrderDirect, 1.0, &[4], 8, 3).unwrap();
        assert!(reps[0].slope.is_none());
        let mut buf = Vec::new();
        reps[0].write_csv(&mut buf, true).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("functional,scheme,N,estimate,ci,exact,error\norder3,second_order_direct,4,"));
    }
}
