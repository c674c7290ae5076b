use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{run_blocks, simulate_one, Terminal, TimeGrid};
use crate::corematrix::MrcParams;
use crate::error::{MrcError, Result};
use crate::flows::classify_assumptions;
use crate::schemes::{DomainPolicy, SchemeKind, Stepper, Workspace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub scheme: SchemeKind,
    pub d: usize,
    pub steps: usize,
    pub paths: u64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<TimingRow>,
    pub warnings: Vec<String>,
}

impl BenchReport {
    pub fn seconds(&self, scheme: SchemeKind) -> Option<f64> {
        self.rows.iter().find(|r| r.scheme == scheme).map(|r| r.seconds)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| MrcError::Io(e.into());
        wr.write_record(["scheme", "d", "N", "paths", "seconds"]).map_err(io)?;
        for r in &self.rows {
            wr.write_record([
                r.scheme.to_string(),
                r.d.to_string(),
                r.steps.to_string(),
                r.paths.to_string(),
                format!("{:.3}", r.seconds),
            ])
            .map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Wall-clock time to generate `n_paths` full paths with each scheme.
///
/// Parameters outside the weak condition are run anyway under the lenient
/// domain policy; the violation is reported in `warnings`.
pub fn timing_bench(params: &MrcParams, schemes: &[SchemeKind], grid: TimeGrid, n_paths: u64) -> Result<BenchReport> {
    if schemes.is_empty() {
        return Err(MrcError::Usage("no scheme to benchmark".into()));
    }
    let mut warnings = Vec::new();
    let report = classify_assumptions(params);
    if !report.weak {
        warnings.push(format!(
            "d = {}: weak condition violated (min eigenvalue {:.4}); the process may leave the domain",
            params.dim(),
            report.witness_weak
        ));
    }
    let d = params.dim();
    let x0 = params.x.as_slice().to_vec();
    let obs = Terminal { len: 1, f: |x: &[f64], out: &mut [f64]| out[0] = x[1 % (d * d)] };
    let mut rows = Vec::new();
    for &scheme in schemes {
        let stepper = Stepper::with_policy(params, scheme, grid.step(), DomainPolicy::Lenient)?;
        let start = Instant::now();
        let res = run_blocks(
            n_paths,
            1,
            || (Workspace::new(d), vec![0.0; d * d]),
            |(ws, x), p, out| simulate_one(&stepper, &x0, grid.steps, 0, p, &obs, x, ws, out),
        );
        let seconds = start.elapsed().as_secs_f64();
        if let Err(e) = res {
            warnings.push(format!("{scheme}: {e}"));
        }
        rows.push(TimingRow { scheme, d, steps: grid.steps, paths: n_paths, seconds });
    }
    Ok(BenchReport { rows, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scheme_list_is_usage_error() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert!(matches!(timing_bench(&MrcParams::reference(3), &[], g, 10), Err(MrcError::Usage(_))));
    }

    #[test]
    fn d10_runs_with_warning() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let r = timing_bench(&MrcParams::reference(10), &SchemeKind::ALL, g, 200).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.warnings.iter().any(|w| w.contains("weak condition")));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("scheme,d,N,paths,seconds\n"));
    }
}
