//! Monte Carlo harness: deterministic block-parallel path generation,
//! estimators with confidence intervals, the weak-convergence study, the timing
//! benchmark and statistical checks of the covariation and submatrix laws.

mod bench;
mod convergence;
mod qv;
mod submatrix;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bench::{timing_bench, BenchReport, TimingRow};
pub use convergence::{convergence_study, fit_slope, ConvergenceReport, ConvergenceRow};
pub use qv::{bracket, qv_test, QvReport, QvRow};
pub use submatrix::{submatrix_consistency_test, SubmatrixReport, SubmatrixRow};

use crate::corematrix::{validate_correlation, MrcParams, SymMatrix};
use crate::error::{MrcError, Result};
use crate::schemes::{rng::LANE_MRC, RngStream, SchemeKind, Stepper, Workspace};

/// Paths per work unit. Fixed so that results do not depend on the number of
/// workers.
pub const BLOCK_SIZE: u64 = 4096;
/// One path in this many has every state revalidated.
pub const SPOT_CHECK_EVERY: u64 = 100;

/// Uniform grid `t_i = iT/N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) || steps == 0 {
            return Err(MrcError::InvalidParameter(format!("grid T = {horizon}, N = {steps}")));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.steps as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci_half_width_95: f64,
    pub n_paths: u64,
}

impl McEstimate {
    pub fn from_moments(mean: f64, variance: f64, n: u64) -> Self {
        let std_error = if n > 1 { (variance.max(0.0) / n as f64).sqrt() } else { 0.0 };
        McEstimate { mean, std_error, ci_half_width_95: 1.96 * std_error, n_paths: n }
    }

    /// `|mean - target| ≤ k` half-widths.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.ci_half_width_95
    }
}

/// Running mean and centered second moment.
#[derive(Clone, Copy, Debug, Default)]
struct Acc {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Acc {
    #[inline]
    fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(a: Acc, b: Acc) -> Acc {
        if a.n == 0 {
            return b;
        }
        if b.n == 0 {
            return a;
        }
        let n = a.n + b.n;
        let delta = b.mean - a.mean;
        Acc {
            n,
            mean: a.mean + delta * b.n as f64 / n as f64,
            m2: a.m2 + b.m2 + delta * delta * a.n as f64 * b.n as f64 / n as f64,
        }
    }
}

fn pairwise(accs: &[Vec<Acc>], k: usize) -> Acc {
    match accs.len() {
        0 => Acc::default(),
        1 => accs[0][k],
        n => Acc::merge(pairwise(&accs[..n / 2], k), pairwise(&accs[n / 2..], k)),
    }
}

/// Runs `n_paths` independent evaluations of `path(ws, index, out)` in fixed
/// blocks, in parallel on the current rayon pool, and reduces the `n_out`
/// outputs pairwise in block order.
pub fn run_blocks<W, I, P>(n_paths: u64, n_out: usize, init: I, path: P) -> Result<Vec<McEstimate>>
where
    I: Fn() -> W + Sync,
    P: Fn(&mut W, u64, &mut [f64]) -> Result<()> + Sync,
{
    let n_blocks = n_paths.div_ceil(BLOCK_SIZE);
    let blocks: Vec<Result<Vec<Acc>>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut ws = init();
            let mut accs = vec![Acc::default(); n_out];
            let mut out = vec![0.0; n_out];
            let end = ((b + 1) * BLOCK_SIZE).min(n_paths);
            for p in b * BLOCK_SIZE..end {
                path(&mut ws, p, &mut out)?;
                for (a, &v) in accs.iter_mut().zip(&out) {
                    a.push(v);
                }
            }
            Ok(accs)
        })
        .collect();
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((0..n_out)
        .map(|k| {
            let a = pairwise(&blocks, k);
            McEstimate::from_moments(a.mean, if a.n > 1 { a.m2 / (a.n - 1) as f64 } else { 0.0 }, a.n)
        })
        .collect())
}

/// A vector of functionals of a path. Terminal functionals only look at the
/// final state; path functionals see every grid node.
pub trait Observable: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn wants_path(&self) -> bool {
        false
    }

    /// Called with node index `k ∈ 0..=n` (only `k = n` for terminal
    /// functionals); `out` starts zeroed for every path.
    fn record(&self, k: usize, n: usize, x: &[f64], out: &mut [f64]);
}

/// Terminal functional from a closure `f(x_T, out)`.
pub struct Terminal<F> {
    pub len: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> Observable for Terminal<F> {
    fn len(&self) -> usize {
        self.len
    }

    fn record(&self, k: usize, n: usize, x: &[f64], out: &mut [f64]) {
        if k == n {
            (self.f)(x, out)
        }
    }
}

/// Trapezoidal time average `(1/T) ∫ (X_t)_{ij} dt` on the grid nodes.
pub struct TimeAverage {
    pub d: usize,
    pub i: usize,
    pub j: usize,
}

impl Observable for TimeAverage {
    fn len(&self) -> usize {
        1
    }

    fn wants_path(&self) -> bool {
        true
    }

    fn record(&self, k: usize, n: usize, x: &[f64], out: &mut [f64]) {
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        out[0] += w * x[self.i * self.d + self.j] / n as f64;
    }
}

fn spot_check(x: &[f64], d: usize) -> Result<()> {
    let m = SymMatrix::from_row_major(d, x)?;
    validate_correlation(&m, 1e-9)
        .map(|_| ())
        .map_err(|e| MrcError::LeftDomain(format!("simulated state failed validation: {e}")))
}

/// Simulates one path into `x` (starting from `x0`) and records `obs`.
pub(crate) fn simulate_one<O: Observable + ?Sized>(
    stepper: &Stepper,
    x0: &[f64],
    steps: usize,
    seed: u64,
    index: u64,
    obs: &O,
    x: &mut [f64],
    ws: &mut Workspace,
    out: &mut [f64],
) -> Result<()> {
    let d = stepper.dim();
    let check = index % SPOT_CHECK_EVERY == 0;
    let mut rng = RngStream::for_path(seed, LANE_MRC, index);
    x.copy_from_slice(x0);
    out.fill(0.0);
    if obs.wants_path() {
        obs.record(0, steps, x, out);
    }
    for k in 1..=steps {
        stepper.step(x, ws, &mut rng)?;
        if check {
            spot_check(x, d)?;
        }
        if obs.wants_path() || k == steps {
            obs.record(k, steps, x, out);
        }
    }
    Ok(())
}

/// Monte Carlo estimates of the observables at `T` (or along the path).
pub fn simulate_observables<O: Observable + ?Sized>(
    params: &MrcParams,
    scheme: SchemeKind,
    grid: TimeGrid,
    n_paths: u64,
    seed: u64,
    obs: &O,
) -> Result<Vec<McEstimate>> {
    let stepper = Stepper::new(params, scheme, grid.step())?;
    let d = params.dim();
    let x0 = params.x.as_slice().to_vec();
    run_blocks(
        n_paths,
        obs.len(),
        || (Workspace::new(d), vec![0.0; d * d]),
        |(ws, x), p, out| simulate_one(&stepper, &x0, grid.steps, seed, p, obs, x, ws, out),
    )
}

/// Estimate of a single terminal functional `f(X_T)`.
pub fn simulate_paths<F>(
    params: &MrcParams,
    scheme: SchemeKind,
    grid: TimeGrid,
    n_paths: u64,
    seed: u64,
    observable: F,
) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let obs = Terminal { len: 1, f: |x: &[f64], out: &mut [f64]| out[0] = observable(x) };
    Ok(simulate_observables(params, scheme, grid, n_paths, seed, &obs)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corematrix::CorrelationMatrix;
    use crate::flows::flow_xi;

    #[test]
    fn acc_merge_matches_direct() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut whole = Acc::default();
        v.iter().for_each(|&x| whole.push(x));
        let mut a = Acc::default();
        let mut b = Acc::default();
        v[..313].iter().for_each(|&x| a.push(x));
        v[313..].iter().for_each(|&x| b.push(x));
        let m = Acc::merge(a, b);
        assert!((m.mean - whole.mean).abs() < 1e-12);
        assert!((m.m2 - whole.m2).abs() < 1e-9 * whole.m2);
    }

    #[test]
    fn deterministic_without_noise() {
        let c = CorrelationMatrix::equicorrelation(3, 0.2).unwrap();
        let p = MrcParams::isotropic(CorrelationMatrix::equicorrelation(3, 0.6).unwrap(), 1.0, c, 0.0).unwrap();
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let est = simulate_paths(&p, SchemeKind::SecondOrderDirect, grid, 100, 1, |x| x[1]).unwrap();
        let want = flow_xi(&p, &p.x, 1.0).unwrap().get(0, 1);
        assert!((est.mean - want).abs() < 1e-14);
        assert!(est.std_error < 1e-14);
    }

    #[test]
    fn independent_of_worker_count() {
        let p = MrcParams::reference(3);
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let run = |w: usize| {
            rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap().install(|| {
                simulate_paths(&p, SchemeKind::SecondOrderDirect, grid, 3 * BLOCK_SIZE + 17, 5, |x| x[1]).unwrap()
            })
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }
}
