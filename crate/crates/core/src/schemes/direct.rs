use super::ball::{BallKernel, UnitBallState, MAX_STEP};
use super::rng::RngStream;
use super::Workspace;
use crate::corematrix::{ext_chol_kernel, CorrelationMatrix, MrcParams, SymMatrix, TOL_RANK};
use crate::error::{MrcError, Result};
use crate::flows::{classify_assumptions, FlowKernel, LinearCorrFlow};

/// Whether numerical domain violations abort the step or are absorbed
/// (negative pivots read as zero, ball vectors pulled back to the sphere).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainPolicy {
    Strict,
    Lenient,
}

/// Elementary step for index `i`: reduce the first row of the `1 ↔ i` permuted
/// matrix to a unit-ball vector, run `n_sub` ball steps, and map back. Rows and
/// columns other than `i` are untouched.
pub(crate) fn elementary_in_place(
    i: usize,
    x: &mut [f64],
    d: usize,
    ball: &BallKernel,
    n_sub: usize,
    ws: &mut Workspace,
    rng: &mut RngStream,
    policy: DomainPolicy,
) -> Result<()> {
    let n = d - 1;
    // lower block of the swapped frame: order [i, 1, .., i-1, 0, i+1, ..] minus its head
    for a in 0..n {
        ws.lower[a] = if a + 1 == i { 0 } else { a + 1 };
    }
    for a in 0..n {
        for b in a..n {
            let v = x[ws.lower[a] * d + ws.lower[b]];
            ws.q[a * n + b] = v;
            ws.q[b * n + a] = v;
        }
    }
    let r = ext_chol_kernel(&ws.q, n, TOL_RANK, policy == DomainPolicy::Strict, &mut ws.chol)?;
    let l = &ws.chol.l;
    for a in 0..n {
        ws.idx[a] = ws.lower[ws.chol.perm[a]];
    }
    let mut norm2 = 0.0;
    let mut min_pivot = f64::INFINITY;
    for a in 0..n {
        if a < r {
            let mut s = x[i * d + ws.idx[a]];
            for b in 0..a {
                s -= l[a * n + b] * ws.u[b];
            }
            let diag = l[a * n + a];
            min_pivot = min_pivot.min(diag * diag);
            ws.u[a] = s / diag;
            norm2 += ws.u[a] * ws.u[a];
        } else {
            ws.u[a] = 0.0;
        }
    }
    if norm2 > 1.0 {
        // the triangular solve loses about eps / (smallest pivot) near the boundary
        let slack = 1e-8 + 64.0 * f64::EPSILON / min_pivot;
        if policy == DomainPolicy::Strict && norm2 > 1.0 + slack {
            return Err(MrcError::LeftDomain(format!("reduced first row has squared norm {norm2}")));
        }
        let s = 1.0 / norm2.sqrt();
        for v in ws.u[..n].iter_mut() {
            *v *= s;
        }
    }
    for _ in 0..n_sub {
        ball.step(&mut ws.u[..n], rng);
    }
    for a in 0..n {
        let mut y = 0.0;
        for b in 0..r.min(a + 1) {
            y += l[a * n + b] * ws.u[b];
        }
        let y = y.clamp(-1.0, 1.0);
        x[i * d + ws.idx[a]] = y;
        x[ws.idx[a] * d + i] = y;
    }
    Ok(())
}

/// Number of equal sub-steps keeping each ball step within the validity window.
pub(crate) fn substeps(tau: f64) -> usize {
    ((tau / MAX_STEP) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// `ξ(h/2) ∘ L_d(a_d² h) ∘ … ∘ L_1(a_1² h) ∘ ξ(h/2)`, with each elementary
/// duration split into sub-steps of length at most 2/5.
#[derive(Clone, Debug)]
pub(crate) struct SecondOrderKernel {
    d: usize,
    half: FlowKernel,
    elementary: Vec<Option<(BallKernel, usize)>>,
    policy: DomainPolicy,
}

impl SecondOrderKernel {
    pub(crate) fn new(params: &MrcParams, h: f64, policy: DomainPolicy) -> Result<Self> {
        let d = params.dim();
        let half = FlowKernel::new(&LinearCorrFlow::xi(params), h / 2.0);
        let mut elementary = Vec::with_capacity(d);
        for &a in &params.a {
            let tau = a * a * h;
            if tau > 0.0 && d > 1 {
                let n = substeps(tau);
                elementary.push(Some((BallKernel::new(tau / n as f64)?, n)));
            } else {
                elementary.push(None);
            }
        }
        Ok(SecondOrderKernel { d, half, elementary, policy })
    }

    pub(crate) fn step(&self, x: &mut [f64], ws: &mut Workspace, rng: &mut RngStream) -> Result<()> {
        self.half.apply(x);
        for (i, e) in self.elementary.iter().enumerate() {
            if let Some((ball, n)) = e {
                elementary_in_place(i, x, self.d, ball, *n, ws, rng, self.policy)?;
            }
        }
        self.half.apply(x);
        if self.policy == DomainPolicy::Lenient {
            for v in x.iter_mut() {
                *v = v.clamp(-1.0, 1.0);
            }
        }
        Ok(())
    }
}

/// Second-order step of the elementary process `MRC_d(x, (d-2)/2 eⁱ, I_d, eⁱ)`
/// over duration `t ≤ 2/5` (`i` is 0-based).
pub fn step_elementary_li(i: usize, t: f64, x: &CorrelationMatrix, rng: &mut RngStream) -> Result<CorrelationMatrix> {
    let d = x.dim();
    if i >= d {
        return Err(MrcError::InvalidParameter(format!("index {i} out of range for d = {d}")));
    }
    let ball = BallKernel::new(t)?;
    let mut buf = x.as_slice().to_vec();
    if d > 1 {
        let mut ws = Workspace::new(d);
        elementary_in_place(i, &mut buf, d, &ball, 1, &mut ws, rng, DomainPolicy::Strict)?;
    }
    Ok(CorrelationMatrix::new_unchecked(SymMatrix::from_symmetric_buffer(d, buf)))
}

/// Direct second-order MRC step; warns when the weak condition fails.
pub fn step_mrc_second_order(
    params: &MrcParams,
    t: f64,
    x: &CorrelationMatrix,
    rng: &mut RngStream,
) -> Result<CorrelationMatrix> {
    if !classify_assumptions(params).weak {
        eprintln!("warning: second-order step outside the weak existence condition");
    }
    let d = params.dim();
    let kernel = SecondOrderKernel::new(params, t, DomainPolicy::Strict)?;
    let mut ws = Workspace::new(d);
    let mut buf = x.as_slice().to_vec();
    kernel.step(&mut buf, &mut ws, rng)?;
    Ok(CorrelationMatrix::new_unchecked(SymMatrix::from_symmetric_buffer(d, buf)))
}

/// Unit-ball vector of the elementary reduction, for inspection.
pub fn reduced_first_row(i: usize, x: &CorrelationMatrix) -> Result<UnitBallState> {
    let d = x.dim();
    let mut ws = Workspace::new(d);
    let mut buf = x.as_slice().to_vec();
    let zero = BallKernel::new(0.0)?;
    elementary_in_place(i, &mut buf, d, &zero, 0, &mut ws, &mut RngStream::new(0), DomainPolicy::Strict)?;
    UnitBallState::new(ws.u[..d - 1].to_vec())
}
