//! Exact solutions of the linear matrix ODEs `x' = b - (κ̃x + xκ̃)` used as the
//! drift parts of the splitting, and the parameter-condition classifier.

use serde::{Deserialize, Serialize};

use crate::corematrix::{validate_correlation, CorrelationMatrix, MrcParams, SymMatrix, TOL_PSD};
use crate::error::{MrcError, Result};

/// Tolerance used to revalidate flow outputs as correlation matrices.
const FLOW_TOL: f64 = 1e-9;

/// Coefficients of `x' = b - (κ̃x + xκ̃)`, `κ̃` diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearCorrFlow {
    pub kappa_tilde: Vec<f64>,
    pub b: SymMatrix,
}

impl LinearCorrFlow {
    /// `ξ`: `κ̃ = κ - (d-2)/2 a²`, `b = κc + cκ - (d-2) a²`.
    pub fn xi(params: &MrcParams) -> Self {
        Self::shifted(params, params.dim() as f64 - 2.0)
    }

    /// `ζ`: as `ξ` with `d - 1` in place of `d - 2`.
    pub fn zeta(params: &MrcParams) -> Self {
        Self::shifted(params, params.dim() as f64 - 1.0)
    }

    fn shifted(params: &MrcParams, s: f64) -> Self {
        let d = params.dim();
        let (k, a) = (&params.kappa, &params.a);
        let kappa_tilde = (0..d).map(|i| k[i] - 0.5 * s * a[i] * a[i]).collect();
        let b = SymMatrix::from_fn(d, |i, j| {
            let v = (k[i] + k[j]) * params.c.get(i, j);
            if i == j {
                v - s * a[i] * a[i]
            } else {
                v
            }
        });
        LinearCorrFlow { kappa_tilde, b }
    }

    /// Right-hand side `b - (κ̃x + xκ̃)`.
    pub fn rhs(&self, x: &SymMatrix) -> SymMatrix {
        let k = &self.kappa_tilde;
        SymMatrix::from_fn(x.dim(), |i, j| self.b.get(i, j) - (k[i] + k[j]) * x.get(i, j))
    }
}

/// `(decay, offset)` of the entry `(i, j)` after time `t`.
#[inline]
fn entry_coeffs(rate: f64, b: f64, t: f64) -> (f64, f64) {
    if rate == 0.0 {
        (1.0, b * t)
    } else {
        let e = (-rate * t).exp();
        (e, b / rate * (1.0 - e))
    }
}

/// Elementwise closed form `x_ij e^{-(κ̃_i+κ̃_j)t} + b_ij/(κ̃_i+κ̃_j)(1 - e^{-(κ̃_i+κ̃_j)t})`.
pub fn linear_flow(flow: &LinearCorrFlow, x: &SymMatrix, t: f64) -> SymMatrix {
    let k = &flow.kappa_tilde;
    SymMatrix::from_fn(x.dim(), |i, j| {
        let (e, o) = entry_coeffs(k[i] + k[j], flow.b.get(i, j), t);
        x.get(i, j) * e + o
    })
}

/// Precomputed off-diagonal coefficients of a correlation flow over a fixed
/// time; the diagonal is left untouched.
#[derive(Clone, Debug)]
pub(crate) struct FlowKernel {
    d: usize,
    decay: Vec<f64>,
    offset: Vec<f64>,
}

impl FlowKernel {
    pub(crate) fn new(flow: &LinearCorrFlow, t: f64) -> Self {
        let d = flow.kappa_tilde.len();
        let mut decay = vec![1.0; d * d];
        let mut offset = vec![0.0; d * d];
        for i in 0..d {
            for j in (i + 1)..d {
                let (e, o) = entry_coeffs(flow.kappa_tilde[i] + flow.kappa_tilde[j], flow.b.get(i, j), t);
                decay[i * d + j] = e;
                offset[i * d + j] = o;
            }
        }
        FlowKernel { d, decay, offset }
    }

    #[inline]
    pub(crate) fn apply(&self, x: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            for j in (i + 1)..d {
                let v = x[i * d + j] * self.decay[i * d + j] + self.offset[i * d + j];
                x[i * d + j] = v;
                x[j * d + i] = v;
            }
        }
    }
}

fn correlation_flow(flow: &LinearCorrFlow, x: &CorrelationMatrix, t: f64) -> Result<CorrelationMatrix> {
    let mut y = x.as_sym().clone();
    FlowKernel::new(flow, t).apply(y.data_mut());
    validate_correlation(&y, FLOW_TOL).map_err(|e| MrcError::LeftDomain(format!("flow output: {e}")))
}

/// `ξ(t, x)`; warns when the weak condition fails.
pub fn flow_xi(params: &MrcParams, x: &CorrelationMatrix, t: f64) -> Result<CorrelationMatrix> {
    if !classify_assumptions(params).weak {
        eprintln!("warning: xi flow evaluated outside the weak existence condition");
    }
    correlation_flow(&LinearCorrFlow::xi(params), x, t)
}

/// `ζ(t, x)`; warns when the fast condition fails.
pub fn flow_zeta(params: &MrcParams, x: &CorrelationMatrix, t: f64) -> Result<CorrelationMatrix> {
    if !classify_assumptions(params).fast {
        eprintln!("warning: zeta flow evaluated outside the fast-scheme condition");
    }
    correlation_flow(&LinearCorrFlow::zeta(params), x, t)
}

/// Which of the sufficient parameter conditions hold, with the smallest
/// eigenvalue of each tested matrix as witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub weak: bool,
    pub strong: bool,
    pub fast: bool,
    pub witness_weak: f64,
    pub witness_strong: f64,
    pub witness_fast: f64,
}

/// Minimum eigenvalue of `κc + cκ - s a²` and the PSD verdict.
fn shifted_min_eig(params: &MrcParams, s: f64) -> (f64, bool) {
    let d = params.dim();
    let (k, a) = (&params.kappa, &params.a);
    let m = SymMatrix::from_fn(d, |i, j| {
        let v = (k[i] + k[j]) * params.c.get(i, j);
        if i == j {
            v - s * a[i] * a[i]
        } else {
            v
        }
    });
    let vals = m.eigenvalues();
    let min = vals.first().copied().unwrap_or(0.0);
    let scale = vals.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    (min, min >= -TOL_PSD * scale)
}

pub fn classify_assumptions(params: &MrcParams) -> AssumptionReport {
    let d = params.dim() as f64;
    let (witness_weak, weak_psd) = shifted_min_eig(params, d - 2.0);
    let (witness_strong, strong) = shifted_min_eig(params, d);
    let (witness_fast, fast_psd) = shifted_min_eig(params, d - 1.0);
    let equal_a = params.a.windows(2).all(|w| w[0] == w[1]);
    AssumptionReport {
        weak: weak_psd || params.dim() == 2,
        strong,
        fast: equal_a && fast_psd,
        witness_weak,
        witness_strong,
        witness_fast,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rk4(flow: &LinearCorrFlow, x: &SymMatrix, t: f64, n: usize) -> SymMatrix {
        let h = t / n as f64;
        let d = x.dim();
        let add = |a: &SymMatrix, b: &SymMatrix, s: f64| SymMatrix::from_fn(d, |i, j| a.get(i, j) + s * b.get(i, j));
        let mut y = x.clone();
        for _ in 0..n {
            let k1 = flow.rhs(&y);
            let k2 = flow.rhs(&add(&y, &k1, h / 2.0));
            let k3 = flow.rhs(&add(&y, &k2, h / 2.0));
            let k4 = flow.rhs(&add(&y, &k3, h));
            y = SymMatrix::from_fn(d, |i, j| {
                y.get(i, j) + h / 6.0 * (k1.get(i, j) + 2.0 * k2.get(i, j) + 2.0 * k3.get(i, j) + k4.get(i, j))
            });
        }
        y
    }

    #[test]
    fn linear_flow_examples() {
        let flow = LinearCorrFlow { kappa_tilde: vec![0.5; 3], b: SymMatrix::zeros(3) };
        let x = SymMatrix::equicorrelation(3, 0.4);
        assert_eq!(linear_flow(&flow, &x, 0.0), x);
        let y = linear_flow(&flow, &x, 0.7);
        for i in 0..3 {
            for j in 0..3 {
                assert!((y.get(i, j) - x.get(i, j) * (-0.7f64).exp()).abs() < 1e-15);
            }
        }
        let flow = LinearCorrFlow { kappa_tilde: vec![0.0; 2], b: SymMatrix::from_fn(2, |_, _| 0.3) };
        let y = linear_flow(&flow, &SymMatrix::identity(2), 2.0);
        assert!((y.get(0, 1) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn xi_example_and_rk4() {
        let p = MrcParams::reference(3);
        let y = flow_xi(&p, &p.x, 0.5).unwrap();
        let want = 0.7 * (-0.75f64).exp();
        assert!((y.get(0, 1) - want).abs() < 1e-15);
        assert!((want - 0.330657).abs() < 1e-6);
        let r = rk4(&LinearCorrFlow::xi(&p), p.x.as_sym(), 0.5, 2000);
        assert!(r.max_abs_diff(y.as_sym()) < 1e-12);
        for i in 0..3 {
            assert_eq!(y.get(i, i), 1.0);
        }
    }

    #[test]
    fn zeta_example() {
        let p = MrcParams::reference(3);
        let y = flow_zeta(&p, &p.x, 0.5).unwrap();
        let want = 0.7 * (-0.25f64).exp();
        assert!((y.get(1, 2) - want).abs() < 1e-15);
        assert!((want - 0.545160).abs() < 1e-6);
        let r = rk4(&LinearCorrFlow::zeta(&p), p.x.as_sym(), 0.5, 2000);
        assert!(r.max_abs_diff(y.as_sym()) < 1e-12);
    }

    #[test]
    fn identity_is_fixed() {
        let i3 = CorrelationMatrix::identity(3);
        let p = MrcParams::isotropic(i3.clone(), 1.25, i3.clone(), 1.0).unwrap();
        assert_eq!(flow_xi(&p, &i3, 3.0).unwrap(), i3);
        assert_eq!(flow_zeta(&p, &i3, 3.0).unwrap(), i3);
    }

    #[test]
    fn stationary_limit() {
        let c = CorrelationMatrix::equicorrelation(3, 0.3).unwrap();
        let p = MrcParams::isotropic(CorrelationMatrix::identity(3), 2.0, c, 0.5).unwrap();
        let f = LinearCorrFlow::xi(&p);
        let y = flow_xi(&p, &p.x, 200.0).unwrap();
        let k = &f.kappa_tilde;
        assert!((y.get(0, 1) - f.b.get(0, 1) / (k[0] + k[1])).abs() < 1e-14);
    }

    #[test]
    fn classify_examples() {
        let r = classify_assumptions(&MrcParams::reference(3));
        assert!(r.weak && r.fast && !r.strong);
        assert!((r.witness_weak - 1.5).abs() < 1e-12);
        assert!((r.witness_fast - 0.5).abs() < 1e-12);
        assert!((r.witness_strong + 0.5).abs() < 1e-12);
        let r = classify_assumptions(&MrcParams::reference(10));
        assert!(!r.weak);
        assert!((r.witness_weak + 5.5).abs() < 1e-12);
        let c = CorrelationMatrix::equicorrelation(4, 0.2).unwrap();
        let p = MrcParams::new(c.clone(), vec![0.7; 4], c, vec![0.0; 4]).unwrap();
        let r = classify_assumptions(&p);
        assert!(r.weak && r.strong && r.fast);
    }
}
