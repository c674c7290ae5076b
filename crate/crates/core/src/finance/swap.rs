use super::super::mcengine::{simulate_observables, McEstimate, TimeAverage, TimeGrid};
use crate::corematrix::MrcParams;
use crate::error::{MrcError, Result};
use crate::schemes::SchemeKind;

/// `E[(1/T) ∫_0^T (C_t)_ij dt]` for an MRC correlation (0-based indices).
pub fn corr_swap_price_closed(params: &MrcParams, i: usize, j: usize, t: f64) -> Result<f64> {
    let d = params.dim();
    if i >= d || j >= d {
        return Err(MrcError::InvalidParameter(format!("pair ({i},{j}) out of range for d = {d}")));
    }
    let (x, c) = (params.x.get(i, j), params.c.get(i, j));
    if i == j {
        return Ok(1.0);
    }
    let lam = params.kappa[i] + params.kappa[j];
    if lam <= 0.0 {
        return Err(MrcError::ZeroSpeedPair { i, j });
    }
    let u = lam * t;
    if u == 0.0 {
        return Ok(x);
    }
    let decay = -libm::expm1(-u);
    // 1 - e^{-u} - u
    let rest = if u < 1e-3 { -u * u / 2.0 + u * u * u / 6.0 - u.powi(4) / 24.0 } else { decay - u };
    Ok((x * decay - c * rest) / u)
}

/// Monte Carlo counterpart with the trapezoidal time average on the grid.
pub fn corr_swap_price_mc(
    params: &MrcParams,
    i: usize,
    j: usize,
    grid: TimeGrid,
    n_paths: u64,
    seed: u64,
) -> Result<McEstimate> {
    let d = params.dim();
    if i >= d || j >= d {
        return Err(MrcError::InvalidParameter(format!("pair ({i},{j}) out of range for d = {d}")));
    }
    let obs = TimeAverage { d, i, j };
    Ok(simulate_observables(params, SchemeKind::SecondOrderDirect, grid, n_paths, seed, &obs)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corematrix::CorrelationMatrix;

    #[test]
    fn closed_form_examples() {
        let p = MrcParams::reference(3);
        let v = corr_swap_price_closed(&p, 0, 1, 1.0).unwrap();
        assert!((v - 0.7 * (1.0 - (-2.5f64).exp()) / 2.5).abs() < 1e-15);
        assert!((v - 0.257016).abs() < 1e-6);
        assert!((corr_swap_price_closed(&p, 0, 1, 1e-12).unwrap() - 0.7).abs() < 1e-10);
        let c = CorrelationMatrix::equicorrelation(3, 0.3).unwrap();
        let q = MrcParams::isotropic(c.clone(), 0.8, c, 0.5).unwrap();
        for t in [0.1, 1.0, 10.0] {
            assert!((corr_swap_price_closed(&q, 1, 2, t).unwrap() - 0.3).abs() < 1e-14);
        }
        let z = MrcParams::isotropic(CorrelationMatrix::identity(3), 0.0, CorrelationMatrix::identity(3), 0.0).unwrap();
        assert!(matches!(corr_swap_price_closed(&z, 0, 1, 1.0), Err(MrcError::ZeroSpeedPair { .. })));
    }

    #[test]
    fn small_u_series_is_continuous() {
        let c = CorrelationMatrix::equicorrelation(2, 0.2).unwrap();
        let x = CorrelationMatrix::equicorrelation(2, 0.9).unwrap();
        let p = MrcParams::isotropic(x, 0.5, c, 0.0).unwrap();
        let a = corr_swap_price_closed(&p, 0, 1, 0.999e-3).unwrap();
        let b = corr_swap_price_closed(&p, 0, 1, 1.001e-3).unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn noiseless_mc_is_quadrature() {
        let x = CorrelationMatrix::equicorrelation(3, 0.7).unwrap();
        let p = MrcParams::isotropic(x, 1.25, CorrelationMatrix::identity(3), 0.0).unwrap();
        let exact = corr_swap_price_closed(&p, 0, 1, 1.0).unwrap();
        let g = TimeGrid::new(1.0, 200).unwrap();
        let mc = corr_swap_price_mc(&p, 0, 1, g, 16, 1).unwrap();
        let mc_sym = corr_swap_price_mc(&p, 1, 0, g, 16, 1).unwrap();
        assert_eq!(mc.mean, mc_sym.mean);
        // trapezoid error T²/(12 N²) max|f''|
        assert!((mc.mean - exact).abs() < 0.7 * 2.5 * 2.5 / (12.0 * 200.0 * 200.0));
    }
}
