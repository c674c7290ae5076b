use crate::error::{MrcError, Result};

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Black-Scholes call price.
pub fn bs_call(spot: f64, strike: f64, r: f64, t: f64, sigma: f64) -> f64 {
    let df = (-r * t).exp();
    let sd = sigma * t.sqrt();
    if sd <= 0.0 {
        return (spot - strike * df).max(0.0);
    }
    if strike <= 0.0 {
        return spot - strike * df;
    }
    let d1 = ((spot / strike).ln() + r * t) / sd + 0.5 * sd;
    spot * norm_cdf(d1) - strike * df * norm_cdf(d1 - sd)
}

fn bs_vega(spot: f64, strike: f64, r: f64, t: f64, sigma: f64) -> f64 {
    let sd = sigma * t.sqrt();
    let d1 = ((spot / strike).ln() + r * t) / sd + 0.5 * sd;
    spot * norm_pdf(d1) * t.sqrt()
}

const VOL_LO: f64 = 1e-6;
const VOL_HI: f64 = 5.0;

/// Black-Scholes implied volatility of a call: safeguarded Newton inside a
/// shrinking bisection bracket on `[1e-6, 5]`.
pub fn implied_vol(price: f64, spot: f64, strike: f64, r: f64, t: f64) -> Result<f64> {
    if !(spot > 0.0 && strike > 0.0 && t > 0.0) {
        return Err(MrcError::InvalidParameter(format!("spot {spot}, strike {strike}, maturity {t}")));
    }
    let lower = (spot - strike * (-r * t).exp()).max(0.0);
    let out_of_bounds = || MrcError::PriceOutOfBounds { price, lower, upper: spot };
    if !(price > lower && price < spot) {
        return Err(out_of_bounds());
    }
    let tol = 1e-10 * spot;
    let f = |s: f64| bs_call(spot, strike, r, t, s) - price;
    let (mut lo, mut hi) = (VOL_LO, VOL_HI);
    if f(lo) > tol || f(hi) < -tol {
        return Err(out_of_bounds());
    }
    let mut s = (2.0 * ((spot / strike).ln() + r * t).abs() / t).sqrt().clamp(0.1, 1.0);
    for _ in 0..200 {
        let v = f(s);
        if v == 0.0 {
            return Ok(s);
        }
        if v > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let vega = bs_vega(spot, strike, r, t, s);
        let newton = s - v / vega;
        // finish on a converged Newton step; low-vega prices meet `tol` early
        if v.abs() <= tol && vega > 0.0 && (newton - s).abs() <= 1e-14 * s.max(1.0) {
            return Ok(newton.clamp(lo, hi));
        }
        s = if vega > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_price() {
        assert!((norm_cdf(0.1) - 0.539828).abs() < 1e-6);
        let p = bs_call(100.0, 100.0, 0.0, 1.0, 0.2);
        assert!((p - 7.96557).abs() < 1e-5, "{p}");
        assert!((implied_vol(p, 100.0, 100.0, 0.0, 1.0).unwrap() - 0.2).abs() < 1e-8);
    }

    #[test]
    fn round_trip() {
        for k in [80.0, 100.0, 125.0] {
            for n in 1..=20 {
                let sigma = 0.05 * n as f64;
                let p = bs_call(100.0, k, 0.02, 1.0, sigma);
                let s = implied_vol(p, 100.0, k, 0.02, 1.0).unwrap();
                assert!((s - sigma).abs() < 1e-8, "K={k} σ={sigma} got {s}");
            }
        }
    }

    #[test]
    fn arbitrage_bounds() {
        let intrinsic = 100.0 - 90.0;
        assert!(matches!(implied_vol(intrinsic, 100.0, 90.0, 0.0, 1.0), Err(MrcError::PriceOutOfBounds { .. })));
        assert!(matches!(implied_vol(100.0, 100.0, 90.0, 0.0, 1.0), Err(MrcError::PriceOutOfBounds { .. })));
    }
}
