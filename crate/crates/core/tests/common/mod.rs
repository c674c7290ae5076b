#![allow(dead_code)]

use mrc::{CorrelationMatrix, MrcParams, SymMatrix};
use proptest::prelude::*;

/// Normalized Gram matrix of `d` vectors in `R^k`: a correlation matrix of
/// rank at most `k`.
pub fn gram_correlation(d: usize, k: usize, v: &[f64]) -> CorrelationMatrix {
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut r: Vec<f64> = v[i * k..(i + 1) * k].to_vec();
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n < 1e-3 {
                r.iter_mut().for_each(|x| *x = 0.0);
                r[i % k] = 1.0;
            } else {
                r.iter_mut().for_each(|x| *x /= n);
            }
            r
        })
        .collect();
    let m = SymMatrix::from_fn(d, |i, j| {
        if i == j {
            1.0
        } else {
            rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0)
        }
    });
    CorrelationMatrix::try_from(m).expect("Gram matrix is a correlation matrix")
}

/// `(d, k, entries)` for `gram_correlation`.
pub fn corr_parts(dmin: usize, dmax: usize) -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (dmin..=dmax).prop_flat_map(|d| (Just(d), 1..=d)).prop_flat_map(|(d, k)| {
        (Just(d), Just(k), proptest::collection::vec(-1.0f64..1.0, d * k))
    })
}

pub fn corr_matrix(dmin: usize, dmax: usize) -> impl Strategy<Value = CorrelationMatrix> {
    corr_parts(dmin, dmax).prop_map(|(d, k, v)| gram_correlation(d, k, &v))
}

/// Parameters satisfying the weak existence condition: `c` full rank with
/// eigenvalues bounded below, `a` small enough for `κ c + c κ - (d-2) a² ⪰ 0`.
pub fn weak_params(dmin: usize, dmax: usize) -> impl Strategy<Value = MrcParams> {
    (corr_parts(dmin, dmax), 0.2f64..3.0, 0.0f64..1.0, 0.0f64..1.0).prop_flat_map(|((d, k, v), kap, mix, afrac)| {
        let x = gram_correlation(d, k, &v);
        let kappas = proptest::collection::vec(0.5f64..1.5, d);
        let c_parts = proptest::collection::vec(-1.0f64..1.0, d * d);
        (Just(x), Just(kap), Just(mix), Just(afrac), kappas, c_parts).prop_map(move |(x, kap, mix, afrac, ks, cp)| {
            let g = gram_correlation(d, d, &cp);
            // shrink toward the identity so that λ_min(c) ≥ 1 - mix/2
            let c = CorrelationMatrix::try_from(SymMatrix::from_fn(d, |i, j| {
                if i == j {
                    1.0
                } else {
                    0.5 * mix * g.get(i, j)
                }
            }))
            .unwrap();
            let kappa: Vec<f64> = ks.iter().map(|s| s * kap).collect();
            let m = SymMatrix::from_fn(d, |i, j| (kappa[i] + kappa[j]) * c.get(i, j));
            let lam = m.min_eigenvalue().max(0.0);
            let amax = if d > 2 { (lam / (d - 2) as f64).sqrt() } else { 2.0 };
            let a = vec![afrac * amax; d];
            MrcParams::new(x, kappa, c, a).unwrap()
        })
    })
}
