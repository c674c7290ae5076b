mod common;

use common::weak_params;
use mrc::corematrix::validate_correlation;
use mrc::flows::{classify_assumptions, flow_xi, linear_flow, LinearCorrFlow};
use mrc::momentoracle::{moment, moment_order2, MomentTable, MonomialIndex};
use proptest::prelude::*;

fn monomial(d: usize, picks: &[(usize, usize, u32)]) -> MonomialIndex {
    let pairs: Vec<(usize, usize, u32)> = picks
        .iter()
        .map(|&(i, j, p)| (i % d, j % d, p))
        .filter(|&(i, j, _)| i != j)
        .collect();
    let mut m = MonomialIndex::one(d);
    for (i, j, p) in pairs {
        let mut q: Vec<(usize, usize, u32)> = m.pairs();
        q.push((i.min(j), i.max(j), p));
        let mut merged: Vec<(usize, usize, u32)> = Vec::new();
        for (a, b, e) in q {
            match merged.iter_mut().find(|t| t.0 == a && t.1 == b) {
                Some(t) => t.2 += e,
                None => merged.push((a, b, e)),
            }
        }
        m = MonomialIndex::from_pairs(d, &merged).unwrap();
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn initial_value_is_the_monomial(p in weak_params(2, 4), picks in proptest::collection::vec((0usize..4, 0usize..4, 1u32..3), 1..3)) {
        let m = monomial(p.dim(), &picks);
        let v = moment(&p, &m).unwrap().eval(0.0);
        prop_assert!((v - m.eval(p.x.as_sym())).abs() < 1e-12);
    }

    #[test]
    fn trajectories_stay_in_range(p in weak_params(2, 4), picks in proptest::collection::vec((0usize..4, 0usize..4, 1u32..3), 1..4)) {
        let m = monomial(p.dim(), &picks);
        let s = moment(&p, &m).unwrap();
        for k in 0..40 {
            let v = s.eval(0.1 * k as f64);
            prop_assert!(v.abs() <= 1.0 + 1e-9, "t = {} value {}", 0.1 * k as f64, v);
        }
    }

    #[test]
    fn order2_formula_matches_recursion(p in weak_params(2, 4), q in (0usize..4, 0usize..4, 0usize..4, 0usize..4), t in 0.0f64..3.0) {
        let d = p.dim();
        let (i, j, k, l) = (q.0 % d, q.1 % d, q.2 % d, q.3 % d);
        prop_assume!(i != j && k != l);
        let m = if (i.min(j), i.max(j)) == (k.min(l), k.max(l)) {
            MonomialIndex::from_pairs(d, &[(i, j, 2)]).unwrap()
        } else {
            MonomialIndex::from_pairs(d, &[(i, j, 1), (k, l, 1)]).unwrap()
        };
        let a = moment_order2(&p, i, j, k, l, t).unwrap();
        let b = moment(&p, &m).unwrap().eval(t);
        prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn long_time_limit_is_ergodic(p in weak_params(2, 4), picks in proptest::collection::vec((0usize..4, 0usize..4, 1u32..3), 1..3)) {
        let m = monomial(p.dim(), &picks);
        let mut table = MomentTable::new(p.clone());
        let s = table.moment(&m).unwrap();
        let rate = s.min_positive_rate().unwrap_or(1.0);
        let limit = table.ergodic(&m).unwrap();
        prop_assert!((s.eval(50.0 / rate) - limit).abs() < 1e-8);
    }

    #[test]
    fn xi_flow_keeps_domain_and_semigroup(p in weak_params(2, 6), s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let flow = LinearCorrFlow::xi(&p);
        let x = p.x.as_sym();
        let one = linear_flow(&flow, x, s + t);
        let two = linear_flow(&flow, &linear_flow(&flow, x, s), t);
        prop_assert!(one.max_abs_diff(&two) < 1e-12);
        for i in 0..p.dim() {
            prop_assert_eq!(one.get(i, i), 1.0);
        }
        prop_assert!(classify_assumptions(&p).weak);
        for h in [0.01, 0.1, 1.0, 10.0] {
            validate_correlation(flow_xi(&p, &p.x, h).unwrap().as_sym(), 1e-9).unwrap();
        }
    }
}
