mod common;

use common::weak_params;
use mrc::corematrix::validate_correlation;
use mrc::momentoracle::{moment, MonomialIndex};
use mrc::schemes::{moment_matching, rng::LANE_TEST, step_mrc_second_order, threshold_k, RngStream, Stepper, Workspace};
use mrc::{MrcParams, SchemeKind, SymMatrix};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn every_scheme_stays_in_the_domain(p in weak_params(2, 6), h in 0.001f64..0.1, seed in any::<u64>()) {
        let d = p.dim();
        let mut ws = Workspace::new(d);
        for scheme in SchemeKind::ALL {
            let st = Stepper::new(&p, scheme, h).unwrap();
            let mut x = p.x.as_slice().to_vec();
            let mut rng = RngStream::for_path(seed, LANE_TEST, 0);
            for _ in 0..5 {
                st.step(&mut x, &mut ws, &mut rng).unwrap();
                validate_correlation(&SymMatrix::from_row_major(d, &x).unwrap(), 1e-9).unwrap();
            }
        }
    }

    #[test]
    fn paths_are_reproducible(p in weak_params(2, 5), seed in any::<u64>(), index in any::<u64>()) {
        let d = p.dim();
        for scheme in SchemeKind::ALL {
            let st = Stepper::new(&p, scheme, 0.05).unwrap();
            let run = || {
                let mut x = p.x.as_slice().to_vec();
                let mut ws = Workspace::new(d);
                let mut rng = RngStream::for_path(seed, LANE_TEST, index);
                for _ in 0..4 {
                    st.step(&mut x, &mut ws, &mut rng).unwrap();
                }
                x
            };
            let (a, b) = (run(), run());
            prop_assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
    }

    #[test]
    fn moment_matching_is_unbiased(t in 1e-4f64..0.4, frac in 0.0f64..1.0) {
        let z = frac * threshold_k(t);
        let (zp, zm, p) = moment_matching(t, z);
        prop_assert!((0.0..=1.0).contains(&p));
        let mean = p * zp + (1.0 - p) * zm;
        prop_assert!((mean - z).abs() <= 1e-15 * z.max(1.0));
    }
}

#[test]
fn one_step_pair_mean_matches_the_oracle() {
    let p = MrcParams::reference(4);
    let m = MonomialIndex::from_pairs(4, &[(0, 2, 1)]).unwrap();
    let n = 200_000u64;
    for h in [0.05, 0.025] {
        let exact = moment(&p, &m).unwrap().eval(h);
        let (mut s, mut s2) = (0.0, 0.0);
        for k in 0..n {
            let mut rng = RngStream::for_path(11, LANE_TEST, k);
            let y = step_mrc_second_order(&p, h, &p.x, &mut rng).unwrap().get(0, 2);
            s += y;
            s2 += y * y;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - exact).abs() < 4.0 * se, "h = {h}: {mean} vs {exact} (se {se})");
    }
}
