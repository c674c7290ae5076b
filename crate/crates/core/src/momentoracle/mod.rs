//! Exact moment trajectories and ergodic moments of MRC processes.
//!
//! `E[X_t^m]` solves `y' = -K_m y + E[f_m(X_t)]`, where `f_m` only involves
//! monomials of lower degree, so every trajectory is a finite exp-poly series.

mod density;
mod monomial;
mod series;

use std::collections::HashMap;

pub use density::ergodic_density_first_row;
pub use monomial::MonomialIndex;
pub use series::{ExpPolySeries, Term};

use crate::corematrix::MrcParams;
use crate::error::{MrcError, Result};
use crate::flows::classify_assumptions;

/// Default cap on `|m|`.
pub const DEFAULT_DEGREE_CAP: u32 = 8;

/// `K_m = Σ_i κ_i S_i + ½ Σ_i a_i² S_i (S_i - 1)` with row sums `S_i = Σ_j m_ij`.
///
/// This is `Σ_i Σ_j κ_i m_ij + ½ Σ_i a_i² Σ_{j,k} m_ij (m_ik - δ_jk)`: the
/// `j = k` terms carry `m_ij (m_ij - 1)` from the second derivative of
/// `x_ij^{m_ij}`.
pub fn decay_rate_km(params: &MrcParams, m: &MonomialIndex) -> f64 {
    m.row_sums()
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let s = s as f64;
            params.kappa[i] * s + 0.5 * params.a[i] * params.a[i] * s * (s - 1.0)
        })
        .sum()
}

/// Expansion of `f_m` as `(coefficient, lower-degree monomial)` pairs.
pub fn forcing_terms(params: &MrcParams, m: &MonomialIndex) -> Vec<(f64, MonomialIndex)> {
    let d = m.dim();
    let mut out: Vec<(f64, MonomialIndex)> = Vec::new();
    let mut push = |coef: f64, mono: MonomialIndex| {
        if coef == 0.0 {
            return;
        }
        match out.iter_mut().find(|(_, q)| *q == mono) {
            Some(e) => e.0 += coef,
            None => out.push((coef, mono)),
        }
    };
    for i in 0..d {
        for j in 0..d {
            let mij = m.get(i, j);
            if mij == 0 {
                continue;
            }
            let coef = params.kappa[i] * params.c.get(i, j) * mij as f64;
            let mut q = m.clone();
            q.bump(i, j, -1);
            push(coef, q);
        }
        let a2 = params.a[i] * params.a[i];
        if a2 == 0.0 {
            continue;
        }
        for j in 0..d {
            let mij = m.get(i, j);
            if mij == 0 {
                continue;
            }
            for k in 0..d {
                let mik = m.get(i, k);
                let w = if j == k { mij * (mij - 1) } else { mij * mik };
                if w == 0 {
                    continue;
                }
                let mut q = m.clone();
                q.bump(i, j, -1);
                q.bump(i, k, -1);
                q.bump(j, k, 1);
                push(0.5 * a2 * w as f64, q);
            }
        }
    }
    out
}

/// Memoized exact moments for fixed parameters.
#[derive(Clone, Debug)]
pub struct MomentTable {
    params: MrcParams,
    cap: u32,
    memo: HashMap<MonomialIndex, ExpPolySeries>,
    ergodic: HashMap<MonomialIndex, f64>,
}

impl MomentTable {
    pub fn new(params: MrcParams) -> Self {
        Self::with_cap(params, DEFAULT_DEGREE_CAP)
    }

    pub fn with_cap(params: MrcParams, cap: u32) -> Self {
        MomentTable { params, cap, memo: HashMap::new(), ergodic: HashMap::new() }
    }

    pub fn params(&self) -> &MrcParams {
        &self.params
    }

    fn check(&self, m: &MonomialIndex) -> Result<()> {
        if m.dim() != self.params.dim() {
            return Err(MrcError::DimensionMismatch { expected: self.params.dim(), got: m.dim() });
        }
        if m.degree() > self.cap {
            return Err(MrcError::DegreeLimitExceeded { degree: m.degree(), cap: self.cap });
        }
        Ok(())
    }

    /// The series `t ↦ E[X_t^m]`.
    pub fn moment(&mut self, m: &MonomialIndex) -> Result<ExpPolySeries> {
        self.check(m)?;
        Ok(self.moment_rec(m))
    }

    fn moment_rec(&mut self, m: &MonomialIndex) -> ExpPolySeries {
        if let Some(s) = self.memo.get(m) {
            return s.clone();
        }
        let s = if m.is_one() {
            ExpPolySeries::constant(1.0)
        } else {
            let mut forcing = ExpPolySeries::zero();
            for (coef, q) in forcing_terms(&self.params, m) {
                let sub = self.moment_rec(&q);
                forcing.add_scaled(&sub, coef);
            }
            let k = decay_rate_km(&self.params, m);
            forcing.solve_linear(k, m.eval(self.params.x.as_sym()))
        };
        self.memo.insert(m.clone(), s.clone());
        s
    }

    /// `lim_{t→∞} E[X_t^m]` by the ergodic recursion.
    pub fn ergodic(&mut self, m: &MonomialIndex) -> Result<f64> {
        self.check(m)?;
        Ok(self.ergodic_rec(m))
    }

    fn ergodic_rec(&mut self, m: &MonomialIndex) -> f64 {
        if let Some(&v) = self.ergodic.get(m) {
            return v;
        }
        let k = decay_rate_km(&self.params, m);
        let v = if m.is_one() {
            1.0
        } else if k == 0.0 {
            m.eval(self.params.x.as_sym())
        } else {
            let mut acc = 0.0;
            for (coef, q) in forcing_terms(&self.params, m) {
                acc += coef * self.ergodic_rec(&q);
            }
            acc / k
        };
        self.ergodic.insert(m.clone(), v);
        v
    }
}

/// Exact trajectory `E[X_t^m]`; warns when the weak existence condition fails.
pub fn moment(params: &MrcParams, m: &MonomialIndex) -> Result<ExpPolySeries> {
    if !classify_assumptions(params).weak {
        eprintln!("warning: parameters violate the weak existence condition");
    }
    MomentTable::new(params.clone()).moment(m)
}

pub fn ergodic_moment(params: &MrcParams, m: &MonomialIndex) -> Result<f64> {
    MomentTable::new(params.clone()).ergodic(m)
}

/// Explicit second moment `E[(X_t)_ij (X_t)_kl]` (0-based indices).
pub fn moment_order2(params: &MrcParams, i: usize, j: usize, k: usize, l: usize, t: f64) -> Result<f64> {
    let d = params.dim();
    if [i, j, k, l].iter().any(|&v| v >= d) || i == j || k == l {
        return Err(MrcError::InvalidParameter(format!("invalid index quadruple ({i},{j},{k},{l})")));
    }
    let kp = &params.kappa;
    if kp[i] + kp[j] <= 0.0 {
        return Err(MrcError::ZeroSpeedPair { i, j });
    }
    if kp[k] + kp[l] <= 0.0 {
        return Err(MrcError::ZeroSpeedPair { i: k, j: l });
    }
    let a2 = |n: usize| params.a[n] * params.a[n];
    let ind = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
    let kk = kp[i] + kp[j] + kp[k] + kp[l]
        + a2(i) * (ind(i, k) + ind(i, l))
        + a2(j) * (ind(j, k) + ind(j, l));
    let ekt = (-t * kk).exp();
    let gamma = |m: usize, n: usize| {
        let (c, x) = (params.c.get(m, n), params.x.get(m, n));
        let lam = kp[m] + kp[n];
        let transient = if series::same_rate(kk, lam) {
            t * ekt
        } else {
            ((-t * lam).exp() - ekt) / (kk - lam)
        };
        c * (1.0 - ekt) / kk + (x - c) * transient
    };
    let (x, c) = (&params.x, &params.c);
    Ok(x.get(i, j) * x.get(k, l) * ekt
        + (kp[i] + kp[j]) * c.get(i, j) * gamma(k, l)
        + (kp[k] + kp[l]) * c.get(k, l) * gamma(i, j)
        + a2(i) * (ind(i, k) * gamma(j, l) + ind(i, l) * gamma(j, k))
        + a2(j) * (ind(j, k) * gamma(i, l) + ind(j, l) * gamma(i, k)))
}

/// The two benchmark functionals for `d = 3`:
/// `E[Σ_{i≠j, k≠l} X_ij X_kl² + X_12 X_23 X_13]` and `E[Σ_{i≠j} X_ij]`.
pub fn functional_fig1(params: &MrcParams, t: f64) -> Result<(f64, f64)> {
    let mut table = MomentTable::new(params.clone());
    functional_fig1_with(&mut table, t)
}

pub fn functional_fig1_with(table: &mut MomentTable, t: f64) -> Result<(f64, f64)> {
    let (order3, order1) = fig1_monomials(table.params().dim())?;
    let mut v3 = 0.0;
    for (w, m) in &order3 {
        v3 += w * table.moment(m)?.eval(t);
    }
    let mut v1 = 0.0;
    for (w, m) in &order1 {
        v1 += w * table.moment(m)?.eval(t);
    }
    Ok((v3, v1))
}

/// Weighted monomials of the two benchmark functionals (ordered-pair sums
/// collapsed onto unordered pairs).
pub fn fig1_monomials(d: usize) -> Result<(Vec<(f64, MonomialIndex)>, Vec<(f64, MonomialIndex)>)> {
    if d != 3 {
        return Err(MrcError::WrongDimension { expected: 3, got: d });
    }
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let mut order3: Vec<(f64, MonomialIndex)> = Vec::new();
    for &(i, j) in &pairs {
        for &(k, l) in &pairs {
            let m = MonomialIndex::from_pairs(3, &[(i, j, 1), (k, l, 2)])?;
            order3.push((4.0, m));
        }
    }
    order3.push((1.0, MonomialIndex::from_pairs(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 1)])?));
    let order1 = pairs
        .iter()
        .map(|&(i, j)| Ok((2.0, MonomialIndex::from_pairs(3, &[(i, j, 1)])?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((order3, order1))
}

/// Evaluates the benchmark functionals on a single state.
pub fn fig1_observables(x: &[f64]) -> (f64, f64) {
    let g = |i: usize, j: usize| x[i * 3 + j];
    let p = [g(0, 1), g(0, 2), g(1, 2)];
    let s1: f64 = p.iter().sum();
    let s2: f64 = p.iter().map(|v| v * v).sum();
    (4.0 * s1 * s2 + p[0] * p[1] * p[2], 2.0 * s1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corematrix::{CorrelationMatrix, SymMatrix};

    fn km_bruteforce(params: &MrcParams, m: &MonomialIndex) -> f64 {
        let d = m.dim();
        let mut k = 0.0;
        for i in 0..d {
            for j in 0..d {
                k += params.kappa[i] * m.get(i, j) as f64;
                for l in 0..d {
                    let delta = if j == l { 1.0 } else { 0.0 };
                    k += 0.5 * params.a[i].powi(2) * m.get(i, j) as f64 * (m.get(i, l) as f64 - delta);
                }
            }
        }
        k
    }

    #[test]
    fn decay_rate_examples() {
        let p = MrcParams::reference(3);
        let m12 = MonomialIndex::from_pairs(3, &[(0, 1, 1)]).unwrap();
        assert!((decay_rate_km(&p, &m12) - 2.5).abs() < 1e-15);
        assert_eq!(decay_rate_km(&p, &MonomialIndex::one(3)), 0.0);
        let m = MonomialIndex::from_pairs(3, &[(0, 1, 1), (0, 2, 1)]).unwrap();
        let k = decay_rate_km(&p, &m);
        assert!((k - km_bruteforce(&p, &m)).abs() < 1e-14);
        assert!((k - 6.0).abs() < 1e-14);
        let m = MonomialIndex::from_pairs(3, &[(0, 1, 2)]).unwrap();
        assert!((decay_rate_km(&p, &m) - 7.0).abs() < 1e-14);
    }

    #[test]
    fn order_one_closed_form() {
        let p = MrcParams::reference(3);
        let m = MonomialIndex::from_pairs(3, &[(0, 1, 1)]).unwrap();
        let s = moment(&p, &m).unwrap();
        for &t in &[0.0, 0.3, 1.0, 4.0] {
            assert!((s.eval(t) - 0.7 * (-2.5 * t).exp()).abs() < 1e-15);
        }
        assert!((s.eval(1.0) - 0.0574595).abs() < 1e-7);
    }

    #[test]
    fn fixed_point_when_x_equals_c() {
        let c = CorrelationMatrix::equicorrelation(3, 0.3).unwrap();
        let p = MrcParams::isotropic(c.clone(), 0.8, c, 0.5).unwrap();
        let m = MonomialIndex::from_pairs(3, &[(1, 2, 1)]).unwrap();
        let s = moment(&p, &m).unwrap();
        for &t in &[0.0, 0.5, 3.0] {
            assert!((s.eval(t) - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn ergodic_examples() {
        let p = MrcParams::reference(3);
        let m = MonomialIndex::from_pairs(3, &[(0, 1, 2)]).unwrap();
        assert!((ergodic_moment(&p, &m).unwrap() - 2.0 / 7.0).abs() < 1e-15);
        let m1 = MonomialIndex::from_pairs(3, &[(0, 2, 1)]).unwrap();
        assert_eq!(ergodic_moment(&p, &m1).unwrap(), 0.0);
        let c = CorrelationMatrix::equicorrelation(3, 0.4).unwrap();
        let q = MrcParams::isotropic(CorrelationMatrix::identity(3), 1.0, c, 0.0).unwrap();
        let m = MonomialIndex::from_pairs(3, &[(0, 1, 2), (1, 2, 1)]).unwrap();
        assert!((ergodic_moment(&q, &m).unwrap() - 0.4f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn frozen_pairs_keep_initial_value() {
        let x = CorrelationMatrix::equicorrelation(3, 0.2).unwrap();
        let p = MrcParams::new(x, vec![0.0, 0.0, 1.0], CorrelationMatrix::identity(3), vec![0.0, 0.0, 0.3])
            .unwrap();
        let m = MonomialIndex::from_pairs(3, &[(0, 1, 2)]).unwrap();
        assert!((ergodic_moment(&p, &m).unwrap() - 0.04).abs() < 1e-15);
    }

    #[test]
    fn order2_matches_recursion() {
        let p = MrcParams::reference(3);
        let mut table = MomentTable::new(p.clone());
        for &(i, j, k, l) in &[(0, 1, 0, 1), (0, 1, 0, 2), (0, 1, 1, 2), (1, 0, 2, 1)] {
            let m = MonomialIndex::from_pairs(3, &[(i, j, 1), (k, l, 1)]).unwrap();
            let s = table.moment(&m).unwrap();
            for &t in &[0.0, 0.1, 1.0, 5.0] {
                let e = moment_order2(&p, i, j, k, l, t).unwrap();
                assert!((e - s.eval(t)).abs() < 1e-12, "({i}{j}{k}{l}) t={t}: {e} vs {}", s.eval(t));
            }
        }
        assert!((moment_order2(&p, 0, 1, 0, 2, 0.0).unwrap() - 0.49).abs() < 1e-15);
    }

    #[test]
    fn order2_rejects_zero_speed() {
        let x = CorrelationMatrix::identity(3);
        let p = MrcParams::new(x.clone(), vec![0.0, 0.0, 1.0], x, vec![0.0; 3]).unwrap();
        assert!(matches!(moment_order2(&p, 0, 1, 0, 2, 1.0), Err(MrcError::ZeroSpeedPair { .. })));
    }

    #[test]
    fn degree_cap() {
        let p = MrcParams::reference(3);
        let m = MonomialIndex::from_pairs(3, &[(0, 1, 9)]).unwrap();
        assert!(matches!(moment(&p, &m), Err(MrcError::DegreeLimitExceeded { .. })));
    }

    #[test]
    fn fig1_examples() {
        let p = MrcParams::reference(3);
        let (v3, v1) = functional_fig1(&p, 0.0).unwrap();
        assert!((v1 - 4.2).abs() < 1e-14);
        let (o3, o1) = fig1_observables(p.x.as_slice());
        assert!((v3 - o3).abs() < 1e-13 && (v1 - o1).abs() < 1e-14);
        // ordered-pair definition, evaluated directly
        let x = p.x.as_sym();
        let mut direct = x.get(0, 1) * x.get(1, 2) * x.get(0, 2);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        if i != j && k != l {
                            direct += x.get(i, j) * x.get(k, l).powi(2);
                        }
                    }
                }
            }
        }
        assert!((direct - v3).abs() < 1e-13);
        let (_, v1) = functional_fig1(&p, 1.0).unwrap();
        assert!((v1 - 6.0 * 0.7 * (-2.5f64).exp()).abs() < 1e-14);
        assert!((v1 - 0.344757).abs() < 1e-6);
        assert!(functional_fig1(&MrcParams::reference(4), 1.0).is_err());
    }

    #[test]
    fn fig1_constant_without_noise() {
        let c = CorrelationMatrix::equicorrelation(3, 0.5).unwrap();
        let p = MrcParams::isotropic(c.clone(), 1.0, c, 0.0).unwrap();
        let a = functional_fig1(&p, 0.0).unwrap();
        let b = functional_fig1(&p, 2.0).unwrap();
        assert!((a.0 - b.0).abs() < 1e-13 && (a.1 - b.1).abs() < 1e-14);
    }

    #[test]
    fn moments_at_zero_are_monomials() {
        let x = SymMatrix::from_row_major(3, &[1.0, 0.3, -0.2, 0.3, 1.0, 0.5, -0.2, 0.5, 1.0]).unwrap();
        let x = CorrelationMatrix::try_from(x).unwrap();
        let p = MrcParams::new(x, vec![0.4, 1.0, 2.0], CorrelationMatrix::identity(3), vec![0.3, 0.6, 0.9])
            .unwrap();
        let mut table = MomentTable::new(p.clone());
        let m = MonomialIndex::from_pairs(3, &[(0, 1, 2), (1, 2, 1), (0, 2, 3)]).unwrap();
        let s = table.moment(&m).unwrap();
        assert!((s.eval(0.0) - m.eval(p.x.as_sym())).abs() < 1e-13);
    }
}
