//! Second-order machinery for the first-row process on the unit ball: the
//! Ninomiya-Victoir flows of the coordinate operators, the radial `Z` process
//! with its threshold `K(t)`, and the moment-matching scheme near the sphere.

use super::rng::RngStream;
use crate::error::{MrcError, Result};

/// Largest step for which the moment-matching law is valid.
pub const MAX_STEP: f64 = 0.4;
/// Slack on the unit-ball constraint.
pub const TOL_BALL: f64 = 1e-12;
const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Radii this close to 1 are stepped to exactly 1.
const SPHERE_EPS: f64 = 1e-14;

/// Vector in the closed unit ball of dimension `d - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitBallState {
    pub v: Vec<f64>,
}

impl UnitBallState {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if !(n2 <= 1.0 + TOL_BALL) {
            return Err(MrcError::LeftDomain(format!("vector has squared norm {n2} > 1")));
        }
        Ok(UnitBallState { v })
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn norm(&self) -> f64 {
        self.v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// `X⁰(t, x)` with the distinguished coordinate `m`: solves `x_m' = x_m(1 - x_m²)`,
/// `x_l' = -x_l x_m²`.
fn x0_in_place(e_t: f64, e_2t: f64, m: usize, x: &mut [f64]) {
    let x1 = x[m];
    let inv = 1.0 / (e_2t * x1 * x1 + 1.0 - x1 * x1).sqrt();
    for v in x.iter_mut() {
        *v *= inv;
    }
    x[m] = x1 * e_t * inv;
}

/// `X¹(y, x)` with the distinguished coordinate `m`: solves `x_m' = 1 - x_m²`,
/// `x_l' = -x_m x_l`.
fn x1_in_place(e_y: f64, e_2y: f64, m: usize, x: &mut [f64]) {
    let x1 = x[m];
    let (p, q) = (e_2y * (1.0 + x1), 1.0 - x1);
    let inv = 1.0 / (p + q);
    let s = 2.0 * e_y * inv;
    for v in x.iter_mut() {
        *v *= s;
    }
    x[m] = (p - q) * inv;
}

pub fn nv_flow_x0(t: f64, x: &UnitBallState) -> UnitBallState {
    let mut v = x.v.clone();
    if !v.is_empty() {
        x0_in_place(t.exp(), (2.0 * t).exp(), 0, &mut v);
    }
    UnitBallState { v }
}

pub fn nv_flow_x1(y: f64, x: &UnitBallState) -> UnitBallState {
    let mut v = x.v.clone();
    if !v.is_empty() {
        x1_in_place(y.exp(), (2.0 * y).exp(), 0, &mut v);
    }
    UnitBallState { v }
}

/// Largest `z` for which `Z₀(t, z)` stays in `[0, 1]`.
fn z0_bound(t: f64) -> f64 {
    1.0 / (2.0 - (-t).exp()).sqrt()
}

/// `Z₀(t, z) = z e^{-t/2} / sqrt(1 - 2z²(1 - e^{-t}))`, solving `Z' = Z(Z² - ½)`.
pub fn flow_z0(t: f64, z: f64) -> Result<f64> {
    if !(0.0..=z0_bound(t) * (1.0 + 1e-15)).contains(&z) {
        return Err(MrcError::LeftDomain(format!("Z0({t}, {z}) leaves [0, 1]")));
    }
    Ok(z0_raw((-t / 2.0).exp(), -(-t).exp_m1(), z))
}

#[inline]
fn z0_raw(e_half: f64, one_minus_e: f64, z: f64) -> f64 {
    let den = 1.0 - 2.0 * z * z * one_minus_e;
    if den <= 0.0 {
        return 1.0;
    }
    (z * e_half / den.sqrt()).min(1.0)
}

/// `Z₁(y, z) = 2z e^{-y} / (1 - s + e^{-2y}(1 + s))`, `s = sqrt(1 - z²)`, solving
/// `Z' = Z sqrt(1 - Z²)`; saturates at 1 once `y ≥ ½ ln((1+s)/(1-s))`.
pub fn flow_z1(y: f64, z: f64) -> f64 {
    z1_raw((-y).exp(), (-2.0 * y).exp(), z)
}

#[inline]
fn z1_raw(e_neg_y: f64, e_neg_2y: f64, z: f64) -> f64 {
    if z >= 1.0 {
        return 1.0;
    }
    let s = (1.0 - z * z).sqrt();
    let one_minus_s = z * z / (1.0 + s);
    // y ≥ ½ ln((1+s)/(1-s))  ⇔  (1-s) ≥ e^{-2y}(1+s)
    if one_minus_s >= e_neg_2y * (1.0 + s) * (1.0 - 8.0 * f64::EPSILON) {
        return 1.0;
    }
    (2.0 * z * e_neg_y / (one_minus_s + e_neg_2y * (1.0 + s))).min(1.0)
}

/// Threshold below which the NV composition `Z₀(t/2, Z₁(√t Y, Z₀(t/2, z)))`
/// stays in `[0, 1]` for every value of `Y`.
pub fn threshold_k(t: f64) -> f64 {
    let eh = (-t / 2.0).exp();
    let q = ((1.0 - eh) / (2.0 - eh)).sqrt();
    let e = (-2.0 * t.sqrt() * SQRT3).exp();
    let dd = (1.0 - e + q * (1.0 + e)) / (e + 1.0 + q * (1.0 - e));
    let one_m_d2 = 1.0 - dd * dd;
    let k1 = (1.0 / (2.0 - eh)).sqrt();
    let k2 = one_m_d2.sqrt() / (eh + 2.0 * one_m_d2 * (1.0 - eh)).sqrt();
    k1.min(k2)
}

/// Precomputed constants of the unit-ball step for a fixed duration.
#[derive(Clone, Debug)]
pub(crate) struct BallKernel {
    t: f64,
    k: f64,
    // X⁰(t/2): e^{t/2}, e^{t}
    x0_e: f64,
    x0_e2: f64,
    // X¹(√t Y) for Y = ±√3: (e^{y}, e^{2y})
    x1_pos: (f64, f64),
    x1_neg: (f64, f64),
    // Z₀(t/2): e^{-t/4}, 1 - e^{-t/2}
    z0_e: f64,
    z0_om: f64,
    // Z₁(√t Y) for Y = ±√3: (e^{-y}, e^{-2y})
    z1_pos: (f64, f64),
    z1_neg: (f64, f64),
}

impl BallKernel {
    pub(crate) fn new(t: f64) -> Result<Self> {
        if !(t <= MAX_STEP * (1.0 + 1e-12)) {
            return Err(MrcError::StepTooLarge { t });
        }
        let y = (3.0 * t).sqrt();
        Ok(BallKernel {
            t,
            k: if t > 0.0 { threshold_k(t) } else { 1.0 },
            x0_e: (t / 2.0).exp(),
            x0_e2: t.exp(),
            x1_pos: (y.exp(), (2.0 * y).exp()),
            x1_neg: ((-y).exp(), (-2.0 * y).exp()),
            z0_e: (-t / 4.0).exp(),
            z0_om: -(-t / 2.0).exp_m1(),
            z1_pos: ((-y).exp(), (-2.0 * y).exp()),
            z1_neg: (y.exp(), (2.0 * y).exp()),
        })
    }

    /// One draw of the radial scheme from `z ∈ [0, 1]`.
    #[inline]
    pub(crate) fn step_z(&self, z: f64, rng: &mut RngStream) -> f64 {
        if z >= 1.0 - SPHERE_EPS {
            return 1.0;
        }
        if z <= self.k {
            let z1 = z0_raw(self.z0_e, self.z0_om, z);
            let z2 = match rng.three_point() {
                0 => z1_raw(self.z1_neg.0, self.z1_neg.1, z1),
                2 => z1_raw(self.z1_pos.0, self.z1_pos.1, z1),
                _ => z1,
            };
            z0_raw(self.z0_e, self.z0_om, z2)
        } else {
            let (zp, zm, p) = moment_matching(self.t, z);
            if rng.uniform() < p {
                zp
            } else {
                zm
            }
        }
    }

    #[inline]
    fn radial(&self, x: &mut [f64], rng: &mut RngStream) {
        let z = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if z == 0.0 {
            return;
        }
        let s = self.step_z(z.min(1.0), rng) / z;
        for v in x.iter_mut() {
            *v *= s;
        }
    }

    #[inline]
    fn coordinate(&self, m: usize, x: &mut [f64], rng: &mut RngStream) {
        x0_in_place(self.x0_e, self.x0_e2, m, x);
        match rng.three_point() {
            0 => x1_in_place(self.x1_neg.0, self.x1_neg.1, m, x),
            2 => x1_in_place(self.x1_pos.0, self.x1_pos.1, m, x),
            _ => {}
        }
        x0_in_place(self.x0_e, self.x0_e2, m, x);
    }

    /// Radial step then coordinate steps `1..n` if the coin shows heads,
    /// reversed otherwise.
    pub(crate) fn step(&self, x: &mut [f64], rng: &mut RngStream) {
        if self.t == 0.0 {
            return;
        }
        if rng.coin() {
            self.radial(x, rng);
            for m in 0..x.len() {
                self.coordinate(m, x, rng);
            }
        } else {
            for m in (0..x.len()).rev() {
                self.coordinate(m, x, rng);
            }
            self.radial(x, rng);
        }
        let n2: f64 = x.iter().map(|v| v * v).sum();
        if n2 > 1.0 {
            let s = 1.0 / n2.sqrt();
            for v in x.iter_mut() {
                *v *= s;
            }
        }
    }
}

/// `(z⁺, z⁻, p)` of the two-point law matching `E[Z_t]` and the second-order
/// expansion of `E[Z_t²]`.
#[inline]
pub fn moment_matching(t: f64, z: f64) -> (f64, f64, f64) {
    let a = 1.0 + 0.5 * t * (1.0 - 6.0 * z * z);
    let r = t * (1.0 + z) * a / (1.0 - z);
    let p = 1.0 - 1.0 / (1.0 + r);
    let zp = z + z * (1.0 - z);
    let zm = z - t * z * (1.0 + z) * a;
    (zp, zm, p)
}

/// One step of the radial process: NV composition below `K(t)`, two-point
/// moment matching above.
pub fn step_z(t: f64, z: f64, rng: &mut RngStream) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(MrcError::LeftDomain(format!("radius {z} outside [0, 1]")));
    }
    Ok(BallKernel::new(t)?.step_z(z, rng))
}

/// Radial operator: rescales `x` to the new radius drawn by [`step_z`].
pub fn step_radial_lhat1(t: f64, x: &UnitBallState, rng: &mut RngStream) -> Result<UnitBallState> {
    let k = BallKernel::new(t)?;
    let mut v = x.v.clone();
    k.radial(&mut v, rng);
    Ok(UnitBallState { v })
}

/// NV sandwich `X⁰(t/2, X¹(√t Y, X⁰(t/2, x)))` in the frame where coordinate
/// `m` (0-based) plays the role of the first one.
pub fn step_l_coordinate(m: usize, t: f64, x: &UnitBallState, rng: &mut RngStream) -> Result<UnitBallState> {
    if m >= x.dim() {
        return Err(MrcError::InvalidParameter(format!("coordinate {m} out of range")));
    }
    let k = BallKernel::new(t)?;
    let mut v = x.v.clone();
    k.coordinate(m, &mut v, rng);
    Ok(UnitBallState { v })
}

/// Full unit-ball step of duration `t` with random forward/reverse ordering.
pub fn step_unit_ball(t: f64, x: &UnitBallState, rng: &mut RngStream) -> Result<UnitBallState> {
    let k = BallKernel::new(t)?;
    let mut v = x.v.clone();
    k.step(&mut v, rng);
    Ok(UnitBallState { v })
}
