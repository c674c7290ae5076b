//! Multi-asset basket under local volatility with constant, local,
//! stochastic-local (MRC reverting to the local target) or MRC correlation;
//! index options, implied volatilities and correlation swaps.

mod bs;
mod swap;
mod weights;

use serde::{Deserialize, Serialize};

pub use bs::{bs_call, implied_vol, norm_cdf};
pub use swap::{corr_swap_price_closed, corr_swap_price_mc};
pub use weights::{load_weights, parse_weights, MarketWeights, WeightEntry};

use crate::corematrix::{validate_correlation, CorrelationMatrix, MrcParams, SpectralScratch, SymMatrix};
use crate::error::{MrcError, Result};
use crate::mcengine::{run_blocks, McEstimate, TimeGrid};
use crate::schemes::rng::{LANE_MRC, LANE_STOCK};
use crate::schemes::{RngStream, SchemeKind, Stepper, Workspace};

/// Upper cap on local volatilities.
pub const MAX_VOL: f64 = 5.0;

/// Per-asset local volatility `σ(t, s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalVol {
    Flat { sigma: f64 },
    /// `σ (s / s_ref)^(β - 1)`, capped at `MAX_VOL`.
    Cev { sigma: f64, beta: f64, s_ref: f64 },
}

impl LocalVol {
    #[inline]
    pub fn eval(&self, _t: f64, s: f64) -> f64 {
        match *self {
            LocalVol::Flat { sigma } => sigma,
            LocalVol::Cev { sigma, beta, s_ref } => (sigma * (s / s_ref).powf(beta - 1.0)).min(MAX_VOL),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LocalVol::Flat { sigma } => sigma >= 0.0 && sigma.is_finite(),
            LocalVol::Cev { sigma, beta, s_ref } => sigma >= 0.0 && sigma.is_finite() && beta.is_finite() && s_ref > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(MrcError::InvalidParameter(format!("local volatility {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrModelKind {
    Constant { rho: f64 },
    Local { eta: f64, gamma: f64, rho_min: f64 },
    Slc { kappa: f64, epsilon: f64, eta: f64, gamma: f64, rho_min: f64 },
    Mrc(MrcParams),
}

/// `max(1 / (1 + η (I/I₀)^γ), ρ_min)`, kept in `[ρ_min, 1]`.
pub fn local_rho(_t: f64, index: f64, index0: f64, eta: f64, gamma: f64, rho_min: f64) -> Result<f64> {
    if !(index > 0.0) {
        return Err(MrcError::NonpositiveIndex(index));
    }
    if !(index0 > 0.0) {
        return Err(MrcError::NonpositiveIndex(index0));
    }
    let rho = 1.0 / (1.0 + eta * (index / index0).powf(gamma));
    Ok(rho.max(rho_min).min(1.0))
}

/// `sqrt(2κε(1-ρ)/(d-1))`, which keeps `2κ(1-ρ) ≥ (d-1)a²`.
pub fn slc_vol_a(kappa: f64, epsilon: f64, rho: f64, d: usize) -> f64 {
    if d < 2 {
        return 0.0;
    }
    (2.0 * kappa * epsilon * (1.0 - rho).max(0.0) / (d - 1) as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasketModel {
    pub spots: Vec<f64>,
    pub rate: f64,
    pub weights: Vec<f64>,
    pub vols: Vec<LocalVol>,
    pub corr: CorrModelKind,
}

impl BasketModel {
    pub fn new(spots: Vec<f64>, rate: f64, weights: Vec<f64>, vols: Vec<LocalVol>, corr: CorrModelKind) -> Result<Self> {
        let m = BasketModel { spots, rate, weights, vols, corr };
        m.validate()?;
        Ok(m)
    }

    /// Equal spots and one volatility for every constituent of `weights`.
    pub fn from_market(weights: &MarketWeights, spot: f64, rate: f64, vol: LocalVol, corr: CorrModelKind) -> Result<Self> {
        let d = weights.len();
        Self::new(vec![spot; d], rate, weights.fractions(), vec![vol; d], corr)
    }

    pub fn dim(&self) -> usize {
        self.spots.len()
    }

    pub fn index0(&self) -> f64 {
        self.weights.iter().zip(&self.spots).map(|(a, s)| a * s).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(MrcError::InvalidParameter("empty basket".into()));
        }
        for (what, n) in [("weights", self.weights.len()), ("vols", self.vols.len())] {
            if n != d {
                return Err(MrcError::InvalidParameter(format!("{what}: expected {d} entries, got {n}")));
            }
        }
        if let Some(s) = self.spots.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(MrcError::InvalidParameter(format!("spot {s}")));
        }
        if !self.rate.is_finite() {
            return Err(MrcError::InvalidParameter(format!("rate {}", self.rate)));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(MrcError::InvalidParameter("negative weight".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MrcError::WeightSum(total));
        }
        self.vols.iter().try_for_each(LocalVol::validate)?;
        match &self.corr {
            CorrModelKind::Constant { rho } => {
                let lo = if d > 1 { -1.0 / (d - 1) as f64 } else { -1.0 };
                if !(*rho >= lo && *rho <= 1.0) {
                    return Err(MrcError::InvalidParameter(format!("constant correlation {rho} outside [{lo}, 1]")));
                }
            }
            CorrModelKind::Local { eta, gamma, rho_min } => check_local(*eta, *gamma, *rho_min)?,
            CorrModelKind::Slc { kappa, epsilon, eta, gamma, rho_min } => {
                check_local(*eta, *gamma, *rho_min)?;
                if !(*kappa > 0.0 && kappa.is_finite()) || !(0.0..=1.0).contains(epsilon) {
                    return Err(MrcError::InvalidParameter(format!("SLC κ = {kappa}, ε = {epsilon}")));
                }
            }
            CorrModelKind::Mrc(p) => {
                if p.dim() != d {
                    return Err(MrcError::DimensionMismatch { expected: d, got: p.dim() });
                }
            }
        }
        Ok(())
    }
}

fn check_local(eta: f64, gamma: f64, rho_min: f64) -> Result<()> {
    if eta >= 0.0 && gamma >= 0.0 && (0.0..=1.0).contains(&rho_min) {
        Ok(())
    } else {
        Err(MrcError::InvalidParameter(format!("local correlation η = {eta}, γ = {gamma}, ρ_min = {rho_min}")))
    }
}

/// `y = sqrt((1-ρ)I + ρJ) z` in `O(d)`.
fn equicorr_sqrt_apply(rho: f64, z: &[f64], y: &mut [f64]) {
    let d = z.len() as f64;
    let s_perp = (1.0 - rho).max(0.0).sqrt();
    let s_one = (1.0 + (d - 1.0) * rho).max(0.0).sqrt();
    let mean = z.iter().sum::<f64>() / d;
    for (yi, zi) in y.iter_mut().zip(z) {
        *yi = s_perp * zi + (s_one - s_perp) * mean;
    }
}

/// What a path exposes to payoff functions.
#[derive(Clone, Debug)]
pub struct BasketPath<'a> {
    /// Terminal spots.
    pub spots: &'a [f64],
    pub index: f64,
    /// Trapezoidal time average of the correlation matrix (row-major).
    pub avg_corr: &'a [f64],
}

struct PathScratch {
    log_s: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    y: Vec<f64>,
    corr: Vec<f64>,
    root: Vec<f64>,
    avg: Vec<f64>,
    ws: Workspace,
    spectral: SpectralScratch,
}

fn equicorr_into(rho: f64, d: usize, out: &mut [f64]) {
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = if i == j { 1.0 } else { rho };
        }
    }
}

/// Stepper for the SLC correlation over one step with frozen target `ρ`.
fn slc_stepper(kappa: f64, epsilon: f64, rho: f64, d: usize, h: f64, x: &[f64]) -> Result<Stepper> {
    let a = slc_vol_a(kappa, epsilon, rho, d);
    let c = CorrelationMatrix::equicorrelation(d, rho)?;
    let x = CorrelationMatrix::new_unchecked(SymMatrix::from_symmetric_buffer(d, x.to_vec()));
    let p = MrcParams { x, kappa: vec![kappa; d], c, a: vec![a; d] };
    Stepper::new(&p, SchemeKind::SecondOrderDirect, h)
}

/// Simulates `n_paths` basket paths and returns the estimates of the
/// `n_out` outputs written by `payoff`.
///
/// Within each step the correlation is advanced first with coefficients frozen
/// at the left point, then the log-spots take an Euler step driven by the
/// left-point correlation. Correlation and stock draws come from disjoint lanes.
pub fn simulate_basket<F>(
    model: &BasketModel,
    grid: TimeGrid,
    n_paths: u64,
    seed: u64,
    n_out: usize,
    payoff: F,
) -> Result<Vec<McEstimate>>
where
    F: Fn(&BasketPath, &mut [f64]) + Sync,
{
    model.validate()?;
    let d = model.dim();
    let h = grid.step();
    let sqrt_h = h.sqrt();
    let i0 = model.index0();
    let mrc_stepper = match &model.corr {
        CorrModelKind::Mrc(p) => Some(Stepper::new(p, SchemeKind::SecondOrderDirect, h)?),
        _ => None,
    };
    let index_of = |s: &[f64]| model.weights.iter().zip(s).map(|(a, s)| a * s).sum::<f64>();
    run_blocks(
        n_paths,
        n_out,
        || PathScratch {
            log_s: vec![0.0; d],
            s: vec![0.0; d],
            z: vec![0.0; d],
            y: vec![0.0; d],
            corr: vec![0.0; d * d],
            root: vec![0.0; d * d],
            avg: vec![0.0; d * d],
            ws: Workspace::new(d),
            spectral: SpectralScratch::new(d),
        },
        |sc, p, out| {
            let mut rng_c = RngStream::for_path(seed, LANE_MRC, p);
            let mut rng_s = RngStream::for_path(seed, LANE_STOCK, p);
            let check = p % crate::mcengine::SPOT_CHECK_EVERY == 0;
            sc.s.copy_from_slice(&model.spots);
            for (l, s) in sc.log_s.iter_mut().zip(&model.spots) {
                *l = s.ln();
            }
            match &model.corr {
                CorrModelKind::Constant { rho } => equicorr_into(*rho, d, &mut sc.corr),
                CorrModelKind::Local { eta, gamma, rho_min } | CorrModelKind::Slc { eta, gamma, rho_min, .. } => {
                    equicorr_into(local_rho(0.0, i0, i0, *eta, *gamma, *rho_min)?, d, &mut sc.corr)
                }
                CorrModelKind::Mrc(params) => sc.corr.copy_from_slice(params.x.as_slice()),
            }
            for (a, c) in sc.avg.iter_mut().zip(&sc.corr) {
                *a = 0.5 * c / grid.steps as f64;
            }
            for k in 0..grid.steps {
                let t = grid.node(k);
                let index = index_of(&sc.s);
                // left-point correlation and its square root
                let equi_rho = match &model.corr {
                    CorrModelKind::Constant { rho } => Some(*rho),
                    CorrModelKind::Local { eta, gamma, rho_min } => {
                        let rho = local_rho(t, index, i0, *eta, *gamma, *rho_min)?;
                        equicorr_into(rho, d, &mut sc.corr);
                        Some(rho)
                    }
                    _ => None,
                };
                if equi_rho.is_none() {
                    sc.spectral.map(&sc.corr, d, &mut sc.root, |l| l.max(0.0).sqrt());
                }
                // correlation step
                match &model.corr {
                    CorrModelKind::Slc { kappa, epsilon, eta, gamma, rho_min } => {
                        let target = local_rho(t, index, i0, *eta, *gamma, *rho_min)?;
                        let st = slc_stepper(*kappa, *epsilon, target, d, h, &sc.corr)?;
                        st.step(&mut sc.corr, &mut sc.ws, &mut rng_c)?;
                    }
                    CorrModelKind::Mrc(_) => {
                        mrc_stepper.as_ref().expect("stepper").step(&mut sc.corr, &mut sc.ws, &mut rng_c)?;
                    }
                    _ => {}
                }
                if check && matches!(model.corr, CorrModelKind::Slc { .. } | CorrModelKind::Mrc(_)) {
                    validate_correlation(&SymMatrix::from_row_major(d, &sc.corr)?, 1e-9)?;
                }
                // stock step
                for z in sc.z.iter_mut() {
                    *z = rng_s.normal();
                }
                match equi_rho {
                    Some(rho) => equicorr_sqrt_apply(rho, &sc.z, &mut sc.y),
                    None => {
                        for i in 0..d {
                            sc.y[i] = (0..d).map(|j| sc.root[i * d + j] * sc.z[j]).sum();
                        }
                    }
                }
                for i in 0..d {
                    let sig = model.vols[i].eval(t, sc.s[i]);
                    sc.log_s[i] += (model.rate - 0.5 * sig * sig) * h + sig * sqrt_h * sc.y[i];
                    sc.s[i] = sc.log_s[i].exp();
                }
                if let CorrModelKind::Local { eta, gamma, rho_min } = &model.corr {
                    if k + 1 == grid.steps {
                        equicorr_into(local_rho(t + h, index_of(&sc.s), i0, *eta, *gamma, *rho_min)?, d, &mut sc.corr);
                    }
                }
                let w = if k + 1 == grid.steps { 0.5 } else { 1.0 } / grid.steps as f64;
                for (a, c) in sc.avg.iter_mut().zip(&sc.corr) {
                    *a += w * c;
                }
            }
            out.fill(0.0);
            let path = BasketPath { spots: &sc.s, index: index_of(&sc.s), avg_corr: &sc.avg };
            payoff(&path, out);
            Ok(())
        },
    )
}

/// Discounted index calls `e^{-rT} E[(I_T - K)⁺]` for a strike ladder, all on
/// the same paths.
pub fn index_call_prices(model: &BasketModel, strikes: &[f64], grid: TimeGrid, n_paths: u64, seed: u64) -> Result<Vec<McEstimate>> {
    let df = (-model.rate * grid.horizon).exp();
    simulate_basket(model, grid, n_paths, seed, strikes.len(), |p, out| {
        for (o, k) in out.iter_mut().zip(strikes) {
            *o = df * (p.index - k).max(0.0);
        }
    })
}

pub fn index_call_price(model: &BasketModel, strike: f64, grid: TimeGrid, n_paths: u64, seed: u64) -> Result<McEstimate> {
    Ok(index_call_prices(model, &[strike], grid, n_paths, seed)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corematrix::psd_sqrt;

    #[test]
    fn local_rho_examples() {
        let r = local_rho(0.0, 100.0, 100.0, 0.500714, 8.672568, 0.1).unwrap();
        assert!((r - 0.666349).abs() < 1e-6, "{r}");
        assert_eq!(local_rho(0.0, 1e6, 100.0, 0.500714, 8.672568, 0.1).unwrap(), 0.1);
        assert_eq!(local_rho(0.0, 80.0, 100.0, 0.0, 8.0, 0.1).unwrap(), 1.0);
        assert!(matches!(local_rho(0.0, 0.0, 100.0, 0.5, 8.0, 0.1), Err(MrcError::NonpositiveIndex(_))));
    }

    #[test]
    fn slc_vol_examples() {
        assert_eq!(slc_vol_a(100.0, 0.0, 0.68, 30), 0.0);
        assert!((slc_vol_a(100.0, 0.5, 0.68, 30) - (32.0f64 / 29.0).sqrt()).abs() < 1e-14);
        assert_eq!(slc_vol_a(100.0, 0.5, 1.0, 30), 0.0);
        let a = slc_vol_a(3.0, 1.0, 0.2, 5);
        assert!(2.0 * 3.0 * (1.0 - 0.2) >= 4.0 * a * a - 1e-12);
    }

    #[test]
    fn equicorr_sqrt_matches_psd_sqrt() {
        for (d, rho) in [(2, 0.5), (5, -0.2), (4, 1.0), (30, 0.67968)] {
            let root = psd_sqrt(CorrelationMatrix::equicorrelation(d, rho).unwrap().as_sym()).unwrap();
            let z: Vec<f64> = (0..d).map(|i| ((i * 7 + 3) % 11) as f64 / 5.0 - 1.0).collect();
            let mut y = vec![0.0; d];
            equicorr_sqrt_apply(rho, &z, &mut y);
            for i in 0..d {
                let want: f64 = (0..d).map(|j| root.get(i, j) * z[j]).sum();
                assert!((y[i] - want).abs() < 1e-9, "d={d} ρ={rho}");
            }
        }
    }

    #[test]
    fn model_validation() {
        let flat = LocalVol::Flat { sigma: 0.2 };
        let ok = BasketModel::new(vec![100.0; 3], 0.0, vec![0.5, 0.25, 0.25], vec![flat.clone(); 3], CorrModelKind::Constant { rho: 0.3 });
        assert!(ok.is_ok());
        let bad_w = BasketModel::new(vec![100.0; 2], 0.0, vec![0.5, 0.4], vec![flat.clone(); 2], CorrModelKind::Constant { rho: 0.3 });
        assert!(matches!(bad_w, Err(MrcError::WeightSum(_))));
        let bad_rho = BasketModel::new(vec![100.0; 3], 0.0, vec![0.5, 0.25, 0.25], vec![flat; 3], CorrModelKind::Constant { rho: -0.6 });
        assert!(bad_rho.is_err());
    }

    #[test]
    fn one_asset_is_local_vol_euler() {
        let m = BasketModel::new(vec![100.0], 0.01, vec![1.0], vec![LocalVol::Flat { sigma: 0.2 }], CorrModelKind::Constant { rho: 1.0 })
            .unwrap();
        let g = TimeGrid::new(1.0, 4).unwrap();
        let est = index_call_price(&m, 100.0, g, 100_000, 3).unwrap();
        let bs = bs_call(100.0, 100.0, 0.01, 1.0, 0.2);
        assert!(est.within(bs, 3.0), "{est:?} vs {bs}");
    }

    #[test]
    fn serde_round_trip() {
        let m = BasketModel::new(
            vec![100.0; 2],
            0.0,
            vec![0.5, 0.5],
            vec![LocalVol::Cev { sigma: 0.2, beta: 0.5, s_ref: 100.0 }; 2],
            CorrModelKind::Slc { kappa: 100.0, epsilon: 0.5, eta: 0.5, gamma: 8.0, rho_min: 0.1 },
        )
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<BasketModel>(&s).unwrap(), m);
    }
}
