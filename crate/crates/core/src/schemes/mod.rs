//! Discretization schemes: the corrected Euler step and the direct weak
//! second-order composition built from exact drift flows and unit-ball steps.

pub mod ball;
mod direct;
mod euler;
pub mod rng;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ball::{
    flow_z0, flow_z1, moment_matching, nv_flow_x0, nv_flow_x1, step_l_coordinate, step_radial_lhat1,
    step_unit_ball, step_z, threshold_k, UnitBallState,
};
pub use direct::{reduced_first_row, step_elementary_li, step_mrc_second_order, DomainPolicy};
pub use euler::euler_corrected_step;
pub use rng::{sample_y, RngStream};

use crate::corematrix::{CholScratch, DiffusionScratch, MrcParams, SpectralScratch};
use crate::error::{MrcError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    EulerCorrected,
    SecondOrderDirect,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 2] = [SchemeKind::EulerCorrected, SchemeKind::SecondOrderDirect];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::EulerCorrected => "euler_corrected",
            SchemeKind::SecondOrderDirect => "second_order_direct",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = MrcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" | "euler_corrected" => Ok(SchemeKind::EulerCorrected),
            "direct" | "second_order" | "second_order_direct" => Ok(SchemeKind::SecondOrderDirect),
            _ => Err(MrcError::Usage(format!("unknown scheme `{s}`"))),
        }
    }
}

/// Per-worker scratch buffers shared by all step kernels of dimension `d`.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub(crate) normals: Vec<f64>,
    pub(crate) xt: Vec<f64>,
    pub(crate) factor: Vec<f64>,
    pub(crate) diffusion: DiffusionScratch,
    pub(crate) spectral: SpectralScratch,
    pub(crate) q: Vec<f64>,
    pub(crate) chol: CholScratch,
    pub(crate) lower: Vec<usize>,
    pub(crate) idx: Vec<usize>,
    pub(crate) u: Vec<f64>,
}

impl Workspace {
    pub fn new(d: usize) -> Self {
        let n = d.saturating_sub(1);
        Workspace {
            normals: vec![0.0; d * d],
            xt: vec![0.0; d * d],
            factor: vec![0.0; d * d],
            diffusion: DiffusionScratch::new(d),
            spectral: SpectralScratch::new(d),
            q: vec![0.0; n * n],
            chol: CholScratch::new(n),
            lower: vec![0; n],
            idx: vec![0; n],
            u: vec![0.0; n],
        }
    }
}

/// A scheme specialized to fixed parameters and step size, with all per-step
/// constants precomputed.
#[derive(Clone, Debug)]
pub struct Stepper {
    d: usize,
    kind: StepperKind,
}

#[derive(Clone, Debug)]
enum StepperKind {
    Euler(euler::EulerKernel),
    Direct(direct::SecondOrderKernel),
}

impl Stepper {
    pub fn new(params: &MrcParams, scheme: SchemeKind, h: f64) -> Result<Self> {
        Self::with_policy(params, scheme, h, DomainPolicy::Strict)
    }

    pub fn with_policy(params: &MrcParams, scheme: SchemeKind, h: f64, policy: DomainPolicy) -> Result<Self> {
        if !(h >= 0.0 && h.is_finite()) {
            return Err(MrcError::InvalidParameter(format!("step size {h}")));
        }
        let kind = match scheme {
            SchemeKind::EulerCorrected => StepperKind::Euler(euler::EulerKernel::new(params, h)),
            SchemeKind::SecondOrderDirect => {
                StepperKind::Direct(direct::SecondOrderKernel::new(params, h, policy)?)
            }
        };
        Ok(Stepper { d: params.dim(), kind })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Advances the row-major state `x` by one step.
    #[inline]
    pub fn step(&self, x: &mut [f64], ws: &mut Workspace, rng: &mut RngStream) -> Result<()> {
        match &self.kind {
            StepperKind::Euler(k) => {
                k.step(x, ws, rng);
                Ok(())
            }
            StepperKind::Direct(k) => k.step(x, ws, rng),
        }
    }
}
