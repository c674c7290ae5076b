use super::rng::RngStream;
use super::Workspace;
use crate::corematrix::{project_kernel, CorrelationMatrix, MrcParams, SymMatrix};

/// Corrected Euler step `p((X̃)⁺)` with the Euler increment
/// `X̃ = x + (κ(c-x) + (c-x)κ)h + Σ_n a_n (u_n eⁿᵀ + eⁿ u_nᵀ)`,
/// `u_n = sqrt(x - x eⁿ x) ΔW eⁿ`.
#[derive(Clone, Debug)]
pub(crate) struct EulerKernel {
    d: usize,
    kappa: Vec<f64>,
    c: Vec<f64>,
    a: Vec<f64>,
    h: f64,
    sqrt_h: f64,
}

impl EulerKernel {
    pub(crate) fn new(params: &MrcParams, h: f64) -> Self {
        EulerKernel {
            d: params.dim(),
            kappa: params.kappa.clone(),
            c: params.c.as_slice().to_vec(),
            a: params.a.clone(),
            h,
            sqrt_h: h.sqrt(),
        }
    }

    pub(crate) fn step(&self, x: &mut [f64], ws: &mut Workspace, rng: &mut RngStream) {
        let d = self.d;
        // d² normals, row-major ΔW
        for g in ws.normals.iter_mut() {
            *g = self.sqrt_h * rng.normal();
        }
        for i in 0..d {
            for j in 0..d {
                ws.xt[i * d + j] =
                    x[i * d + j] + self.h * (self.kappa[i] + self.kappa[j]) * (self.c[i * d + j] - x[i * d + j]);
            }
        }
        for n in 0..d {
            let an = self.a[n];
            if an == 0.0 {
                continue;
            }
            ws.diffusion.factor(x, d, n, &mut ws.factor);
            for k in 0..d {
                let mut u = 0.0;
                for l in 0..d {
                    u += ws.factor[k * d + l] * ws.normals[l * d + n];
                }
                let v = an * u;
                ws.xt[k * d + n] += v;
                ws.xt[n * d + k] += v;
            }
        }
        ws.spectral.map(&ws.xt, d, x, |l| l.max(0.0));
        for i in 0..d {
            x[i * d + i] = x[i * d + i].max(f64::MIN_POSITIVE);
        }
        project_kernel(x, d);
    }
}

/// One corrected Euler step; always returns a correlation matrix.
pub fn euler_corrected_step(params: &MrcParams, x: &CorrelationMatrix, h: f64, rng: &mut RngStream) -> CorrelationMatrix {
    let d = params.dim();
    let mut ws = Workspace::new(d);
    let mut buf = x.as_slice().to_vec();
    EulerKernel::new(params, h).step(&mut buf, &mut ws, rng);
    CorrelationMatrix::new_unchecked(SymMatrix::from_symmetric_buffer(d, buf))
}
