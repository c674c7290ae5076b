use serde::{Deserialize, Serialize};

use super::CorrelationMatrix;
use crate::error::{MrcError, Result};

/// Coefficients `(x, κ, c, a)` of the MRC diffusion
/// `dX = (κ(c - X) + (c - X)κ) dt + Σ_n a_n (sqrt(X - X eⁿ X) dW eⁿ + eⁿ dWᵀ sqrt(X - X eⁿ X))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct MrcParams {
    pub x: CorrelationMatrix,
    pub kappa: Vec<f64>,
    pub c: CorrelationMatrix,
    pub a: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    x: CorrelationMatrix,
    kappa: Vec<f64>,
    c: CorrelationMatrix,
    a: Vec<f64>,
}

impl TryFrom<RawParams> for MrcParams {
    type Error = MrcError;
    fn try_from(r: RawParams) -> Result<Self> {
        MrcParams::new(r.x, r.kappa, r.c, r.a)
    }
}

impl From<MrcParams> for RawParams {
    fn from(p: MrcParams) -> Self {
        RawParams { x: p.x, kappa: p.kappa, c: p.c, a: p.a }
    }
}

impl MrcParams {
    pub fn new(x: CorrelationMatrix, kappa: Vec<f64>, c: CorrelationMatrix, a: Vec<f64>) -> Result<Self> {
        let d = x.dim();
        for (name, len) in [("kappa", kappa.len()), ("c", c.dim()), ("a", a.len())] {
            if len != d {
                return Err(MrcError::InvalidParameter(format!("{name} has dimension {len}, x has {d}")));
            }
        }
        if let Some(k) = kappa.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
            return Err(MrcError::InvalidParameter(format!("kappa entries must be finite and >= 0, got {k}")));
        }
        if let Some(v) = a.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(MrcError::InvalidParameter(format!("a entries must be finite and >= 0, got {v}")));
        }
        Ok(MrcParams { x, kappa, c, a })
    }

    /// Scalar speeds and vols: `κ = kappa·I`, `a = a·I`.
    pub fn isotropic(x: CorrelationMatrix, kappa: f64, c: CorrelationMatrix, a: f64) -> Result<Self> {
        let d = x.dim();
        Self::new(x, vec![kappa; d], c, vec![a; d])
    }

    /// The benchmark configuration: `κ = 1.25 I`, `c = I`, `a = I`, `x` with
    /// off-diagonal entries 0.7.
    pub fn reference(d: usize) -> Self {
        let x = CorrelationMatrix::equicorrelation(d, 0.7).expect("0.7 equicorrelation is valid");
        Self::isotropic(x, 1.25, CorrelationMatrix::identity(d), 1.0).expect("valid parameters")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn with_x(&self, x: CorrelationMatrix) -> Result<Self> {
        Self::new(x, self.kappa.clone(), self.c.clone(), self.a.clone())
    }

    /// Parameters of the principal sub-block on `idx`.
    pub fn restrict(&self, idx: &[usize]) -> Result<Self> {
        let d = self.dim();
        if let Some(&i) = idx.iter().find(|&&i| i >= d) {
            return Err(MrcError::InvalidParameter(format!("index {i} out of range for d = {d}")));
        }
        Self::new(
            self.x.submatrix(idx),
            idx.iter().map(|&i| self.kappa[i]).collect(),
            self.c.submatrix(idx),
            idx.iter().map(|&i| self.a[i]).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let p = MrcParams::reference(3);
        let s = serde_json::to_string(&p).unwrap();
        let q: MrcParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_negative_speed() {
        let x = CorrelationMatrix::identity(2);
        assert!(MrcParams::new(x.clone(), vec![-1.0, 1.0], x.clone(), vec![1.0, 1.0]).is_err());
        assert!(MrcParams::new(x.clone(), vec![1.0], x.clone(), vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_invalid_matrix_in_json() {
        let s = r#"{"x":[[1,2],[2,1]],"kappa":[1,1],"c":[[1,0],[0,1]],"a":[1,1]}"#;
        assert!(serde_json::from_str::<MrcParams>(s).is_err());
    }
}
