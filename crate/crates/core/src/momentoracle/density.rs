use crate::error::{MrcError, Result};

/// Ergodic density of the first row `((X_∞)_{1,j})_{j≥2}` of the elementary
/// process, on the unit ball of dimension `d - 1 = z.len()`:
/// `Γ((α+1)/2) / (π^{(d-1)/2} Γ((α+2-d)/2)) · (1 - |z|²)^{(α-d)/2}`.
pub fn ergodic_density_first_row(alpha: f64, z: &[f64]) -> Result<f64> {
    let d = z.len() + 1;
    if !(alpha > d as f64 - 2.0) {
        return Err(MrcError::NonIntegrableAlpha { alpha, dim: d });
    }
    let r2: f64 = z.iter().map(|v| v * v).sum();
    if r2 > 1.0 {
        return Ok(0.0);
    }
    let n = (d - 1) as f64;
    let norm = libm::tgamma((alpha + 1.0) / 2.0)
        / (std::f64::consts::PI.powf(n / 2.0) * libm::tgamma((alpha + 2.0 - d as f64) / 2.0));
    Ok(norm * (1.0 - r2).powf((alpha - d as f64) / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert!((ergodic_density_first_row(2.0, &[0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ergodic_density_first_row(4.0, &[0.6, 0.8]).unwrap(), 0.0);
        assert!(matches!(
            ergodic_density_first_row(1.0, &[0.0, 0.0]),
            Err(MrcError::NonIntegrableAlpha { .. })
        ));
    }
}
