use std::f64::consts::PI;

use statrs::function::beta::ln_beta;

use super::{BetaPriorKind, BetaPriorSpec};
use crate::error::{Error, Result};

/// Variance of the standard logistic latent error.
pub const LATENT_LOGISTIC_VARIANCE: f64 = PI * PI / 3.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log-density (normalised) of the treatment-effect prior and its derivative.
///
/// The R-squared prior is evaluated at a balanced-allocation indicator
/// variance of 0.25; use [`log_prior_beta_r2`] to supply the realised one.
pub fn log_prior_beta(spec: &BetaPriorSpec, beta: f64) -> (f64, f64) {
    let z = beta - spec.location;
    match spec.kind {
        BetaPriorKind::NormalWide | BetaPriorKind::NormalNarrow => {
            let var = spec.scale_sd * spec.scale_sd;
            (-spec.scale_sd.ln() - LN_SQRT_2PI - z * z / (2.0 * var), -z / var)
        }
        BetaPriorKind::LaplaceWide | BetaPriorKind::LaplaceNarrow => {
            let b = spec.scale_sd / std::f64::consts::SQRT_2;
            let slope = if z > 0.0 {
                -1.0 / b
            } else if z < 0.0 {
                1.0 / b
            } else {
                0.0
            };
            (-(2.0 * b).ln() - z.abs() / b, slope)
        }
        BetaPriorKind::Cauchy => (-PI.ln() - (z * z).ln_1p(), -2.0 * z / (1.0 + z * z)),
        BetaPriorKind::RSquared => r2_density(spec, z, super::DEFAULT_INDICATOR_VARIANCE),
    }
}

/// Proportion of latent-scale variance explained by the treatment indicator.
pub fn r_squared(beta: f64, x_variance: f64) -> f64 {
    let explained = beta * beta * x_variance;
    explained / (explained + LATENT_LOGISTIC_VARIANCE)
}

/// Density of `beta` induced by a Beta prior on the latent-scale R-squared,
/// with the sign of `beta` equally likely in either direction.
pub fn log_prior_beta_r2(spec: &BetaPriorSpec, beta: f64, x_variance: f64) -> Result<(f64, f64)> {
    if spec.kind != BetaPriorKind::RSquared {
        return Err(Error::InvalidParameter(format!("{:?} is not an R-squared prior", spec.kind)));
    }
    if !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be finite, got {beta}")));
    }
    if !(x_variance > 0.0) || !x_variance.is_finite() {
        return Err(Error::InvalidParameter(format!("indicator variance must be positive, got {x_variance}")));
    }
    Ok(r2_density(spec, beta - spec.location, x_variance))
}

// p(b) = 1/2 Beta(R2(b)) |dR2/db| simplifies to
//   -lnB(a1, a2) + (2 a1 - 1) ln|b| + a1 ln v + a2 ln c - (a1 + a2) ln(b^2 v + c).
fn r2_density(spec: &BetaPriorSpec, z: f64, v: f64) -> (f64, f64) {
    let (a1, a2) = (spec.r2_shape1, spec.r2_shape2);
    let c = LATENT_LOGISTIC_VARIANCE;
    let d = z * z * v + c;
    let mut value = -ln_beta(a1, a2) + a1 * v.ln() + a2 * c.ln() - (a1 + a2) * d.ln();
    let mut slope = -(a1 + a2) * 2.0 * z * v / d;
    let power = 2.0 * a1 - 1.0;
    if power != 0.0 {
        if z == 0.0 {
            return (if power > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY }, 0.0);
        }
        value += power * z.abs().ln();
        slope += power / z;
    }
    (value, slope)
}
