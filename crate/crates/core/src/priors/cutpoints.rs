use statrs::function::gamma::ln_gamma;

use super::{CutpointPriorKind, CutpointPriorSpec};
use crate::error::{Error, Result};
use crate::math::{log_sigmoid, sigmoid};
use crate::ordmodel::{sum_log_probs_and_grad, Cutpoints};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log-density of the cut-points and its gradient.
///
/// The Dirichlet prior lives on the control-arm simplex; the returned value
/// includes the Jacobian of the cut-point to simplex map so that it is a proper
/// density over the cut-points. The Normal prior is restricted to the ordered
/// cone without renormalisation.
pub fn log_prior_cutpoints(spec: &CutpointPriorSpec, alpha: &Cutpoints) -> Result<(f64, Vec<f64>)> {
    spec.validate()?;
    let a = alpha.as_slice();
    if let Some(k) = (1..a.len()).find(|&k| !(a[k - 1] > a[k])) {
        return Err(Error::InvalidCutpoints(format!("ordering violated at index {k}")));
    }
    let mut grad = vec![0.0; a.len()];
    let value = match spec.kind {
        CutpointPriorKind::Dirichlet => dirichlet_on_cutpoints(spec.concentration, a, &mut grad),
        CutpointPriorKind::IndependentNormal => {
            let var = spec.normal_sd * spec.normal_sd;
            let mut total = 0.0;
            for (g, &ak) in grad.iter_mut().zip(a) {
                total += -spec.normal_sd.ln() - LN_SQRT_2PI - ak * ak / (2.0 * var);
                *g = -ak / var;
            }
            total
        }
    };
    Ok((value, grad))
}

/// `lnGamma(J c) - J lnGamma(c)`.
pub(crate) fn dirichlet_log_norm(concentration: f64, categories: usize) -> f64 {
    let j = categories as f64;
    ln_gamma(j * concentration) - j * ln_gamma(concentration)
}

fn dirichlet_on_cutpoints(c: f64, alpha: &[f64], grad: &mut [f64]) -> f64 {
    let j = alpha.len() + 1;
    let sum_log_pi = sum_log_probs_and_grad(alpha, 0.0, c - 1.0, grad);
    // |d pi / d alpha| = prod sigma(alpha_k) sigma(-alpha_k)
    let mut log_jac = 0.0;
    for (g, &ak) in grad.iter_mut().zip(alpha) {
        log_jac += log_sigmoid(ak) + log_sigmoid(-ak);
        *g += sigmoid(-ak) - sigmoid(ak);
    }
    dirichlet_log_norm(c, j) + (c - 1.0) * sum_log_pi + log_jac
}
