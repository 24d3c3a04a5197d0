//! Bijections between `(cut-points, beta)` and `R^J`.
//!
//! Dirichlet priors sample the control-arm simplex through stick-breaking with
//! the logit offset `-ln(J - k)`, so the origin maps to the uniform simplex.
//! The Normal cut-point prior samples the ordered vector directly through
//! exponentiated decrements.

use serde::{Deserialize, Serialize};

use super::{CutpointPriorKind, CutpointPriorSpec};
use crate::error::{Error, Result};
use crate::math::{log1mexp, log_sigmoid};
use crate::ordmodel::{Cutpoints, ModelParams};

/// Unconstrained coordinates: `J - 1` cut-point coordinates followed by beta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedState(pub Vec<f64>);

impl UnconstrainedState {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Intermediate quantities of the stick-breaking map.
pub(crate) struct StickBreaking {
    /// Offset logits `u_k = y_k - ln(J - 1 - k)`.
    pub u: Vec<f64>,
    /// `ln R_m` for `m = 0..J`: log of the stick left after `m` breaks,
    /// equivalently `ln P(Y >= m + 1)` in the control arm.
    pub ln_rest: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl StickBreaking {
    pub fn forward(raw_cuts: &[f64]) -> Self {
        let k = raw_cuts.len();
        let j = k + 1;
        let u: Vec<f64> = raw_cuts
            .iter()
            .enumerate()
            .map(|(i, y)| y - ((j - 1 - i) as f64).ln())
            .collect();
        let mut ln_rest = Vec::with_capacity(j);
        ln_rest.push(0.0);
        for ui in &u {
            let last = *ln_rest.last().unwrap();
            ln_rest.push(last + log_sigmoid(-ui));
        }
        // alpha for cut m + 1 is logit(R_m) = ln R - ln(1 - R).
        let alpha = ln_rest[1..].iter().map(|&l| l - log1mexp(l)).collect();
        Self { u, ln_rest, alpha }
    }

    /// `ln pi_k` for every category.
    #[cfg(test)]
    pub fn log_probs(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.u.iter().zip(&self.ln_rest).map(|(u, lr)| lr + log_sigmoid(*u)).collect();
        out.push(*self.ln_rest.last().unwrap());
        out
    }

    /// Log-Jacobian of `y -> (pi_1, .., pi_{J-1})`.
    pub fn simplex_log_jacobian(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.ln_rest)
            .map(|(&u, &lr)| log_sigmoid(u) + log_sigmoid(-u) + lr)
            .sum()
    }
}

pub(crate) fn ordered_forward(raw_cuts: &[f64]) -> Vec<f64> {
    let mut alpha = Vec::with_capacity(raw_cuts.len());
    alpha.push(raw_cuts[0]);
    for r in &raw_cuts[1..] {
        let last = *alpha.last().unwrap();
        alpha.push(last - r.exp());
    }
    alpha
}

pub fn to_unconstrained(params: &ModelParams, spec: &CutpointPriorSpec) -> UnconstrainedState {
    let a = params.alpha.as_slice();
    let j = a.len() + 1;
    let mut raw = Vec::with_capacity(j);
    match spec.kind {
        CutpointPriorKind::Dirichlet => {
            // logit z_k = ln(pi_k / S_{k+1}) = ln(expm1(ln S_k - ln S_{k+1})).
            for i in 0..j - 1 {
                let upper = if i == 0 { 0.0 } else { log_sigmoid(a[i - 1]) };
                let lower = log_sigmoid(a[i]);
                let logit_z = (upper - lower).exp_m1().ln();
                raw.push(logit_z + ((j - 1 - i) as f64).ln());
            }
        }
        CutpointPriorKind::IndependentNormal => {
            raw.push(a[0]);
            raw.extend(a.windows(2).map(|w| (w[0] - w[1]).ln()));
        }
    }
    raw.push(params.beta);
    UnconstrainedState(raw)
}

/// Cut-point values for raw coordinates without the ordering check. Under
/// Dirichlet priors with tiny concentrations, categories with negligible mass
/// can give cut-points that coincide after rounding.
pub(crate) fn cutpoint_values(raw_cuts: &[f64], spec: &CutpointPriorSpec) -> Vec<f64> {
    match spec.kind {
        CutpointPriorKind::Dirichlet => StickBreaking::forward(raw_cuts).alpha,
        CutpointPriorKind::IndependentNormal => ordered_forward(raw_cuts),
    }
}

/// Maps unconstrained coordinates back to model parameters, returning the
/// log-Jacobian of that map.
///
/// Fails only when floating-point saturation collapses adjacent cut-points.
pub fn from_unconstrained(raw: &UnconstrainedState, spec: &CutpointPriorSpec) -> Result<(ModelParams, f64)> {
    let r = raw.as_slice();
    if r.len() < 2 {
        return Err(Error::InvalidParameter("unconstrained state needs at least 2 coordinates".into()));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite unconstrained coordinate".into()));
    }
    let (cuts, beta) = r.split_at(r.len() - 1);
    let (alpha, log_jac) = match spec.kind {
        CutpointPriorKind::Dirichlet => {
            let sb = StickBreaking::forward(cuts);
            // |d alpha / d y| = |d pi / d y| / |d pi / d alpha|
            let pi_alpha: f64 = sb.alpha.iter().map(|&a| log_sigmoid(a) + log_sigmoid(-a)).sum();
            let lj = sb.simplex_log_jacobian() - pi_alpha;
            (sb.alpha, lj)
        }
        CutpointPriorKind::IndependentNormal => (ordered_forward(cuts), cuts[1..].iter().sum()),
    };
    Ok((ModelParams::new(Cutpoints::new(alpha)?, beta[0])?, log_jac))
}
