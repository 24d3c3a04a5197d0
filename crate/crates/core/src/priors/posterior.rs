use super::beta::{log_prior_beta, log_prior_beta_r2};
use super::cutpoints::dirichlet_log_norm;
use std::f64::consts::LN_2;

use super::transform::{ordered_forward, UnconstrainedState};
use super::{BetaPriorKind, BetaPriorSpec, CutpointPriorKind, CutpointPriorSpec};
use crate::error::{Error, Result};
use crate::ordmodel::{log_likelihood_and_grad_raw, logistic_parts, TrialData};
use crate::sampler::LogDensity;

/// Indicator variance used by the R-squared prior when the data carry no
/// information about allocation (no participants, or a single arm).
pub const DEFAULT_INDICATOR_VARIANCE: f64 = 0.25;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log-posterior value and gradient in unconstrained coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEval {
    pub value: f64,
    pub grad: Vec<f64>,
    /// False when some intermediate was non-finite; `value` is then `-inf`.
    pub finite: bool,
}

/// Unnormalised log-posterior of the proportional-odds model in unconstrained
/// coordinates: likelihood, both priors and the transform log-Jacobian.
#[derive(Debug, Clone)]
pub struct PosteriorTarget {
    data: TrialData,
    beta_prior: BetaPriorSpec,
    cut_prior: CutpointPriorSpec,
    x_variance: f64,
    /// Stick-breaking logit offsets `ln(J - 1 - k)`.
    stick_offsets: Vec<f64>,
    dirichlet_norm: f64,
}

impl PosteriorTarget {
    pub fn new(data: TrialData, beta_prior: BetaPriorSpec, cut_prior: CutpointPriorSpec) -> Result<Self> {
        beta_prior.validate()?;
        cut_prior.validate()?;
        if data.categories() < 2 {
            return Err(Error::InvalidData("need at least 2 categories".into()));
        }
        let x_variance = match data.indicator_variance() {
            Some(v) if v > 0.0 => v,
            _ => DEFAULT_INDICATOR_VARIANCE,
        };
        let j = data.categories();
        let stick_offsets = (0..j - 1).map(|i| ((j - 1 - i) as f64).ln()).collect();
        let dirichlet_norm = match cut_prior.kind {
            CutpointPriorKind::Dirichlet => dirichlet_log_norm(cut_prior.concentration, j),
            CutpointPriorKind::IndependentNormal => 0.0,
        };
        Ok(Self { data, beta_prior, cut_prior, x_variance, stick_offsets, dirichlet_norm })
    }

    pub fn data(&self) -> &TrialData {
        &self.data
    }

    pub fn categories(&self) -> usize {
        self.data.categories()
    }

    /// Indicator variance fed to the R-squared prior.
    pub fn x_variance(&self) -> f64 {
        self.x_variance
    }

    pub fn cut_prior(&self) -> &CutpointPriorSpec {
        &self.cut_prior
    }

    fn beta_term(&self, beta: f64) -> (f64, f64) {
        match self.beta_prior.kind {
            BetaPriorKind::RSquared => log_prior_beta_r2(&self.beta_prior, beta, self.x_variance)
                .unwrap_or((f64::NEG_INFINITY, 0.0)),
            _ => log_prior_beta(&self.beta_prior, beta),
        }
    }

    fn eval_into(&self, raw: &[f64], grad: &mut [f64]) -> f64 {
        let j = self.categories();
        debug_assert_eq!(raw.len(), j);
        let (cuts, beta) = (&raw[..j - 1], raw[j - 1]);
        let (prior_beta, dprior_beta) = self.beta_term(beta);

        let value = match self.cut_prior.kind {
            CutpointPriorKind::Dirichlet => {
                let c = self.cut_prior.concentration;
                let k = j - 1;
                let mut ln_rest = Vec::with_capacity(j);
                let mut alpha = Vec::with_capacity(k);
                let mut one_minus_rest = Vec::with_capacity(k);
                let mut z = Vec::with_capacity(k);
                let mut sum_log_pi = 0.0;
                let mut log_jac = 0.0;
                let mut lr = 0.0;
                ln_rest.push(lr);
                for i in 0..k {
                    let u = cuts[i] - self.stick_offsets[i];
                    let (ls_pos, ls_neg, zi, nzi) = logistic_parts(u);
                    sum_log_pi += lr + ls_pos;
                    log_jac += ls_pos + ls_neg + lr;
                    lr += ls_neg;
                    ln_rest.push(lr);
                    // alpha = logit R = ln R - ln(1 - R)
                    let (log_omr, omr) = if lr > -LN_2 {
                        let em = -lr.exp_m1();
                        (em.ln(), em)
                    } else {
                        let r = lr.exp();
                        ((-r).ln_1p(), 1.0 - r)
                    };
                    alpha.push(lr - log_omr);
                    one_minus_rest.push(omr);
                    z.push((zi, nzi));
                }
                sum_log_pi += lr;
                let ll = log_likelihood_and_grad_raw(&self.data, &alpha, beta, grad);
                let value = ll + self.dirichlet_norm + (c - 1.0) * sum_log_pi + log_jac + prior_beta;

                // Walk back through ln R_m: d alpha / d ln R = 1 / (1 - R) and
                // d ln R_m / d u_i = -z_i for i < m.
                let mut suffix = 0.0;
                for i in (0..k).rev() {
                    let m = i + 1;
                    let mut g_rest = grad[m - 1] / one_minus_rest[m - 1] + (c - 1.0);
                    if m < k {
                        g_rest += 1.0;
                    }
                    suffix += g_rest;
                    let (zi, nzi) = z[i];
                    grad[i] = -zi * suffix + (c - 1.0) * nzi + (nzi - zi);
                }
                value
            }
            CutpointPriorKind::IndependentNormal => {
                let sd = self.cut_prior.normal_sd;
                let var = sd * sd;
                let alpha = ordered_forward(cuts);
                let ll = log_likelihood_and_grad_raw(&self.data, &alpha, beta, grad);
                let mut prior = 0.0;
                for (g, &a) in grad.iter_mut().zip(&alpha) {
                    prior += -sd.ln() - LN_SQRT_2PI - a * a / (2.0 * var);
                    *g += -a / var;
                }
                let log_jac: f64 = cuts[1..].iter().sum();
                // alpha_m = raw_0 - sum_{1 <= i <= m} exp(raw_i)
                let mut suffix = 0.0;
                for i in (1..j - 1).rev() {
                    suffix += grad[i];
                    grad[i] = -cuts[i].exp() * suffix + 1.0;
                }
                grad[0] += suffix;
                ll + prior + log_jac + prior_beta
            }
        };
        grad[j - 1] += dprior_beta;

        if value.is_finite() && grad.iter().all(|g| g.is_finite()) {
            value
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn evaluate(&self, raw: &UnconstrainedState) -> PosteriorEval {
        let mut grad = vec![0.0; self.categories()];
        let value = self.eval_into(raw.as_slice(), &mut grad);
        let finite = value.is_finite();
        PosteriorEval { value, grad, finite }
    }
}

impl LogDensity for PosteriorTarget {
    fn dim(&self) -> usize {
        self.categories()
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval_into(x, grad)
    }
}

/// Log-posterior at `raw` with its gradient.
pub fn log_posterior(
    data: &TrialData,
    raw: &UnconstrainedState,
    beta_spec: &BetaPriorSpec,
    cut_spec: &CutpointPriorSpec,
) -> Result<PosteriorEval> {
    if raw.as_slice().len() != data.categories() {
        return Err(Error::InvalidParameter(format!(
            "state has {} coordinates, model needs {}",
            raw.as_slice().len(),
            data.categories()
        )));
    }
    Ok(PosteriorTarget::new(data.clone(), *beta_spec, *cut_spec)?.evaluate(raw))
}
