//! Proportional-odds (cumulative-logit) model for a two-arm trial.
//!
//! Orientation: cut-points model `logit P(Y >= j) = alpha_j + beta * x` for
//! `j = 2..J`. The cut-point vector is therefore strictly *decreasing*, higher
//! categories are the favourable ones, and `beta > 0` favours the intervention.
//! Software built on `P(Y <= j)` uses the negated, increasing convention.
//!
//! `alpha_1 = +inf` and `alpha_{J+1} = -inf` are implicit boundary conventions
//! and are never stored.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log1mexp, log_sigmoid, logit, sigmoid};

const SIMPLEX_TOL: f64 = 1e-12;

/// Treatment indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Intervention,
}

impl Arm {
    #[inline]
    pub fn indicator(self) -> f64 {
        match self {
            Arm::Control => 0.0,
            Arm::Intervention => 1.0,
        }
    }

    #[inline]
    pub fn column(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Intervention => 1,
        }
    }

    pub fn from_indicator(x: u8) -> Result<Self> {
        match x {
            0 => Ok(Arm::Control),
            1 => Ok(Arm::Intervention),
            other => Err(Error::InvalidData(format!("arm indicator must be 0 or 1, got {other}"))),
        }
    }
}

/// Probabilities of the `J` ordinal categories, lowest category first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryProbs(Vec<f64>);

impl CategoryProbs {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidProbs(format!("need at least 2 categories, got {}", probs.len())));
        }
        if let Some((j, p)) = probs.iter().enumerate().find(|(_, p)| !(**p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidProbs(format!("category {} has probability {p}", j + 1)));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidProbs(format!("probabilities sum to {total}")));
        }
        Ok(Self(probs))
    }

    /// Uniform distribution over `j` categories.
    pub fn uniform(j: usize) -> Result<Self> {
        Self::new(vec![1.0 / j as f64; j])
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn categories(&self) -> usize {
        self.0.len()
    }

    /// `P(Y >= j)` for `j = 2..J`.
    pub fn exceedance(&self) -> Vec<f64> {
        let j = self.0.len();
        let mut out = vec![0.0; j - 1];
        let mut tail = 0.0;
        for k in (1..j).rev() {
            tail += self.0[k];
            out[k - 1] = tail;
        }
        out
    }
}

/// Cumulative log-odds `alpha_2..alpha_J`, strictly decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cutpoints(Vec<f64>);

impl Cutpoints {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidCutpoints("need at least one cut-point".into()));
        }
        if let Some(a) = alpha.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidCutpoints(format!("non-finite cut-point {a}")));
        }
        if let Some(k) = (1..alpha.len()).find(|&k| !(alpha[k - 1] > alpha[k])) {
            return Err(Error::InvalidCutpoints(format!(
                "cut-points must be strictly decreasing: alpha[{}]={} <= alpha[{}]={}",
                k - 1,
                alpha[k - 1],
                k,
                alpha[k]
            )));
        }
        Ok(Self(alpha))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Number of outcome categories `J` (one more than the number of cut-points).
    pub fn categories(&self) -> usize {
        self.0.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: Cutpoints,
    pub beta: f64,
}

impl ModelParams {
    pub fn new(alpha: Cutpoints, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be finite, got {beta}")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn categories(&self) -> usize {
        self.alpha.categories()
    }
}

/// Per-arm category counts; `counts[j] = [control, intervention]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialData {
    counts: Vec<[u64; 2]>,
}

impl TrialData {
    pub fn empty(categories: usize) -> Self {
        Self { counts: vec![[0, 0]; categories] }
    }

    pub fn from_counts(counts: Vec<[u64; 2]>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidData(format!("need at least 2 categories, got {}", counts.len())));
        }
        Ok(Self { counts })
    }

    /// Tabulates `(arm, category)` observations; categories are 1-based.
    pub fn from_observations<I>(categories: usize, obs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Arm, usize)>,
    {
        let mut data = Self::empty(categories);
        for (arm, cat) in obs {
            data.record(arm, cat)?;
        }
        Ok(data)
    }

    /// Adds one participant in 1-based category `category`.
    pub fn record(&mut self, arm: Arm, category: usize) -> Result<()> {
        if category == 0 || category > self.counts.len() {
            return Err(Error::InvalidData(format!(
                "category {category} outside 1..={}",
                self.counts.len()
            )));
        }
        self.counts[category - 1][arm.column()] += 1;
        Ok(())
    }

    pub fn counts(&self) -> &[[u64; 2]] {
        &self.counts
    }

    pub fn categories(&self) -> usize {
        self.counts.len()
    }

    pub fn arm_total(&self, arm: Arm) -> u64 {
        self.counts.iter().map(|c| c[arm.column()]).sum()
    }

    pub fn n_total(&self) -> u64 {
        self.arm_total(Arm::Control) + self.arm_total(Arm::Intervention)
    }

    /// Variance of the (centred) treatment indicator, `p (1 - p)`.
    pub fn indicator_variance(&self) -> Option<f64> {
        let n = self.n_total();
        if n == 0 {
            return None;
        }
        let p = self.arm_total(Arm::Intervention) as f64 / n as f64;
        Some(p * (1.0 - p))
    }

    pub fn occupied_categories(&self) -> usize {
        self.counts.iter().filter(|c| c[0] + c[1] > 0).count()
    }

    pub fn scaled(&self, factor: u64) -> Self {
        Self { counts: self.counts.iter().map(|c| [c[0] * factor, c[1] * factor]).collect() }
    }
}

/// Log-probability of category `c` (0-based) given the linear predictors at the
/// cut above (`upper = alpha_c + beta x`) and below it.
#[inline]
fn log_category_prob(upper: Option<f64>, lower: Option<f64>) -> f64 {
    match (upper, lower) {
        (None, Some(b)) => log_sigmoid(-b),
        (Some(a), None) => log_sigmoid(a),
        (Some(a), Some(b)) => log_sigmoid(a) + log_sigmoid(-b) + log1mexp(b - a),
        (None, None) => 0.0,
    }
}

/// Partial derivatives of `log_category_prob` with respect to `(upper, lower)`.
#[inline]
fn log_category_prob_grad(upper: Option<f64>, lower: Option<f64>) -> (f64, f64) {
    match (upper, lower) {
        (None, Some(b)) => (0.0, -sigmoid(b)),
        (Some(a), None) => (sigmoid(-a), 0.0),
        (Some(a), Some(b)) => {
            let r = 1.0 / (a - b).exp_m1();
            (sigmoid(-a) + r, -sigmoid(b) - r)
        }
        (None, None) => (0.0, 0.0),
    }
}

#[inline]
fn cut_bounds(alpha: &[f64], shift: f64, c: usize) -> (Option<f64>, Option<f64>) {
    let upper = if c == 0 { None } else { Some(alpha[c - 1] + shift) };
    let lower = alpha.get(c).map(|a| a + shift);
    (upper, lower)
}

/// Log category probabilities for raw cut-points shifted by `shift`.
///
/// No validation: ordering violations show up as NaN or `-inf` entries.
pub(crate) fn log_probs_raw(alpha: &[f64], shift: f64) -> Vec<f64> {
    (0..=alpha.len())
        .map(|c| {
            let (u, l) = cut_bounds(alpha, shift, c);
            log_category_prob(u, l)
        })
        .collect()
}

/// `sum_c log pi_c` over every category of one arm, with its gradient in the
/// raw cut-points accumulated into `grad` (scaled by `weight`).
pub(crate) fn sum_log_probs_and_grad(alpha: &[f64], shift: f64, weight: f64, grad: &mut [f64]) -> f64 {
    let nb = alpha.len();
    let mut total = 0.0;
    for c in 0..=nb {
        let (u, l) = cut_bounds(alpha, shift, c);
        total += log_category_prob(u, l);
        let (du, dl) = log_category_prob_grad(u, l);
        if c > 0 {
            grad[c - 1] += weight * du;
        }
        if c < nb {
            grad[c] += weight * dl;
        }
    }
    total
}

/// Category probabilities in arm `arm`.
pub fn probs_from_params(params: &ModelParams, arm: Arm) -> CategoryProbs {
    let shift = params.beta * arm.indicator();
    let probs = log_probs_raw(params.alpha.as_slice(), shift).into_iter().map(f64::exp).collect();
    CategoryProbs::from_vec_unchecked(probs)
}

/// Inverse of the control-arm map: `alpha[k] = logit P(Y >= k + 2)`.
pub fn cutpoints_from_probs(probs: &CategoryProbs) -> Result<Cutpoints> {
    let p = probs.as_slice();
    if let Some(j) = p.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidProbs(format!("category {} has non-positive probability", j + 1)));
    }
    // Accumulate the smaller of the head and tail sums to keep precision in the
    // far tails.
    let n = p.len();
    let mut tails = vec![0.0; n - 1];
    let mut heads = vec![0.0; n - 1];
    let mut acc = 0.0;
    for k in (1..n).rev() {
        acc += p[k];
        tails[k - 1] = acc;
    }
    acc = 0.0;
    for k in 0..n - 1 {
        acc += p[k];
        heads[k] = acc;
    }
    let alpha = tails
        .iter()
        .zip(&heads)
        .map(|(&t, &h)| if t < 0.5 { logit(t) } else { (t / h).ln() })
        .collect();
    Cutpoints::new(alpha)
}

/// Multinomial log-likelihood of the count table.
pub fn log_likelihood(data: &TrialData, params: &ModelParams) -> f64 {
    log_likelihood_raw(data, params.alpha.as_slice(), params.beta)
}

pub(crate) fn log_likelihood_raw(data: &TrialData, alpha: &[f64], beta: f64) -> f64 {
    let mut total = 0.0;
    for arm in [Arm::Control, Arm::Intervention] {
        let shift = beta * arm.indicator();
        for (c, row) in data.counts.iter().enumerate() {
            let n = row[arm.column()];
            if n == 0 {
                continue;
            }
            let (u, l) = cut_bounds(alpha, shift, c);
            total += n as f64 * log_category_prob(u, l);
        }
    }
    total
}

/// Gradient of [`log_likelihood`]: `J - 1` cut-point partials followed by `d/d beta`.
pub fn grad_log_likelihood(data: &TrialData, params: &ModelParams) -> Vec<f64> {
    let mut grad = vec![0.0; params.categories()];
    log_likelihood_and_grad_raw(data, params.alpha.as_slice(), params.beta, &mut grad);
    grad
}

/// Logistic quantities at one linear predictor `s`, sharing a single
/// exponential: `(ln sigma(s), ln sigma(-s), sigma(s), sigma(-s))`.
#[inline]
pub(crate) fn logistic_parts(s: f64) -> (f64, f64, f64, f64) {
    let e = (-s.abs()).exp();
    let l = e.ln_1p();
    let inv = 1.0 / (1.0 + e);
    if s >= 0.0 {
        (-l, -s - l, inv, e * inv)
    } else {
        (s - l, -l, e * inv, inv)
    }
}

/// `(ln(1 - exp(-d)), 1 / expm1(d))` for a gap `d > 0` between adjacent
/// linear predictors.
#[inline]
fn gap_parts(d: f64) -> (f64, f64) {
    if d < LN_2 {
        let em = (-d).exp_m1();
        ((-em).ln(), -(1.0 + em) / em)
    } else {
        let q = (-d).exp();
        ((-q).ln_1p(), q / (1.0 - q))
    }
}

/// Value and gradient in one pass. `grad` must have length `alpha.len() + 1`
/// and is overwritten.
pub(crate) fn log_likelihood_and_grad_raw(
    data: &TrialData,
    alpha: &[f64],
    beta: f64,
    grad: &mut [f64],
) -> f64 {
    debug_assert_eq!(grad.len(), alpha.len() + 1);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let nb = alpha.len();
    let mut total = 0.0;
    for arm in [Arm::Control, Arm::Intervention] {
        let col = arm.column();
        if data.counts.iter().all(|row| row[col] == 0) {
            continue;
        }
        let x = arm.indicator();
        let shift = beta * x;
        let mut d_beta = 0.0;
        // Parts at the cut above the current category.
        let mut upper: Option<(f64, f64, f64)> = None;
        for (c, row) in data.counts.iter().enumerate() {
            let n = row[col];
            let lower = if c < nb && (n > 0 || data.counts[c + 1][col] > 0) {
                let s = alpha[c] + shift;
                let (ls_pos, ls_neg, sig_pos, sig_neg) = logistic_parts(s);
                Some((s, ls_pos, ls_neg, sig_pos, sig_neg))
            } else {
                None
            };
            if n > 0 {
                let n = n as f64;
                let (lp, du, dl) = match (upper, lower) {
                    (None, Some((_, _, ls_neg, sig_pos, _))) => (ls_neg, 0.0, -sig_pos),
                    (Some((_, ls_pos, sig_neg)), None) => (ls_pos, sig_neg, 0.0),
                    (Some((a, ls_pos, sig_neg)), Some((b, _, ls_neg, sig_pos, _))) => {
                        let (log_gap, r) = gap_parts(a - b);
                        (ls_pos + ls_neg + log_gap, sig_neg + r, -sig_pos - r)
                    }
                    (None, None) => (0.0, 0.0, 0.0),
                };
                total += n * lp;
                if c > 0 {
                    grad[c - 1] += n * du;
                }
                if c < nb {
                    grad[c] += n * dl;
                }
                d_beta += n * (du + dl);
            }
            upper = lower.map(|(s, ls_pos, _, _, sig_neg)| (s, ls_pos, sig_neg));
        }
        grad[nb] += x * d_beta;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(alpha: &[f64], beta: f64) -> ModelParams {
        ModelParams::new(Cutpoints::new(alpha.to_vec()).unwrap(), beta).unwrap()
    }

    #[test]
    fn three_category_probs() {
        let p = probs_from_params(&params(&[1.0, -1.0], 0.0), Arm::Control);
        let expect = [0.2689414, 0.4621172, 0.2689414];
        for (a, b) in p.as_slice().iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-7);
        }
    }

    #[test]
    fn odds_shift_by_one_and_a_half() {
        let l3 = 3f64.ln();
        let p = probs_from_params(&params(&[l3, 0.0, -l3], 1.5f64.ln()), Arm::Intervention);
        let expect = [2.0 / 11.0, 0.2181818, 4.0 / 15.0, 1.0 / 3.0];
        for (a, b) in p.as_slice().iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-7);
        }
        // cumulative probabilities 9/11, 3/5, 1/3
        let exc = p.exceedance();
        assert_abs_diff_eq!(exc[0], 9.0 / 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(exc[1], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(exc[2], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn beta_ignored_in_control_arm() {
        let a = probs_from_params(&params(&[0.3, -0.2, -2.0], 4.0), Arm::Control);
        let b = probs_from_params(&params(&[0.3, -0.2, -2.0], 0.0), Arm::Control);
        assert_eq!(a, b);
    }

    #[test]
    fn cutpoints_from_uniform_and_binary() {
        let a = cutpoints_from_probs(&CategoryProbs::uniform(4).unwrap()).unwrap();
        assert_abs_diff_eq!(a.as_slice()[0], 1.0986123, epsilon = 1e-7);
        assert_abs_diff_eq!(a.as_slice()[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.as_slice()[2], -1.0986123, epsilon = 1e-7);
        let b = cutpoints_from_probs(&CategoryProbs::new(vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(b.as_slice(), &[0.0]);
    }

    #[test]
    fn cutpoints_round_trip_from_probs() {
        let p = probs_from_params(&params(&[1.0, -1.0], 0.0), Arm::Control);
        let a = cutpoints_from_probs(&p).unwrap();
        assert_abs_diff_eq!(a.as_slice()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.as_slice()[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(CategoryProbs::new(vec![1.0]).is_err());
        assert!(CategoryProbs::new(vec![0.0, 1.0]).is_err());
        assert!(CategoryProbs::new(vec![0.5, 0.6]).is_err());
        assert!(Cutpoints::new(vec![0.0, 0.0]).is_err());
        assert!(Cutpoints::new(vec![-1.0, 1.0]).is_err());
        assert!(Cutpoints::new(vec![f64::INFINITY]).is_err());
        assert!(ModelParams::new(Cutpoints::new(vec![0.0]).unwrap(), f64::NAN).is_err());
        assert!(TrialData::empty(3).record(Arm::Control, 4).is_err());
        assert!(TrialData::empty(3).record(Arm::Control, 0).is_err());
    }

    #[test]
    fn likelihood_examples() {
        let p = params(&[1.0, -1.0], 0.7);
        assert_eq!(log_likelihood(&TrialData::empty(3), &p), 0.0);
        let one = TrialData::from_observations(3, [(Arm::Control, 2)]).unwrap();
        let middle = 1.0 / (1.0 + (-1.0f64).exp()) - 1.0 / (1.0 + 1.0f64.exp());
        assert_abs_diff_eq!(middle, 0.4621172, epsilon = 1e-7);
        assert_abs_diff_eq!(log_likelihood(&one, &p), middle.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(log_likelihood(&one, &p), -0.7719368, epsilon = 1e-7);
        let data = TrialData::from_counts(vec![[3, 1], [0, 4], [2, 7]]).unwrap();
        assert_abs_diff_eq!(
            log_likelihood(&data.scaled(2), &p),
            2.0 * log_likelihood(&data, &p),
            epsilon = 1e-12
        );
    }

    #[test]
    fn gradient_edge_cases() {
        let p = params(&[0.4, -0.6, -1.1], 0.9);
        assert!(grad_log_likelihood(&TrialData::empty(4), &p).iter().all(|g| *g == 0.0));
        let control_only = TrialData::from_counts(vec![[3, 0], [1, 0], [5, 0], [2, 0]]).unwrap();
        assert_eq!(grad_log_likelihood(&control_only, &p)[3], 0.0);
    }

    #[test]
    fn score_is_small_at_the_truth() {
        // Expected counts at the generating parameters: the score has mean zero.
        let p = params(&[1.2, 0.1, -0.8, -2.0], 0.5);
        let scale = 1e6;
        let c0 = probs_from_params(&p, Arm::Control);
        let c1 = probs_from_params(&p, Arm::Intervention);
        let counts = c0
            .as_slice()
            .iter()
            .zip(c1.as_slice())
            .map(|(a, b)| [(a * scale).round() as u64, (b * scale).round() as u64])
            .collect();
        let data = TrialData::from_counts(counts).unwrap();
        let g = grad_log_likelihood(&data, &p);
        for gi in g {
            assert!(gi.abs() < 1e-4 * scale, "score component {gi}");
        }
    }

    #[test]
    fn indicator_variance_balanced() {
        let d = TrialData::from_counts(vec![[5, 5], [5, 5]]).unwrap();
        assert_eq!(d.indicator_variance(), Some(0.25));
        assert_eq!(TrialData::empty(2).indicator_variance(), None);
    }

    fn arb_params(max_j: usize) -> impl Strategy<Value = ModelParams> {
        (2..=max_j)
            .prop_flat_map(|j| {
                (
                    -3.0..3.0f64,
                    proptest::collection::vec(0.05..2.0f64, j - 2),
                    -3.0..3.0f64,
                )
            })
            .prop_map(|(start, gaps, beta)| {
                let mut alpha = vec![start];
                for g in gaps {
                    let last = *alpha.last().unwrap();
                    alpha.push(last - g);
                }
                params(&alpha, beta)
            })
    }

    fn central_difference(data: &TrialData, p: &ModelParams, i: usize) -> f64 {
        let h = 1e-5;
        let mut a = p.alpha.as_slice().to_vec();
        let mut b = p.beta;
        let eval = |a: &[f64], b: f64| log_likelihood_raw(data, a, b);
        if i < a.len() {
            a[i] += h;
            let up = eval(&a, b);
            a[i] -= 2.0 * h;
            let down = eval(&a, b);
            (up - down) / (2.0 * h)
        } else {
            b += h;
            let up = eval(&a, b);
            b -= 2.0 * h;
            let down = eval(&a, b);
            (up - down) / (2.0 * h)
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn cutpoint_round_trip(p in arb_params(12)) {
            let back = cutpoints_from_probs(&probs_from_params(&p, Arm::Control)).unwrap();
            for (a, b) in back.as_slice().iter().zip(p.alpha.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }

        #[test]
        fn probabilities_form_a_simplex(
            start in -30.0..30.0f64,
            gaps in proptest::collection::vec(1e-3..10.0f64, 1..29),
            beta in -10.0..10.0f64,
        ) {
            let mut alpha = vec![start];
            for g in gaps {
                let next = alpha.last().unwrap() - g;
                if next < -30.0 { break; }
                alpha.push(next);
            }
            let p = params(&alpha, beta);
            for arm in [Arm::Control, Arm::Intervention] {
                let probs = probs_from_params(&p, arm);
                let s: f64 = probs.as_slice().iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert!(probs.as_slice().iter().all(|&v| v > 0.0 && v <= 1.0));
                // An entry can only round to 1 when the rest are below machine epsilon.
                for (j, &v) in probs.as_slice().iter().enumerate() {
                    if v == 1.0 {
                        let rest: f64 = probs.as_slice().iter().enumerate().filter(|(k, _)| *k != j).map(|(_, x)| x).sum();
                        prop_assert!(rest < f64::EPSILON);
                    }
                }
            }
        }

        #[test]
        fn exceedance_increases_with_beta(p in arb_params(8), db in 0.01..2.0f64) {
            let lo = probs_from_params(&p, Arm::Intervention).exceedance();
            let hi = probs_from_params(&params(p.alpha.as_slice(), p.beta + db), Arm::Intervention).exceedance();
            for (a, b) in lo.iter().zip(&hi) {
                prop_assert!(b > a);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for &j in &[2usize, 4, 10, 30] {
            for _ in 0..100 {
                let mut alpha = vec![rng.random_range(-2.0..2.0)];
                for _ in 0..j - 2 {
                    let last = *alpha.last().unwrap();
                    alpha.push(last - rng.random_range(0.05..0.6));
                }
                let p = params(&alpha, rng.random_range(-2.0..2.0));
                let counts = (0..j).map(|_| [rng.random_range(0..40), rng.random_range(0..40)]).collect();
                let data = TrialData::from_counts(counts).unwrap();
                let g = grad_log_likelihood(&data, &p);
                for (i, gi) in g.iter().enumerate() {
                    let fd = central_difference(&data, &p, i);
                    let rel = (gi - fd).abs() / fd.abs().max(1.0);
                    assert!(rel < 1e-6, "J={j} i={i} analytic={gi} fd={fd}");
                }
            }
        }
    }
}
