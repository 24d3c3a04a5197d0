//! Rank-normalised split R-hat and bulk/tail effective sample sizes.
//!
//! `None` marks an undefined diagnostic (constant draws).

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::nuts::ChainSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rhat: Vec<Option<f64>>,
    pub ess_bulk: Vec<Option<f64>>,
    pub ess_tail: Vec<Option<f64>>,
    pub divergences_total: usize,
}

impl Diagnostics {
    pub fn compute(set: &ChainSet) -> Self {
        let mut rhat = Vec::with_capacity(set.dim);
        let mut bulk = Vec::with_capacity(set.dim);
        let mut tail = Vec::with_capacity(set.dim);
        for p in 0..set.dim {
            let chains = set.param_chains(p);
            let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
            rhat.push(split_rhat(&refs));
            bulk.push(ess_bulk(&refs));
            tail.push(ess_tail(&refs));
        }
        Self { rhat, ess_bulk: bulk, ess_tail: tail, divergences_total: set.divergences_total() }
    }

    /// Largest defined R-hat across parameters.
    pub fn max_rhat(&self) -> Option<f64> {
        self.rhat.iter().flatten().copied().reduce(f64::max)
    }

    pub fn min_ess_bulk(&self) -> Option<f64> {
        self.ess_bulk.iter().flatten().copied().reduce(f64::min)
    }

    pub fn min_ess_tail(&self) -> Option<f64> {
        self.ess_tail.iter().flatten().copied().reduce(f64::min)
    }
}

fn split_chains(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        // An odd middle draw is dropped so both halves have equal length.
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Normal scores of the pooled ranks (average ranks for ties), Blom offsets.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = chains.iter().map(Vec::len).sum();
    let mut idx: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, &x)| (x, c, i)))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0));
    let std_normal = Normal::standard();
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && idx[end].0 == idx[start].0 {
            end += 1;
        }
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let z = std_normal.inverse_cdf((avg_rank - 0.375) / (total as f64 + 0.25));
        for &(_, c, i) in &idx[start..end] {
            out[c][i] = z;
        }
        start = end;
    }
    out
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Classic potential scale reduction on already-split chains.
fn rhat_basic(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let within = chains.iter().map(|c| sample_var(c)).sum::<f64>() / m;
    let between = n * sample_var(&means);
    if !(within > 0.0) || !within.is_finite() {
        return None;
    }
    let var_plus = (n - 1.0) / n * within + between / n;
    Some((var_plus / within).sqrt())
}

fn is_constant(chains: &[&[f64]]) -> bool {
    let first = chains.iter().find_map(|c| c.first().copied());
    match first {
        None => true,
        Some(f) => chains.iter().all(|c| c.iter().all(|&x| x == f)),
    }
}

fn has_enough_draws(chains: &[&[f64]]) -> bool {
    !chains.is_empty() && chains.iter().all(|c| c.len() >= 4) && chains.windows(2).all(|w| w[0].len() == w[1].len())
}

/// Rank-normalised split R-hat: the larger of the bulk value and the value
/// for draws folded about their median.
pub fn split_rhat(chains: &[&[f64]]) -> Option<f64> {
    if !has_enough_draws(chains) || is_constant(chains) {
        return None;
    }
    let split = split_chains(chains);
    let bulk = rhat_basic(&rank_normalize(&split))?;
    let pooled: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let med = quantile(&pooled, 0.5);
    let folded: Vec<Vec<f64>> = split.iter().map(|c| c.iter().map(|x| (x - med).abs()).collect()).collect();
    let tail = rhat_basic(&rank_normalize(&folded)).unwrap_or(bulk);
    // Values below one carry no information beyond "no detectable disagreement".
    Some(bulk.max(tail).max(1.0))
}

/// Autocovariance at lags `0..n` with the biased `1/n` normalisation.
fn autocovariance(x: &[f64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let fft = planner.plan_fft_forward(size);
    let ifft = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - m, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    fft.process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    ifft.process(&mut buf);
    buf[..n].iter().map(|c| c.re / size as f64 / n as f64).collect()
}

/// ESS of already-split chains from the multi-chain autocorrelation estimate,
/// truncated with Geyer's initial monotone positive sequence of paired sums.
fn ess_basic(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len();
    let n = chains[0].len();
    if n < 4 {
        return None;
    }
    let mut planner = FftPlanner::new();
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(c, &mut planner)).collect();
    let acov_mean = |t: usize| acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let nf = n as f64;
    let mean_var = acov_mean(0) * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += sample_var(&means);
    }
    if !(var_plus > 0.0) || !var_plus.is_finite() {
        return None;
    }

    let mut rho = vec![0.0; n];
    let mut t = 0;
    let mut rho_even = 1.0;
    rho[0] = rho_even;
    let mut rho_odd = 1.0 - (mean_var - acov_mean(1)) / var_plus;
    rho[1] = rho_odd;
    while t + 5 < n && rho_even + rho_odd > 0.0 {
        t += 2;
        rho_even = 1.0 - (mean_var - acov_mean(t)) / var_plus;
        rho_odd = 1.0 - (mean_var - acov_mean(t + 1)) / var_plus;
        if rho_even + rho_odd >= 0.0 {
            rho[t] = rho_even;
            rho[t + 1] = rho_odd;
        }
    }
    let max_t = t;
    if rho_even > 0.0 {
        rho[max_t] = rho_even;
    }
    // Initial monotone sequence.
    let mut t = 0;
    while t + 4 <= max_t {
        t += 2;
        if rho[t] + rho[t + 1] > rho[t - 2] + rho[t - 1] {
            rho[t] = (rho[t - 2] + rho[t - 1]) / 2.0;
            rho[t + 1] = rho[t];
        }
    }
    let total = (m * n) as f64;
    let tau = (-1.0 + 2.0 * rho[..max_t].iter().sum::<f64>() + rho[max_t]).max(1.0 / total.log10());
    Some(total / tau)
}

/// Bulk effective sample size (rank-normalised split chains).
pub fn ess_bulk(chains: &[&[f64]]) -> Option<f64> {
    if !has_enough_draws(chains) || is_constant(chains) {
        return None;
    }
    ess_basic(&rank_normalize(&split_chains(chains)))
}

/// Tail effective sample size: the smaller ESS of the 5% and 95% quantile
/// indicators.
pub fn ess_tail(chains: &[&[f64]]) -> Option<f64> {
    if !has_enough_draws(chains) || is_constant(chains) {
        return None;
    }
    let pooled: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let split = split_chains(chains);
    let mut best: Option<f64> = None;
    for prob in [0.05, 0.95] {
        let q = quantile(&pooled, prob);
        let ind: Vec<Vec<f64>> =
            split.iter().map(|c| c.iter().map(|&x| if x <= q { 1.0 } else { 0.0 }).collect()).collect();
        let refs: Vec<&[f64]> = ind.iter().map(Vec::as_slice).collect();
        if is_constant(&refs) {
            return None;
        }
        let e = ess_basic(&ind)?;
        best = Some(best.map_or(e, |b: f64| b.min(e)));
    }
    best
}

/// Sample quantile with linear interpolation between order statistics.
pub(crate) fn quantile(x: &[f64], prob: f64) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, prob)
}

pub(crate) fn quantile_sorted(v: &[f64], prob: f64) -> f64 {
    let h = (v.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
