//! Fixed and adaptive trial designs: fitting, escalation and decision rules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dgm::{simulate_participants, Scenario};
use crate::error::{Error, Result};
use crate::ordmodel::TrialData;
use crate::priors::{cutpoint_values, BetaPriorSpec, CutpointPriorSpec, PosteriorTarget};
use crate::rng::{derive_seed, label_hash, rng_from_seed};
use crate::sampler::{escalate_on_divergence, nuts_run, Diagnostics, Escalation, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Fixed,
    Adaptive,
}

impl DesignKind {
    pub const ALL: [DesignKind; 2] = [DesignKind::Fixed, DesignKind::Adaptive];

    pub fn as_str(self) -> &'static str {
        match self {
            DesignKind::Fixed => "fixed",
            DesignKind::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DesignKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown design `{s}`")))
    }
}

/// Decision thresholds shared by every scenario of a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSpec {
    pub interim_fraction: f64,
    pub interim_superiority_threshold: f64,
    pub final_superiority_threshold: f64,
}

impl Default for DesignSpec {
    fn default() -> Self {
        Self { interim_fraction: 0.5, interim_superiority_threshold: 0.99, final_superiority_threshold: 0.95 }
    }
}

impl DesignSpec {
    /// Thresholds may equal 1, which switches the corresponding look off.
    pub fn validate(&self) -> Result<()> {
        if !(self.interim_fraction > 0.0 && self.interim_fraction < 1.0) {
            return Err(Error::Config(format!("interim_fraction {} outside (0, 1)", self.interim_fraction)));
        }
        for (name, t) in [
            ("interim_superiority_threshold", self.interim_superiority_threshold),
            ("final_superiority_threshold", self.final_superiority_threshold),
        ] {
            if !(t > 0.5 && t <= 1.0) {
                return Err(Error::Config(format!("{name} {t} outside (0.5, 1]")));
            }
        }
        Ok(())
    }

    pub fn interim_n(&self, n_obs: usize) -> usize {
        ((self.interim_fraction * n_obs as f64).ceil() as usize).clamp(1, n_obs)
    }
}

/// Posterior summary of the treatment effect from one analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorFit {
    pub beta_median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_superior: f64,
    pub diagnostics: Diagnostics,
    /// Divergences remained after the last rung of the escalation ladder.
    pub divergent_final: bool,
    /// Number of re-runs triggered by divergences.
    pub escalations: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub stopped_early: bool,
    pub declared_superior: bool,
    /// Sample size at the decisive analysis.
    pub analysis_n: usize,
    pub beta_median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_superior: f64,
    pub diagnostics: Diagnostics,
    pub divergent_final: bool,
    /// Escalation re-runs summed over every analysis of the replicate.
    pub escalations: usize,
}

/// Fraction of draws strictly above zero.
pub fn posterior_superiority(beta_draws: &[f64]) -> f64 {
    if beta_draws.is_empty() {
        return f64::NAN;
    }
    beta_draws.iter().filter(|&&b| b > 0.0).count() as f64 / beta_draws.len() as f64
}

fn quantile_sorted(v: &[f64], prob: f64) -> f64 {
    let h = (v.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Fits the model to `data`, re-running with stricter sampler settings while
/// divergent transitions remain. Attempt `k` uses a seed derived from
/// `config.seed` and `k`.
pub fn fit_posterior(
    data: &TrialData,
    beta_spec: &BetaPriorSpec,
    cut_spec: &CutpointPriorSpec,
    config: &SamplerConfig,
) -> Result<PosteriorFit> {
    let target = PosteriorTarget::new(data.clone(), *beta_spec, *cut_spec)?;
    let j = data.categories();
    let mut cfg = *config;
    let mut attempt = 0usize;
    loop {
        let run_cfg = SamplerConfig { seed: derive_seed(&[config.seed, attempt as u64]), ..cfg };
        let raw = nuts_run(&target, None, &run_cfg)?;
        let next = escalate_on_divergence(&cfg, &raw);
        if let Escalation::Retry(stricter) = next {
            cfg = stricter;
            attempt += 1;
            continue;
        }
        let constrained = raw.map_draws(j, |row| {
            let mut out = cutpoint_values(&row[..j - 1], cut_spec);
            out.push(row[j - 1]);
            Ok(out)
        })?;
        let diagnostics = constrained.diagnostics();
        let mut beta = constrained.pooled(j - 1);
        let p_superior = posterior_superiority(&beta);
        beta.sort_by(f64::total_cmp);
        return Ok(PosteriorFit {
            beta_median: quantile_sorted(&beta, 0.5),
            ci_low: quantile_sorted(&beta, 0.025),
            ci_high: quantile_sorted(&beta, 0.975),
            p_superior,
            diagnostics,
            divergent_final: next == Escalation::DivergentFinal,
            escalations: attempt,
            target_accept: cfg.target_accept,
            max_tree_depth: cfg.max_tree_depth,
        });
    }
}

/// Seeds for one replicate: the data stream and the sampler stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicateSeeds {
    pub data: u64,
    pub sampler: u64,
}

impl ReplicateSeeds {
    /// Data depend on the scenario and replicate only, so every prior
    /// analyses the same simulated trials; the sampler stream also depends on
    /// the prior pair.
    pub fn derive(master_seed: u64, scenario_id: usize, prior_label: &str, replicate: u64) -> Self {
        Self {
            data: derive_seed(&[master_seed, label_hash("data"), scenario_id as u64, replicate]),
            sampler: derive_seed(&[
                master_seed,
                label_hash("sampler"),
                scenario_id as u64,
                label_hash(prior_label),
                replicate,
            ]),
        }
    }

    fn analysis_seed(&self, label: &str) -> u64 {
        derive_seed(&[self.sampler, label_hash(label)])
    }
}

fn into_result(fit: PosteriorFit, stopped_early: bool, declared_superior: bool, analysis_n: usize, escalations: usize) -> ReplicateResult {
    ReplicateResult {
        stopped_early,
        declared_superior,
        analysis_n,
        beta_median: fit.beta_median,
        ci_low: fit.ci_low,
        ci_high: fit.ci_high,
        p_superior: fit.p_superior,
        diagnostics: fit.diagnostics,
        divergent_final: fit.divergent_final,
        escalations,
    }
}

/// Simulates and analyses one trial.
///
/// All `n_obs` participants are generated up front from the data stream; an
/// adaptive interim analyses the first `ceil(interim_fraction * n_obs)`. The
/// final analysis of either design uses the sampler stream labelled `final`,
/// so a fixed design reproduces an adaptive trial whose interim never stops.
pub fn run_replicate(
    scn: &Scenario,
    beta_spec: &BetaPriorSpec,
    cut_spec: &CutpointPriorSpec,
    sampler: &SamplerConfig,
    design: &DesignSpec,
    seeds: ReplicateSeeds,
) -> Result<ReplicateResult> {
    design.validate()?;
    let participants = simulate_participants(scn, scn.n_obs, &mut rng_from_seed(seeds.data));
    let fit_first = |n: usize, label: &str| -> Result<PosteriorFit> {
        let data = TrialData::from_observations(scn.categories, participants[..n].iter().copied())?;
        let cfg = SamplerConfig { seed: seeds.analysis_seed(label), ..*sampler };
        fit_posterior(&data, beta_spec, cut_spec, &cfg)
    };
    let mut escalations = 0;
    if scn.design == crate::design::DesignKind::Adaptive {
        let n_interim = design.interim_n(scn.n_obs);
        let interim = fit_first(n_interim, "interim")?;
        escalations += interim.escalations;
        if interim.p_superior > design.interim_superiority_threshold {
            return Ok(into_result(interim, true, true, n_interim, escalations));
        }
    }
    let fin = fit_first(scn.n_obs, "final")?;
    escalations += fin.escalations;
    let superior = fin.p_superior > design.final_superiority_threshold;
    Ok(into_result(fin, false, superior, scn.n_obs, escalations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgm::ControlShape;
    use crate::priors::{BetaPriorId, CutpointPriorId};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn superiority_fraction() {
        assert_eq!(posterior_superiority(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(posterior_superiority(&[-1.0, 1.0]), 0.5);
        assert_eq!(posterior_superiority(&[0.0, 1.0]), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<f64> = (0..20_000).map(|_| rng.sample(StandardNormal)).collect();
        assert!((posterior_superiority(&draws) - 0.5).abs() < 0.01);
    }

    #[test]
    fn spec_validation() {
        assert!(DesignSpec::default().validate().is_ok());
        assert!(DesignSpec { interim_superiority_threshold: 1.0, ..Default::default() }.validate().is_ok());
        assert!(DesignSpec { final_superiority_threshold: 0.5, ..Default::default() }.validate().is_err());
        assert!(DesignSpec { interim_fraction: 1.0, ..Default::default() }.validate().is_err());
        assert_eq!(DesignSpec::default().interim_n(101), 51);
        assert_eq!(DesignSpec::default().interim_n(100), 50);
    }

    fn quick_sampler() -> SamplerConfig {
        SamplerConfig { chains: 2, warmup_iters: 300, sampling_iters: 300, ..Default::default() }
    }

    fn scenario(design: DesignKind, or: f64, n: usize) -> Scenario {
        Scenario::new(0, 4, ControlShape::uniform(), or.ln(), n, design).unwrap()
    }

    #[test]
    fn fixed_equals_adaptive_when_interim_is_disabled() {
        let beta = BetaPriorId::Normal100.spec();
        let cut = CutpointPriorId::Dir1.spec(4);
        let seeds = ReplicateSeeds::derive(9, 0, "normal_100/dir_1", 3);
        let never = DesignSpec { interim_superiority_threshold: 1.0, ..Default::default() };
        let fixed = run_replicate(&scenario(DesignKind::Fixed, 1.5, 120), &beta, &cut, &quick_sampler(), &never, seeds).unwrap();
        let adaptive =
            run_replicate(&scenario(DesignKind::Adaptive, 1.5, 120), &beta, &cut, &quick_sampler(), &never, seeds).unwrap();
        assert_eq!(fixed, adaptive);
        assert!(!adaptive.stopped_early);
        assert_eq!(adaptive.analysis_n, 120);
    }

    #[test]
    fn replicate_invariants() {
        let beta = BetaPriorId::Normal100.spec();
        let cut = CutpointPriorId::Dir1.spec(4);
        let spec = DesignSpec::default();
        for rep in 0..6 {
            let seeds = ReplicateSeeds::derive(1, 0, "p", rep);
            let r = run_replicate(&scenario(DesignKind::Adaptive, 4.0, 100), &beta, &cut, &quick_sampler(), &spec, seeds)
                .unwrap();
            assert!(r.ci_low <= r.beta_median && r.beta_median <= r.ci_high);
            assert!((0.0..=1.0).contains(&r.p_superior));
            assert!(!r.stopped_early || r.declared_superior);
            assert!(r.analysis_n == 50 || r.analysis_n == 100);
            if r.stopped_early {
                assert_eq!(r.analysis_n, 50);
                assert!(r.p_superior > 0.99);
            }
        }
    }

    #[test]
    fn raising_interim_threshold_never_adds_stops() {
        let beta = BetaPriorId::Normal100.spec();
        let cut = CutpointPriorId::Dir1.spec(4);
        for rep in 0..4 {
            let seeds = ReplicateSeeds::derive(2, 0, "p", rep);
            let run = |t: f64| {
                let spec = DesignSpec { interim_superiority_threshold: t, ..Default::default() };
                run_replicate(&scenario(DesignKind::Adaptive, 2.0, 100), &beta, &cut, &quick_sampler(), &spec, seeds)
                    .unwrap()
            };
            let (low, high) = (run(0.9), run(0.999));
            assert!(!high.stopped_early || low.stopped_early);
        }
    }

    #[test]
    fn fit_reports_consistent_summary() {
        let data = TrialData::from_counts(vec![[30, 10], [20, 20], [10, 30]]).unwrap();
        let fit = fit_posterior(
            &data,
            &BetaPriorId::Normal100.spec(),
            &CutpointPriorId::Dir1.spec(3),
            &SamplerConfig { chains: 2, warmup_iters: 500, sampling_iters: 500, seed: 4, ..Default::default() },
        )
        .unwrap();
        assert!(fit.beta_median > 0.5 && fit.p_superior > 0.99);
        assert_eq!(fit.diagnostics.rhat.len(), 3);
        assert_eq!(fit.escalations, 0);
    }
}
