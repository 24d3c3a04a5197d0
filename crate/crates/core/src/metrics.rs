//! Performance measures over simulated replicates, their Monte Carlo
//! standard errors, and the replicate-escalation protocol.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::ReplicateResult;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Bias,
    RelativeBias,
    Coverage,
    Mse,
    MeanPSuperior,
    PropSuperior,
    PropStoppedEarly,
}

impl Measure {
    pub const ALL: [Measure; 7] = [
        Measure::Bias,
        Measure::RelativeBias,
        Measure::Coverage,
        Measure::Mse,
        Measure::MeanPSuperior,
        Measure::PropSuperior,
        Measure::PropStoppedEarly,
    ];

    /// Measures whose MCSE must fall below the target during escalation.
    pub const CONTROLLED: [Measure; 5] =
        [Measure::Bias, Measure::RelativeBias, Measure::Coverage, Measure::Mse, Measure::PropSuperior];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Bias => "bias",
            Measure::RelativeBias => "rel_bias_pct",
            Measure::Coverage => "coverage",
            Measure::Mse => "mse",
            Measure::MeanPSuperior => "mean_p_superior",
            Measure::PropSuperior => "prop_superior",
            Measure::PropStoppedEarly => "prop_stopped_early",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How relative bias on the odds-ratio scale is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelBiasMode {
    /// `100 (mean(exp(median)) - OR) / OR`.
    #[default]
    MeanOfOr,
    /// `100 (exp(mean(median)) - OR) / OR`.
    OrOfMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    pub exclude_divergent: bool,
    pub rel_bias_mode: RelBiasMode,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self { exclude_divergent: false, rel_bias_mode: RelBiasMode::MeanOfOr, n_boot: 1000, seed: 0 }
    }
}

/// MCSE of every measure by both estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McseSet {
    pub closed_form: Vec<(Measure, f64)>,
    /// `None` with fewer than 10 replicates.
    pub jackknife_after_bootstrap: Option<Vec<(Measure, f64)>>,
}

impl McseSet {
    /// The jackknife-after-bootstrap value when available, else closed form.
    pub fn reported(&self, m: Measure) -> f64 {
        let pick = |v: &[(Measure, f64)]| v.iter().find(|(k, _)| *k == m).map(|(_, x)| *x);
        self.jackknife_after_bootstrap
            .as_deref()
            .and_then(pick)
            .or_else(|| pick(&self.closed_form))
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub n_sim_used: usize,
    pub n_divergent_final: usize,
    /// Log-OR units.
    pub bias: f64,
    /// Percent on the odds-ratio scale.
    pub relative_bias_or: f64,
    pub coverage: f64,
    pub mse: f64,
    pub mean_p_superior: f64,
    pub prop_superior: f64,
    pub prop_stopped_early: f64,
    pub mcse: McseSet,
    pub rel_bias_mode: RelBiasMode,
    pub max_rhat: Option<f64>,
    pub min_ess_bulk: Option<f64>,
    pub min_ess_tail: Option<f64>,
}

impl ScenarioSummary {
    pub fn value(&self, m: Measure) -> f64 {
        match m {
            Measure::Bias => self.bias,
            Measure::RelativeBias => self.relative_bias_or,
            Measure::Coverage => self.coverage,
            Measure::Mse => self.mse,
            Measure::MeanPSuperior => self.mean_p_superior,
            Measure::PropSuperior => self.prop_superior,
            Measure::PropStoppedEarly => self.prop_stopped_early,
        }
    }
}

/// Per-replicate contribution whose mean (or a smooth function of the mean)
/// gives the measure.
fn per_replicate(r: &ReplicateResult, m: Measure, truth: f64, mode: RelBiasMode) -> f64 {
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    match m {
        Measure::Bias => r.beta_median - truth,
        Measure::RelativeBias => match mode {
            RelBiasMode::MeanOfOr => r.beta_median.exp(),
            RelBiasMode::OrOfMean => r.beta_median,
        },
        Measure::Coverage => ind(r.ci_low <= truth && truth <= r.ci_high),
        Measure::Mse => (r.beta_median - truth).powi(2),
        Measure::MeanPSuperior => r.p_superior,
        Measure::PropSuperior => ind(r.declared_superior),
        Measure::PropStoppedEarly => ind(r.stopped_early),
    }
}

fn finish(m: Measure, mean: f64, truth: f64, mode: RelBiasMode) -> f64 {
    match m {
        Measure::RelativeBias => {
            let or = truth.exp();
            let est = match mode {
                RelBiasMode::MeanOfOr => mean,
                RelBiasMode::OrOfMean => mean.exp(),
            };
            100.0 * (est - or) / or
        }
        _ => mean,
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Value of measure `m` over `results`.
pub fn measure_value(results: &[ReplicateResult], m: Measure, truth: f64, mode: RelBiasMode) -> f64 {
    let v: Vec<f64> = results.iter().map(|r| per_replicate(r, m, truth, mode)).collect();
    finish(m, mean(&v), truth, mode)
}

/// Closed-form MCSE: `sd/sqrt(n)` of the per-replicate contributions, with the
/// binomial form `sqrt(p(1-p)/n)` for proportions and the delta method for
/// relative bias.
pub fn mcse_closed_form(results: &[ReplicateResult], m: Measure, truth: f64, mode: RelBiasMode) -> f64 {
    let n = results.len() as f64;
    if results.len() < 2 {
        return f64::NAN;
    }
    let v: Vec<f64> = results.iter().map(|r| per_replicate(r, m, truth, mode)).collect();
    match m {
        Measure::Coverage | Measure::PropSuperior | Measure::PropStoppedEarly => {
            let p = mean(&v);
            (p * (1.0 - p) / n).sqrt()
        }
        Measure::RelativeBias => {
            let se = sd(&v) / n.sqrt();
            let scale = match mode {
                RelBiasMode::MeanOfOr => 1.0,
                RelBiasMode::OrOfMean => mean(&v).exp(),
            };
            100.0 * scale * se / truth.exp()
        }
        _ => sd(&v) / n.sqrt(),
    }
}

/// Jackknife-after-bootstrap MCSE.
///
/// `n_boot` resamples are drawn with replacement; for each replicate `i` the
/// measure is averaged over the resamples that omit `i`, and the jackknife
/// variance of those averages is reduced by the Monte Carlo noise term
/// `(e - 1) n v / B`, where `v` is the variance of the bootstrap values.
pub fn mcse_jackknife_after_bootstrap<R: Rng + ?Sized>(
    results: &[ReplicateResult],
    m: Measure,
    truth: f64,
    mode: RelBiasMode,
    n_boot: usize,
    rng: &mut R,
) -> f64 {
    let v: Vec<f64> = results.iter().map(|r| per_replicate(r, m, truth, mode)).collect();
    jab_se(&v, |mean| finish(m, mean, truth, mode), n_boot, rng)
}

fn jab_se<R: Rng + ?Sized>(v: &[f64], stat: impl Fn(f64) -> f64, n_boot: usize, rng: &mut R) -> f64 {
    let n = v.len();
    if n < 2 || n_boot < 2 {
        return f64::NAN;
    }
    if v.iter().all(|&x| x == v[0]) {
        return 0.0;
    }
    let mut omit_sum = vec![0.0; n];
    let mut omit_count = vec![0usize; n];
    let mut counts = vec![0u32; n];
    let mut boot = Vec::with_capacity(n_boot);
    for _ in 0..n_boot {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut total = 0.0;
        for _ in 0..n {
            let i = rng.random_range(0..n);
            counts[i] += 1;
            total += v[i];
        }
        let t = stat(total / n as f64);
        boot.push(t);
        for i in 0..n {
            if counts[i] == 0 {
                omit_sum[i] += t;
                omit_count[i] += 1;
            }
        }
    }
    let loo: Vec<f64> = omit_sum
        .iter()
        .zip(&omit_count)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| s / c as f64)
        .collect();
    if loo.len() < 2 {
        return f64::NAN;
    }
    let k = loo.len() as f64;
    let loo_mean = mean(&loo);
    let v_jack = (k - 1.0) / k * loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>();
    let boot_mean = mean(&boot);
    let boot_var = boot.iter().map(|x| (x - boot_mean).powi(2)).sum::<f64>() / n_boot as f64;
    let corrected = v_jack - (std::f64::consts::E - 1.0) * n as f64 * boot_var / n_boot as f64;
    corrected.max(0.0).sqrt()
}

/// Total order on replicate results, used to make summaries independent of
/// the order replicates are supplied in.
fn canonical_cmp(a: &ReplicateResult, b: &ReplicateResult) -> Ordering {
    a.beta_median
        .total_cmp(&b.beta_median)
        .then(a.ci_low.total_cmp(&b.ci_low))
        .then(a.ci_high.total_cmp(&b.ci_high))
        .then(a.p_superior.total_cmp(&b.p_superior))
        .then(a.stopped_early.cmp(&b.stopped_early))
        .then(a.declared_superior.cmp(&b.declared_superior))
        .then(a.analysis_n.cmp(&b.analysis_n))
        .then(a.divergent_final.cmp(&b.divergent_final))
}

/// Aggregates replicate results into the performance measures.
pub fn summarize(results: &[ReplicateResult], true_log_or: f64, opts: &SummaryOptions) -> Result<ScenarioSummary> {
    let n_divergent_final = results.iter().filter(|r| r.divergent_final).count();
    let mut used: Vec<ReplicateResult> =
        results.iter().filter(|r| !(opts.exclude_divergent && r.divergent_final)).cloned().collect();
    if used.is_empty() {
        return Err(Error::InvalidData("no replicates left to summarise".into()));
    }
    used.sort_by(canonical_cmp);
    let mode = opts.rel_bias_mode;
    let value = |m| measure_value(&used, m, true_log_or, mode);
    let closed_form = Measure::ALL.iter().map(|&m| (m, mcse_closed_form(&used, m, true_log_or, mode))).collect();
    let jackknife_after_bootstrap = (used.len() >= 10).then(|| {
        Measure::ALL
            .iter()
            .enumerate()
            .map(|(k, &m)| {
                let mut rng = rng_from_seed(crate::rng::derive_seed(&[opts.seed, k as u64]));
                (m, mcse_jackknife_after_bootstrap(&used, m, true_log_or, mode, opts.n_boot, &mut rng))
            })
            .collect()
    });
    let fold = |f: fn(&crate::sampler::Diagnostics) -> Option<f64>, max: bool| {
        used.iter().filter_map(|r| f(&r.diagnostics)).reduce(if max { f64::max } else { f64::min })
    };
    Ok(ScenarioSummary {
        n_sim_used: used.len(),
        n_divergent_final,
        bias: value(Measure::Bias),
        relative_bias_or: value(Measure::RelativeBias),
        coverage: value(Measure::Coverage),
        mse: value(Measure::Mse),
        mean_p_superior: value(Measure::MeanPSuperior),
        prop_superior: value(Measure::PropSuperior),
        prop_stopped_early: value(Measure::PropStoppedEarly),
        mcse: McseSet { closed_form, jackknife_after_bootstrap },
        rel_bias_mode: mode,
        max_rhat: fold(|d| d.max_rhat(), true),
        min_ess_bulk: fold(|d| d.min_ess_bulk(), false),
        min_ess_tail: fold(|d| d.min_ess_tail(), false),
    })
}

/// MCSE on the scale the target applies to: relative bias is compared as a
/// fraction rather than in percent.
fn controlled_mcse(summary: &ScenarioSummary, m: Measure) -> f64 {
    let se = summary.mcse.reported(m);
    if m == Measure::RelativeBias {
        se / 100.0
    } else {
        se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscalationOutcome {
    pub summary: ScenarioSummary,
    pub results: Vec<ReplicateResult>,
    /// Controlled measures still at or above the target when the schedule ran out.
    pub missed: Vec<Measure>,
}

/// Runs replicates in batches following `schedule` until every controlled
/// measure's MCSE is below `target_mcse`.
///
/// `runner(range)` must return the results of replicates `range` in order;
/// later steps extend the earlier replicates rather than replacing them.
pub fn escalate_replicates<F>(
    mut runner: F,
    true_log_or: f64,
    target_mcse: f64,
    schedule: &[usize],
    opts: &SummaryOptions,
) -> Result<EscalationOutcome>
where
    F: FnMut(std::ops::Range<usize>) -> Result<Vec<ReplicateResult>>,
{
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[0] < 2 {
        return Err(Error::Config(format!("replicate schedule {schedule:?} must be increasing and start at 2 or more")));
    }
    let mut results: Vec<ReplicateResult> = Vec::with_capacity(*schedule.last().unwrap());
    let mut step = 0;
    loop {
        let goal = schedule[step];
        let batch = runner(results.len()..goal)?;
        if batch.len() != goal - results.len() {
            return Err(Error::InvalidData(format!(
                "runner returned {} results for {} replicates",
                batch.len(),
                goal - results.len()
            )));
        }
        results.extend(batch);
        let summary = summarize(&results, true_log_or, opts)?;
        let missed: Vec<Measure> =
            Measure::CONTROLLED.into_iter().filter(|&m| !(controlled_mcse(&summary, m) < target_mcse)).collect();
        step += 1;
        if missed.is_empty() || step == schedule.len() {
            return Ok(EscalationOutcome { summary, results, missed });
        }
    }
}
