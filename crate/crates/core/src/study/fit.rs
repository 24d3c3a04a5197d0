use std::io::{Read, Write};

use serde::Deserialize;

use super::config::{PriorGrid, PriorMode, SWEEP_A_CUT, SWEEP_B_BETA};
use super::tables::{fmt_f64, fmt_opt, write_table};
use crate::design::{fit_posterior, PosteriorFit};
use crate::error::{Error, Result};
use crate::ordmodel::{Arm, TrialData};
use crate::priors::{BetaPriorId, CutpointPriorId, PriorPair};
use crate::rng::{derive_seed, label_hash};
use crate::sampler::SamplerConfig;

#[derive(Deserialize)]
struct Row {
    arm: u8,
    category: usize,
}

/// Reads `arm,category` rows (arm 0 = control, 1 = intervention; categories
/// from 1). The number of categories is `categories` when given, else the
/// largest category seen.
pub fn read_fit_input<R: Read>(input: R, categories: Option<usize>) -> Result<TrialData> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    for col in ["arm", "category"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Schema(col.to_string()));
        }
    }
    let mut obs = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::InvalidData(format!("row {}: {e}", i + 1)))?;
        obs.push((Arm::from_indicator(row.arm)?, row.category));
    }
    let seen = obs.iter().map(|o| o.1).max().unwrap_or(0);
    let j = categories.unwrap_or(seen);
    if j < 2 {
        return Err(Error::InvalidData(format!("need at least 2 categories, found {j}")));
    }
    let data = TrialData::from_observations(j, obs)?;
    validate_fit_data(&data)?;
    Ok(data)
}

/// Both arms must be present and more than one category occupied.
pub fn validate_fit_data(data: &TrialData) -> Result<()> {
    for arm in [Arm::Control, Arm::Intervention] {
        if data.arm_total(arm) == 0 {
            return Err(Error::InvalidData(format!("{arm:?} arm has no participants")));
        }
    }
    if data.occupied_categories() < 2 {
        return Err(Error::InvalidData("only one outcome category is occupied".into()));
    }
    Ok(())
}

/// Parses a comma-separated prior list. Items are `sweeps`, `cross`, a
/// beta prior (paired with `dir_1`), a cut-point prior (paired with
/// `normal_100`) or an explicit `beta/cut` pair.
pub fn parse_prior_list(list: &str) -> Result<Vec<PriorPair>> {
    let mut out: Vec<PriorPair> = Vec::new();
    let mut push = |p: PriorPair| {
        if !out.contains(&p) {
            out.push(p);
        }
    };
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item {
            "sweeps" => PriorGrid::default().pairs().into_iter().for_each(&mut push),
            "cross" => PriorGrid { mode: PriorMode::Cross, ..PriorGrid::default() }.pairs().into_iter().for_each(&mut push),
            _ => {
                if let Some((b, c)) = item.split_once('/') {
                    push(PriorPair::new(b.parse()?, c.parse()?));
                } else if let Ok(b) = item.parse::<BetaPriorId>() {
                    push(PriorPair::new(b, SWEEP_A_CUT));
                } else {
                    push(PriorPair::new(SWEEP_B_BETA, item.parse::<CutpointPriorId>()?));
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Config("prior list is empty".into()));
    }
    Ok(out)
}

pub const FIT_COLUMNS: [&str; 14] = [
    "beta_prior",
    "cut_prior",
    "beta_median",
    "ci_low",
    "ci_high",
    "or_median",
    "p_superior",
    "max_rhat",
    "min_ess_bulk",
    "min_ess_tail",
    "divergences",
    "divergent_final",
    "escalations",
    "target_accept",
];

/// One fit per prior pair; the sampler seed of each fit derives from `seed`
/// and the pair.
pub fn fit_priors(data: &TrialData, pairs: &[PriorPair], sampler: &SamplerConfig, seed: u64) -> Result<Vec<(PriorPair, PosteriorFit)>> {
    validate_fit_data(data)?;
    pairs
        .iter()
        .map(|&p| {
            let cfg = SamplerConfig { seed: derive_seed(&[seed, label_hash(&p.label())]), ..*sampler };
            let fit = fit_posterior(data, &p.beta.spec(), &p.cut.spec(data.categories()), &cfg)?;
            Ok((p, fit))
        })
        .collect()
}

pub fn write_fit_table<W: Write>(out: W, fits: &[(PriorPair, PosteriorFit)]) -> Result<()> {
    let rows: Vec<Vec<String>> = fits
        .iter()
        .map(|(p, f)| {
            vec![
                p.beta.to_string(),
                p.cut.to_string(),
                fmt_f64(f.beta_median),
                fmt_f64(f.ci_low),
                fmt_f64(f.ci_high),
                fmt_f64(f.beta_median.exp()),
                fmt_f64(f.p_superior),
                fmt_opt(f.diagnostics.max_rhat()),
                fmt_opt(f.diagnostics.min_ess_bulk()),
                fmt_opt(f.diagnostics.min_ess_tail()),
                f.diagnostics.divergences_total.to_string(),
                f.divergent_final.to_string(),
                f.escalations.to_string(),
                fmt_f64(f.target_accept),
            ]
        })
        .collect();
    write_table(out, &FIT_COLUMNS, &rows)
}
