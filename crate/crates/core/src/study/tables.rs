use std::io::{Read, Write};

use crate::design::ReplicateResult;
use crate::dgm::{format_or, Scenario};
use crate::error::{Error, Result};
use crate::metrics::{EscalationOutcome, Measure};
use crate::priors::PriorPair;

/// Columns of the results table, in order.
pub const RESULTS_COLUMNS: [&str; 27] = [
    "scenario_id",
    "design",
    "J",
    "shape",
    "beta_a",
    "beta_b",
    "true_or",
    "n_obs",
    "beta_prior",
    "cut_prior",
    "n_sim_used",
    "bias",
    "bias_mcse",
    "rel_bias_pct",
    "rel_bias_mcse",
    "coverage",
    "coverage_mcse",
    "mse",
    "mse_mcse",
    "mean_p_superior",
    "prop_superior",
    "prop_superior_mcse",
    "prop_stopped_early",
    "n_divergent_final",
    "max_rhat",
    "min_ess_bulk",
    "min_ess_tail",
];

/// Columns of the per-cell diagnostics table.
pub const DIAGNOSTICS_COLUMNS: [&str; 14] = [
    "scenario_id",
    "beta_prior",
    "cut_prior",
    "n_sim",
    "n_escalated",
    "total_escalations",
    "n_divergent_final",
    "n_rhat_above_1.01",
    "n_ess_bulk_below_100_per_chain",
    "n_ess_tail_below_100_per_chain",
    "max_rhat",
    "min_ess_bulk",
    "min_ess_tail",
    "mcse_target_missed",
];

/// Marker for undefined values.
pub const NA: &str = "NA";

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| NA.to_string())
}

pub(crate) fn results_row(scn: &Scenario, pair: &PriorPair, out: &EscalationOutcome) -> Vec<String> {
    let s = &out.summary;
    let mcse = |m| fmt_f64(s.mcse.reported(m));
    vec![
        scn.id.to_string(),
        scn.design.to_string(),
        scn.categories.to_string(),
        scn.shape.kind.to_string(),
        fmt_f64(scn.shape.beta_a),
        fmt_f64(scn.shape.beta_b),
        format_or(scn.true_or()),
        scn.n_obs.to_string(),
        pair.beta.to_string(),
        pair.cut.to_string(),
        s.n_sim_used.to_string(),
        fmt_f64(s.bias),
        mcse(Measure::Bias),
        fmt_f64(s.value(Measure::RelativeBias)),
        mcse(Measure::RelativeBias),
        fmt_f64(s.coverage),
        mcse(Measure::Coverage),
        fmt_f64(s.mse),
        mcse(Measure::Mse),
        fmt_f64(s.mean_p_superior),
        fmt_f64(s.prop_superior),
        mcse(Measure::PropSuperior),
        fmt_f64(s.prop_stopped_early),
        s.n_divergent_final.to_string(),
        fmt_opt(s.max_rhat),
        fmt_opt(s.min_ess_bulk),
        fmt_opt(s.min_ess_tail),
    ]
}

pub(crate) fn diagnostics_row(
    scn: &Scenario,
    pair: &PriorPair,
    chains: usize,
    out: &EscalationOutcome,
) -> Vec<String> {
    let rs: &[ReplicateResult] = &out.results;
    let ess_floor = 100.0 * chains as f64;
    let count = |f: &dyn Fn(&ReplicateResult) -> bool| rs.iter().filter(|r| f(r)).count().to_string();
    let fold = |f: fn(&ReplicateResult) -> Option<f64>, max: bool| {
        rs.iter().filter_map(f).reduce(if max { f64::max } else { f64::min })
    };
    vec![
        scn.id.to_string(),
        pair.beta.to_string(),
        pair.cut.to_string(),
        rs.len().to_string(),
        count(&|r| r.escalations > 0),
        rs.iter().map(|r| r.escalations).sum::<usize>().to_string(),
        count(&|r| r.divergent_final),
        count(&|r| r.diagnostics.max_rhat().is_some_and(|v| v >= 1.01)),
        count(&|r| r.diagnostics.min_ess_bulk().is_some_and(|v| v < ess_floor)),
        count(&|r| r.diagnostics.min_ess_tail().is_some_and(|v| v < ess_floor)),
        fmt_opt(fold(|r| r.diagnostics.max_rhat(), true)),
        fmt_opt(fold(|r| r.diagnostics.min_ess_bulk(), false)),
        fmt_opt(fold(|r| r.diagnostics.min_ess_tail(), false)),
        out.missed.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(";"),
    ]
}

pub(crate) fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Result-table columns repeated on every long-format row.
pub const PLOT_ID_COLUMNS: [&str; 11] = [
    "scenario_id",
    "design",
    "J",
    "shape",
    "beta_a",
    "beta_b",
    "true_or",
    "n_obs",
    "beta_prior",
    "cut_prior",
    "n_sim_used",
];

/// Cell-level extras repeated on every long-format row.
pub const PLOT_EXTRA_COLUMNS: [&str; 4] = ["n_divergent_final", "max_rhat", "min_ess_bulk", "min_ess_tail"];

fn mcse_column(m: Measure) -> Option<&'static str> {
    match m {
        Measure::Bias => Some("bias_mcse"),
        Measure::RelativeBias => Some("rel_bias_mcse"),
        Measure::Coverage => Some("coverage_mcse"),
        Measure::Mse => Some("mse_mcse"),
        Measure::PropSuperior => Some("prop_superior_mcse"),
        Measure::MeanPSuperior | Measure::PropStoppedEarly => None,
    }
}

pub fn plot_columns() -> Vec<&'static str> {
    let mut cols: Vec<&str> = PLOT_ID_COLUMNS.to_vec();
    cols.extend(PLOT_EXTRA_COLUMNS);
    cols.extend(["measure", "value", "mcse"]);
    cols
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema(name.to_string()))
}

/// Reshapes a results table into one row per (cell, measure). Values are
/// copied as text, so the reshaping is lossless.
pub fn results_to_long<R: Read, W: Write>(input: R, output: W) -> Result<usize> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        write_table(output, &plot_columns(), &[])?;
        return Ok(0);
    }
    let idx = |names: &[&str]| -> Result<Vec<usize>> { names.iter().map(|n| column_index(&headers, n)).collect() };
    let ids = idx(&PLOT_ID_COLUMNS)?;
    let extras = idx(&PLOT_EXTRA_COLUMNS)?;
    let measures: Vec<(Measure, usize, Option<usize>)> = Measure::ALL
        .iter()
        .map(|&m| {
            let v = column_index(&headers, m.as_str())?;
            let se = mcse_column(m).map(|c| column_index(&headers, c)).transpose()?;
            Ok((m, v, se))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        for &(m, v, se) in &measures {
            let mut row: Vec<String> = ids.iter().chain(&extras).map(|&i| rec[i].to_string()).collect();
            row.push(m.as_str().to_string());
            row.push(rec[v].to_string());
            row.push(se.map(|i| rec[i].to_string()).unwrap_or_default());
            rows.push(row);
        }
    }
    write_table(output, &plot_columns(), &rows)?;
    Ok(rows.len())
}

/// Inverse of [`results_to_long`]: rebuilds the results table.
pub fn long_to_results<R: Read, W: Write>(input: R, output: W) -> Result<usize> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(input);
    let headers = rdr.headers()?.clone();
    let cols = plot_columns();
    let idx: Vec<usize> = cols.iter().map(|c| column_index(&headers, c)).collect::<Result<_>>()?;
    let n_keys = PLOT_ID_COLUMNS.len() + PLOT_EXTRA_COLUMNS.len();
    let mut cells: Vec<(Vec<String>, Vec<(String, String, String)>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |k: usize| rec[idx[k]].to_string();
        let key: Vec<String> = (0..n_keys).map(field).collect();
        let entry = (field(n_keys), field(n_keys + 1), field(n_keys + 2));
        match cells.last_mut() {
            Some((k, list)) if *k == key => list.push(entry),
            _ => cells.push((key, vec![entry])),
        }
    }
    let mut rows = Vec::with_capacity(cells.len());
    for (key, list) in &cells {
        let lookup = |name: &str| -> Result<String> {
            if let Some(p) = PLOT_ID_COLUMNS.iter().position(|c| *c == name) {
                return Ok(key[p].clone());
            }
            if let Some(p) = PLOT_EXTRA_COLUMNS.iter().position(|c| *c == name) {
                return Ok(key[PLOT_ID_COLUMNS.len() + p].clone());
            }
            for &m in &Measure::ALL {
                let found = || list.iter().find(|(name, _, _)| name == m.as_str());
                if name == m.as_str() {
                    return found().map(|e| e.1.clone()).ok_or_else(|| Error::Schema(name.to_string()));
                }
                if mcse_column(m) == Some(name) {
                    return found().map(|e| e.2.clone()).ok_or_else(|| Error::Schema(name.to_string()));
                }
            }
            Err(Error::Schema(name.to_string()))
        };
        rows.push(RESULTS_COLUMNS.iter().map(|c| lookup(c)).collect::<Result<Vec<_>>>()?);
    }
    write_table(output, &RESULTS_COLUMNS, &rows)?;
    Ok(rows.len())
}
