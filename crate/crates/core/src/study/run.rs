use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::StudyConfig;
use super::tables::{diagnostics_row, results_row, write_table, DIAGNOSTICS_COLUMNS, RESULTS_COLUMNS};
use crate::design::{run_replicate, ReplicateSeeds};
use crate::dgm::{scenario_grid_with, Scenario};
use crate::error::{Error, Result};
use crate::metrics::{escalate_replicates, EscalationOutcome, SummaryOptions};
use crate::priors::PriorPair;
use crate::rng::{derive_seed, label_hash};
use crate::sampler::{ACCEPT_LADDER, ESCALATED_TREE_DEPTH};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const RESULTS_FILE: &str = "results.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

/// One (scenario, prior pair) unit of work.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Position in the plan: scenarios in grid order, then prior pairs.
    pub id: usize,
    pub scenario: Scenario,
    pub priors: PriorPair,
}

impl Cell {
    pub fn key(&self) -> String {
        format!("{}|{}", self.scenario.label(), self.priors.label())
    }
}

/// Every cell selected by the configuration.
pub fn plan_cells(cfg: &StudyConfig) -> Result<Vec<Cell>> {
    let (skewed, u_shaped) = cfg.shapes.shapes();
    let scenarios: Vec<Scenario> =
        scenario_grid_with(skewed, u_shaped)?.into_iter().filter(|s| cfg.filter.matches(s)).collect();
    if scenarios.is_empty() {
        return Err(Error::Config(format!("scenario filter matches no scenario: {}", cfg.filter.describe())));
    }
    let pairs = cfg.priors.pairs();
    let mut cells = Vec::with_capacity(scenarios.len() * pairs.len());
    for scn in &scenarios {
        for &p in &pairs {
            cells.push(Cell { id: cells.len(), scenario: scn.clone(), priors: p });
        }
    }
    Ok(cells)
}

/// Finished cell as stored in the journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell_id: usize,
    pub key: String,
    pub results: Vec<String>,
    pub diagnostics: Vec<String>,
}

/// Runs the replicate schedule of one cell.
pub fn run_cell(cfg: &StudyConfig, cell: &Cell) -> Result<(EscalationOutcome, CellRecord)> {
    let scn = &cell.scenario;
    let label = cell.priors.label();
    let beta_spec = cell.priors.beta.spec();
    let cut_spec = cell.priors.cut.spec(scn.categories);
    let sampler = cfg.sampler.to_config(0);
    let opts = SummaryOptions {
        exclude_divergent: cfg.exclude_divergent,
        rel_bias_mode: cfg.rel_bias,
        n_boot: cfg.n_boot,
        seed: derive_seed(&[cfg.master_seed, label_hash("bootstrap"), scn.id as u64, label_hash(&label)]),
    };
    let runner = |range: std::ops::Range<usize>| {
        range
            .into_par_iter()
            .map(|r| {
                let seeds = ReplicateSeeds::derive(cfg.master_seed, scn.id, &label, r as u64);
                run_replicate(scn, &beta_spec, &cut_spec, &sampler, &cfg.design, seeds).map_err(|e| {
                    Error::Replicate { scenario: cell.key(), replicate: r as u64, source: Box::new(e) }
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    let outcome = escalate_replicates(runner, scn.true_log_or, cfg.target_mcse, &cfg.replicate_schedule, &opts)?;
    let record = CellRecord {
        cell_id: cell.id,
        key: cell.key(),
        results: results_row(scn, &cell.priors, &outcome),
        diagnostics: diagnostics_row(scn, &cell.priors, cfg.sampler.chains, &outcome),
    };
    Ok((outcome, record))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub output_dir: PathBuf,
    pub config_hash: String,
    /// Finished cells ordered by cell id.
    pub records: Vec<CellRecord>,
    /// Cells taken from the journal rather than recomputed.
    pub resumed: usize,
}

impl StudyReport {
    pub fn results_path(&self) -> PathBuf {
        self.output_dir.join(RESULTS_FILE)
    }

    pub fn diagnostics_path(&self) -> PathBuf {
        self.output_dir.join(DIAGNOSTICS_FILE)
    }

    /// Value of `column` in the results row of the cell with `key`.
    pub fn value(&self, key: &str, column: &str) -> Option<&str> {
        let c = RESULTS_COLUMNS.iter().position(|h| *h == column)?;
        self.records.iter().find(|r| r.key == key).map(|r| r.results[c].as_str())
    }
}

fn manifest_json(cfg: &StudyConfig, hash: &str, cells: &[Cell]) -> Result<String> {
    let (skewed, u_shaped) = cfg.shapes.shapes();
    let manifest = serde_json::json!({
        "software": format!("ordprior {}", env!("CARGO_PKG_VERSION")),
        "config_hash": hash,
        "config_toml": cfg.to_toml_string()?,
        "resolved": {
            "master_seed": cfg.master_seed,
            "replicate_schedule": cfg.replicate_schedule,
            "target_mcse": cfg.target_mcse,
            "rel_bias": cfg.rel_bias,
            "exclude_divergent": cfg.exclude_divergent,
            "n_boot": cfg.n_boot,
            "skewed_beta": [skewed.beta_a, skewed.beta_b],
            "u_shaped_beta": [u_shaped.beta_a, u_shaped.beta_b],
            "uniform_beta": [1.0, 1.0],
            "design": cfg.design,
            "sampler": cfg.sampler,
            "divergence_accept_ladder": ACCEPT_LADDER,
            "escalated_tree_depth": ESCALATED_TREE_DEPTH,
            "r2_indicator_variance": "centred: p(1 - p) of the realised allocation",
            "treatment_coding": "0 = control, 1 = intervention",
            "seeding": "data: (master_seed, scenario_id, replicate); sampler: (master_seed, scenario_id, prior pair, replicate, analysis, attempt)",
        },
        "cells": cells.iter().map(|c| serde_json::json!({
            "cell_id": c.id,
            "scenario_id": c.scenario.id,
            "key": c.key(),
        })).collect::<Vec<_>>(),
    });
    Ok(serde_json::to_string_pretty(&manifest)? + "\n")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads finished cells from the journal. A truncated final line, left by an
/// interrupted write, is dropped; damage anywhere else is an error.
fn load_journal(path: &Path, cells: &[Cell]) -> Result<Vec<CellRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?;
    let mut records = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str::<CellRecord>(line) {
            Ok(rec) => {
                let planned = cells.get(rec.cell_id).map(Cell::key);
                if planned.as_deref() != Some(rec.key.as_str()) {
                    return Err(Error::Config(format!("journal record `{}` does not match the plan", rec.key)));
                }
                records.push(rec);
            }
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => return Err(Error::Config(format!("journal line {} is damaged: {e}", i + 1))),
        }
    }
    Ok(records)
}

/// Runs every planned cell, writing the manifest, the journal and the
/// results and diagnostics tables to `cfg.output_dir`.
///
/// With `resume`, cells already in the journal are not recomputed. Results do
/// not depend on `cfg.workers`.
pub fn run_study(cfg: &StudyConfig, resume: bool) -> Result<StudyReport> {
    cfg.validate()?;
    let cells = plan_cells(cfg)?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let hash = cfg.config_hash();

    let manifest_path = dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        let existing: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
        let old = existing.get("config_hash").and_then(|v| v.as_str()).unwrap_or("");
        if old != hash {
            return Err(Error::Config(format!(
                "{} was written by a different configuration (hash {old}, now {hash}); refusing to overwrite",
                manifest_path.display()
            )));
        }
    }
    write_atomic(&manifest_path, manifest_json(cfg, &hash, &cells)?.as_bytes())?;

    let journal_path = dir.join(JOURNAL_FILE);
    let mut done = if resume { load_journal(&journal_path, &cells)? } else { Vec::new() };
    let mut clean = String::new();
    for rec in &done {
        clean.push_str(&serde_json::to_string(rec)?);
        clean.push('\n');
    }
    write_atomic(&journal_path, clean.as_bytes())?;
    let resumed = done.len();

    let journal = Mutex::new(OpenOptions::new().append(true).open(&journal_path)?);
    let todo: Vec<&Cell> = cells.iter().filter(|c| !done.iter().any(|r| r.cell_id == c.id)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let fresh: Vec<CellRecord> = pool.install(|| {
        todo.par_iter()
            .map(|cell| {
                let (_, rec) = run_cell(cfg, cell)?;
                let line = serde_json::to_string(&rec)? + "\n";
                let mut f = journal.lock().expect("journal lock");
                f.write_all(line.as_bytes())?;
                f.flush()?;
                Ok(rec)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    done.extend(fresh);
    done.sort_by_key(|r| r.cell_id);

    let mut results = Vec::new();
    let results_rows: Vec<Vec<String>> = done.iter().map(|r| r.results.clone()).collect();
    write_table(&mut results, &RESULTS_COLUMNS, &results_rows)?;
    write_atomic(&dir.join(RESULTS_FILE), &results)?;
    let mut diagnostics = Vec::new();
    let diag_rows: Vec<Vec<String>> = done.iter().map(|r| r.diagnostics.clone()).collect();
    write_table(&mut diagnostics, &DIAGNOSTICS_COLUMNS, &diag_rows)?;
    write_atomic(&dir.join(DIAGNOSTICS_FILE), &diagnostics)?;

    Ok(StudyReport { output_dir: dir, config_hash: hash, records: done, resumed })
}
