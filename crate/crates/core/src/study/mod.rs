//! Simulation studies over the scenario grid and single-dataset fits:
//! configuration, cell planning, parallel execution with a resumable journal,
//! and the output tables.

mod config;
mod fit;
mod run;
mod tables;

pub use config::{
    PriorGrid, PriorMode, SamplerSettings, ScenarioFilter, ShapeSettings, StudyConfig, DESK_CATEGORIES, SWEEP_A_CUT,
    SWEEP_B_BETA,
};
pub use fit::{fit_priors, parse_prior_list, read_fit_input, validate_fit_data, write_fit_table, FIT_COLUMNS};
pub use run::{
    plan_cells, run_cell, run_study, Cell, CellRecord, StudyReport, DIAGNOSTICS_FILE, JOURNAL_FILE, MANIFEST_FILE,
    RESULTS_FILE,
};
pub use tables::{
    long_to_results, plot_columns, results_to_long, DIAGNOSTICS_COLUMNS, NA, PLOT_EXTRA_COLUMNS, PLOT_ID_COLUMNS,
    RESULTS_COLUMNS,
};
