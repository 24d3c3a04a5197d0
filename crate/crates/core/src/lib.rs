//! Bayesian proportional-odds models for ordinal trial outcomes: prior
//! specifications, a No-U-Turn sampler, trial simulation and operating
//! characteristics.
//!
//! Cut-points follow `logit P(Y >= j) = alpha_j + beta x`, so `alpha` is
//! strictly decreasing and `beta > 0` favours the intervention arm.

pub mod design;
pub mod dgm;
pub mod error;
pub(crate) mod math;
pub mod metrics;
pub mod ordmodel;
pub mod priors;
pub mod rng;
pub mod sampler;
pub mod study;

pub use design::{
    fit_posterior, posterior_superiority, run_replicate, DesignKind, DesignSpec, PosteriorFit, ReplicateResult,
    ReplicateSeeds,
};
pub use dgm::{control_probs, scenario_grid, simulate_trial, treatment_probs, ControlShape, Scenario, ShapeKind};
pub use error::{Error, Result};
pub use metrics::{summarize, Measure, RelBiasMode, ScenarioSummary, SummaryOptions};
pub use ordmodel::{Arm, CategoryProbs, Cutpoints, ModelParams, TrialData};
pub use priors::{BetaPriorId, BetaPriorSpec, CutpointPriorId, CutpointPriorSpec, PriorPair};
pub use sampler::{ChainSet, Diagnostics, SamplerConfig};
pub use study::{run_study, StudyConfig, StudyReport};
