//! No-U-Turn Hamiltonian Monte Carlo with warm-up adaptation, divergence
//! detection and convergence diagnostics.

mod adapt;
mod diagnostics;
mod escalate;
mod nuts;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use diagnostics::{ess_bulk, ess_tail, split_rhat, Diagnostics};
pub use escalate::{escalate_on_divergence, Escalation, ACCEPT_LADDER, ESCALATED_TREE_DEPTH};
pub use nuts::{nuts_run, ChainSet};

/// A differentiable log-density on `R^dim`.
///
/// Implementations must be callable from several chains at once. A non-finite
/// return value marks the point as outside the support.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Returns `log p(x)` and writes its gradient into `grad`.
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup_iters: usize,
    pub sampling_iters: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub seed: u64,
    pub divergence_energy_threshold: f64,
}

impl Default for SamplerConfig {
    /// Four chains of 5000 warm-up and 5000 retained iterations: 20,000
    /// post-warm-up draws in total.
    fn default() -> Self {
        Self {
            chains: 4,
            warmup_iters: 5000,
            sampling_iters: 5000,
            target_accept: 0.8,
            max_tree_depth: 10,
            seed: 0,
            divergence_energy_threshold: 1000.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains < 1 {
            return Err(Error::Config("sampler needs at least one chain".into()));
        }
        if self.warmup_iters < 1 || self.sampling_iters < 1 {
            return Err(Error::Config("warm-up and sampling iterations must be at least 1".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!("target_accept {} outside (0, 1)", self.target_accept)));
        }
        if !(1..=15).contains(&self.max_tree_depth) {
            return Err(Error::Config(format!("max_tree_depth {} outside [1, 15]", self.max_tree_depth)));
        }
        if !(self.divergence_energy_threshold > 0.0) {
            return Err(Error::Config("divergence threshold must be positive".into()));
        }
        Ok(())
    }

    pub fn total_draws(&self) -> usize {
        self.chains * self.sampling_iters
    }
}
