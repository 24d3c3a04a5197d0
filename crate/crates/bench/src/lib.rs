//! Shared fixtures for the benchmarks.

use ordprior::dgm::simulate_trial;
use ordprior::rng::rng_from_seed;
use ordprior::{ControlShape, DesignKind, Scenario, TrialData};

/// A skewed-control trial with `categories` levels and `n` participants.
pub fn skewed_trial(categories: usize, n: usize, seed: u64) -> TrialData {
    let scn = Scenario::new(0, categories, ControlShape::skewed(), 1.5f64.ln(), n, DesignKind::Fixed)
        .expect("valid scenario");
    simulate_trial(&scn, n, &mut rng_from_seed(seed)).expect("valid trial")
}
