use super::nuts::ChainSet;
use super::SamplerConfig;

/// Target-acceptance rungs tried after divergent transitions.
pub const ACCEPT_LADDER: [f64; 3] = [0.80, 0.95, 0.99];
/// Maximum tree depth once escalation starts.
pub const ESCALATED_TREE_DEPTH: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Escalation {
    /// No divergent transitions; keep the run.
    Clean,
    /// Re-run with the stricter configuration.
    Retry(SamplerConfig),
    /// Divergences remain at the top of the ladder.
    DivergentFinal,
}

impl Escalation {
    pub fn next_config(&self) -> Option<SamplerConfig> {
        match self {
            Escalation::Retry(c) => Some(*c),
            _ => None,
        }
    }
}

/// Next rung of the divergence ladder: raise `target_accept` to the next
/// ladder value and the tree depth to [`ESCALATED_TREE_DEPTH`].
pub fn escalate_on_divergence(config: &SamplerConfig, chains: &ChainSet) -> Escalation {
    if chains.divergences_total() == 0 {
        return Escalation::Clean;
    }
    let next_accept = ACCEPT_LADDER.iter().copied().find(|&a| a > config.target_accept + 1e-12);
    let deeper = config.max_tree_depth < ESCALATED_TREE_DEPTH;
    match (next_accept, deeper) {
        (None, false) => Escalation::DivergentFinal,
        (accept, _) => Escalation::Retry(SamplerConfig {
            target_accept: accept.unwrap_or(config.target_accept),
            max_tree_depth: config.max_tree_depth.max(ESCALATED_TREE_DEPTH),
            ..*config
        }),
    }
}
