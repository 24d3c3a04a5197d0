use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::design::{DesignKind, DesignSpec};
use crate::dgm::{ControlShape, Scenario, ShapeKind};
use crate::error::{Error, Result};
use crate::metrics::RelBiasMode;
use crate::priors::{BetaPriorId, CutpointPriorId, PriorPair};
use crate::sampler::SamplerConfig;

/// How the prior lists expand into prior pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// Every listed beta prior with `dir_1`, then every listed cut-point prior
    /// with `normal_100`, without duplicates.
    #[default]
    Sweeps,
    /// Every beta prior with every cut-point prior.
    Cross,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorGrid {
    pub mode: PriorMode,
    pub beta: Vec<BetaPriorId>,
    pub cut: Vec<CutpointPriorId>,
}

impl Default for PriorGrid {
    fn default() -> Self {
        Self { mode: PriorMode::Sweeps, beta: BetaPriorId::ALL.to_vec(), cut: CutpointPriorId::ALL.to_vec() }
    }
}

/// The fixed partner of each sweep.
pub const SWEEP_A_CUT: CutpointPriorId = CutpointPriorId::Dir1;
pub const SWEEP_B_BETA: BetaPriorId = BetaPriorId::Normal100;

impl PriorGrid {
    pub fn pairs(&self) -> Vec<PriorPair> {
        let candidates: Vec<PriorPair> = match self.mode {
            PriorMode::Sweeps => self
                .beta
                .iter()
                .map(|&b| PriorPair::new(b, SWEEP_A_CUT))
                .chain(self.cut.iter().map(|&c| PriorPair::new(SWEEP_B_BETA, c)))
                .collect(),
            PriorMode::Cross => {
                self.beta.iter().flat_map(|&b| self.cut.iter().map(move |&c| PriorPair::new(b, c))).collect()
            }
        };
        let mut out: Vec<PriorPair> = Vec::with_capacity(candidates.len());
        for p in candidates {
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }
}

/// Sampler settings; seeds are derived per analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSettings {
    pub chains: usize,
    pub warmup_iters: usize,
    pub sampling_iters: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub divergence_energy_threshold: f64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            chains: d.chains,
            warmup_iters: d.warmup_iters,
            sampling_iters: d.sampling_iters,
            target_accept: d.target_accept,
            max_tree_depth: d.max_tree_depth,
            divergence_energy_threshold: d.divergence_energy_threshold,
        }
    }
}

impl SamplerSettings {
    pub fn to_config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            chains: self.chains,
            warmup_iters: self.warmup_iters,
            sampling_iters: self.sampling_iters,
            target_accept: self.target_accept,
            max_tree_depth: self.max_tree_depth,
            seed,
            divergence_energy_threshold: self.divergence_energy_threshold,
        }
    }
}

/// Beta(a, b) parameters of the non-uniform control shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeSettings {
    pub skewed: [f64; 2],
    pub u_shaped: [f64; 2],
}

impl Default for ShapeSettings {
    fn default() -> Self {
        let (s, u) = (ControlShape::skewed(), ControlShape::u_shaped());
        Self { skewed: [s.beta_a, s.beta_b], u_shaped: [u.beta_a, u.beta_b] }
    }
}

impl ShapeSettings {
    pub fn shapes(&self) -> (ControlShape, ControlShape) {
        (
            ControlShape { kind: ShapeKind::Skewed, beta_a: self.skewed[0], beta_b: self.skewed[1] },
            ControlShape { kind: ShapeKind::UShaped, beta_a: self.u_shaped[0], beta_b: self.u_shaped[1] },
        )
    }
}

/// Optional restrictions on the scenario grid; an absent field keeps every
/// level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFilter {
    #[serde(alias = "J", skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vec<ShapeKind>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<Vec<DesignKind>>,
    #[serde(alias = "or", alias = "effect", skip_serializing_if = "Option::is_none")]
    pub odds_ratio: Option<Vec<f64>>,
    #[serde(alias = "n", skip_serializing_if = "Option::is_none")]
    pub n_obs: Option<Vec<usize>>,
}

fn parse_list<T: std::str::FromStr>(key: &str, values: &str) -> Result<Vec<T>> {
    values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<T>().map_err(|_| Error::Config(format!("bad value `{v}` for filter `{key}`"))))
        .collect()
}

impl ScenarioFilter {
    pub fn is_empty(&self) -> bool {
        self == &Self::default()
    }

    /// Applies one `key=v1,v2` assignment, replacing that field.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (key, values) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("filter `{assignment}` is not of the form key=v1,v2")))?;
        let key = key.trim();
        match key {
            "J" | "j" | "categories" => self.categories = Some(parse_list(key, values)?),
            "shape" => self.shape = Some(parse_list(key, values)?),
            "design" => self.design = Some(parse_list(key, values)?),
            "or" | "effect" | "odds_ratio" => self.odds_ratio = Some(parse_list(key, values)?),
            "n" | "n_obs" => self.n_obs = Some(parse_list(key, values)?),
            _ => return Err(Error::Config(format!("unknown filter key `{key}`"))),
        }
        Ok(())
    }

    pub fn matches(&self, scn: &Scenario) -> bool {
        fn keep<T: PartialEq>(levels: &Option<Vec<T>>, v: &T) -> bool {
            levels.as_ref().is_none_or(|l| l.contains(v))
        }
        keep(&self.categories, &scn.categories)
            && keep(&self.shape, &scn.shape.kind)
            && keep(&self.design, &scn.design)
            && keep(&self.n_obs, &scn.n_obs)
            && self.odds_ratio.as_ref().is_none_or(|l| l.iter().any(|or| (or.ln() - scn.true_log_or).abs() < 1e-9))
    }

    /// Compact description used in error messages.
    pub fn describe(&self) -> String {
        toml::to_string(self).unwrap_or_default().trim().replace('\n', ", ")
    }
}

/// A simulation study: which cells to run and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub target_mcse: f64,
    pub replicate_schedule: Vec<usize>,
    pub exclude_divergent: bool,
    pub rel_bias: RelBiasMode,
    pub n_boot: usize,
    pub priors: PriorGrid,
    pub sampler: SamplerSettings,
    pub shapes: ShapeSettings,
    pub design: DesignSpec,
    pub filter: ScenarioFilter,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            output_dir: PathBuf::from("ordprior-out"),
            workers: 1,
            target_mcse: 0.05,
            replicate_schedule: vec![100, 250, 500, 1000],
            exclude_divergent: false,
            rel_bias: RelBiasMode::MeanOfOr,
            n_boot: 1000,
            priors: PriorGrid::default(),
            sampler: SamplerSettings::default(),
            shapes: ShapeSettings::default(),
            design: DesignSpec::default(),
            filter: ScenarioFilter::default(),
        }
    }
}

/// Categories kept by the desk preset when the filter does not choose.
pub const DESK_CATEGORIES: [usize; 2] = [4, 10];

impl StudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Desk scale: 200 replicates, 2 chains of 1000 warm-up and 1000
    /// retained iterations, and J in {4, 10} unless the filter sets J.
    pub fn apply_desk_preset(&mut self) {
        self.replicate_schedule = vec![200];
        self.sampler.chains = 2;
        self.sampler.warmup_iters = 1000;
        self.sampler.sampling_iters = 1000;
        if self.filter.categories.is_none() {
            self.filter.categories = Some(DESK_CATEGORIES.to_vec());
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers < 1 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(self.target_mcse > 0.0) {
            return Err(Error::Config("target_mcse must be positive".into()));
        }
        let s = &self.replicate_schedule;
        if s.is_empty() || s[0] < 2 || s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("replicate_schedule {s:?} must be increasing and start at 2 or more")));
        }
        if self.n_boot < 2 {
            return Err(Error::Config("n_boot must be at least 2".into()));
        }
        if self.priors.pairs().is_empty() {
            return Err(Error::Config("prior grid is empty".into()));
        }
        self.sampler.to_config(0).validate()?;
        let (skewed, u_shaped) = self.shapes.shapes();
        skewed.validate()?;
        u_shaped.validate()?;
        self.design.validate()
    }

    /// SHA-256 of everything that affects results; `workers` and
    /// `output_dir` are excluded.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = 1;
        canonical.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }
}
