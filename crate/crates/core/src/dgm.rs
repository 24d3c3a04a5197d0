//! Scenario definitions and simulated trial data.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::design::DesignKind;
use crate::error::{Error, Result};
use crate::ordmodel::{cutpoints_from_probs, probs_from_params, Arm, CategoryProbs, ModelParams, TrialData};

/// Effect sizes on the odds-ratio scale, in grid order.
pub const GRID_ODDS_RATIOS: [f64; 3] = [1.0, 1.10, 1.50];
pub const GRID_SAMPLE_SIZES: [usize; 2] = [100, 500];
pub const GRID_CATEGORIES: [usize; 3] = [4, 10, 30];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Skewed,
    UShaped,
    Uniform,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Skewed, ShapeKind::UShaped, ShapeKind::Uniform];

    pub fn as_str(self) -> &'static str {
        match self {
            ShapeKind::Skewed => "skewed",
            ShapeKind::UShaped => "u_shaped",
            ShapeKind::Uniform => "uniform",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown control shape `{s}`")))
    }
}

/// Control-arm distribution family: equal-width partitions of a Beta law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlShape {
    pub kind: ShapeKind,
    pub beta_a: f64,
    pub beta_b: f64,
}

impl ControlShape {
    /// Beta(1, 4): mass concentrated in the low categories.
    pub fn skewed() -> Self {
        Self { kind: ShapeKind::Skewed, beta_a: 1.0, beta_b: 4.0 }
    }

    /// Beta(0.5, 0.5): mass at both ends of the scale.
    pub fn u_shaped() -> Self {
        Self { kind: ShapeKind::UShaped, beta_a: 0.5, beta_b: 0.5 }
    }

    /// Equal probabilities; recorded as Beta(1, 1).
    pub fn uniform() -> Self {
        Self { kind: ShapeKind::Uniform, beta_a: 1.0, beta_b: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_a > 0.0 && self.beta_b > 0.0 && self.beta_a.is_finite() && self.beta_b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Beta shape parameters must be positive, got ({}, {})",
                self.beta_a, self.beta_b
            )));
        }
        Ok(())
    }
}

/// Control probabilities: `pi_j = F(j/J) - F((j-1)/J)` for the shape's Beta CDF,
/// or `1/J` for the uniform shape.
pub fn control_probs(shape: &ControlShape, categories: usize) -> Result<CategoryProbs> {
    shape.validate()?;
    if categories < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 categories, got {categories}")));
    }
    if shape.kind == ShapeKind::Uniform {
        return CategoryProbs::uniform(categories);
    }
    let lower = Beta::new(shape.beta_a, shape.beta_b).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    // The mirrored law gives the survival function without cancellation.
    let upper = Beta::new(shape.beta_b, shape.beta_a).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let j = categories as f64;
    let probs = (1..=categories)
        .map(|k| {
            let (lo, hi) = ((k - 1) as f64 / j, k as f64 / j);
            if lower.cdf(lo) < 0.5 {
                lower.cdf(hi) - lower.cdf(lo)
            } else {
                upper.cdf(1.0 - lo) - upper.cdf(1.0 - hi)
            }
        })
        .collect::<Vec<_>>();
    let total: f64 = probs.iter().sum();
    CategoryProbs::new(probs.into_iter().map(|p| p / total).collect())
}

/// Shifts every cumulative log-odds of `control` by `log_or`.
pub fn treatment_probs(control: &CategoryProbs, log_or: f64) -> Result<CategoryProbs> {
    if !log_or.is_finite() {
        return Err(Error::InvalidParameter(format!("log odds ratio {log_or} is not finite")));
    }
    if log_or == 0.0 {
        return Ok(control.clone());
    }
    let alpha = cutpoints_from_probs(control)?;
    Ok(probs_from_params(&ModelParams::new(alpha, log_or)?, Arm::Intervention))
}

/// One cell of the simulation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Position in the full grid; stable under filtering.
    pub id: usize,
    pub categories: usize,
    pub shape: ControlShape,
    pub true_log_or: f64,
    pub n_obs: usize,
    pub design: DesignKind,
    pub control_probs: CategoryProbs,
    pub treatment_probs: CategoryProbs,
}

impl Scenario {
    pub fn new(
        id: usize,
        categories: usize,
        shape: ControlShape,
        true_log_or: f64,
        n_obs: usize,
        design: DesignKind,
    ) -> Result<Self> {
        if n_obs < 1 {
            return Err(Error::InvalidParameter("scenario needs at least one participant".into()));
        }
        let control = control_probs(&shape, categories)?;
        let treatment = treatment_probs(&control, true_log_or)?;
        Ok(Self {
            id,
            categories,
            shape,
            true_log_or,
            n_obs,
            design,
            control_probs: control,
            treatment_probs: treatment,
        })
    }

    pub fn true_or(&self) -> f64 {
        self.true_log_or.exp()
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        format!(
            "{}-J{}-{}-or{}-n{}",
            self.design.as_str(),
            self.categories,
            self.shape.kind,
            format_or(self.true_or()),
            self.n_obs
        )
    }
}

pub(crate) fn format_or(or: f64) -> String {
    let rounded = (or * 1e6).round() / 1e6;
    format!("{rounded}")
}

/// Draws `n` participants in enrolment order: fair-coin allocation, then an
/// outcome from the allocated arm's distribution.
pub fn simulate_participants<R: Rng + ?Sized>(scn: &Scenario, n: usize, rng: &mut R) -> Vec<(Arm, usize)> {
    let control = WeightedIndex::new(scn.control_probs.as_slice()).expect("valid simplex");
    let treatment = WeightedIndex::new(scn.treatment_probs.as_slice()).expect("valid simplex");
    (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                (Arm::Intervention, treatment.sample(rng) + 1)
            } else {
                (Arm::Control, control.sample(rng) + 1)
            }
        })
        .collect()
}

/// Simulates a trial of `n` participants under simple 1:1 randomisation.
pub fn simulate_trial<R: Rng + ?Sized>(scn: &Scenario, n: usize, rng: &mut R) -> Result<TrialData> {
    if n < 1 {
        return Err(Error::InvalidParameter("trial needs at least one participant".into()));
    }
    TrialData::from_observations(scn.categories, simulate_participants(scn, n, rng))
}

/// The full 108-scenario grid with the default Beta shapes.
pub fn scenario_grid() -> Vec<Scenario> {
    scenario_grid_with(ControlShape::skewed(), ControlShape::u_shaped()).expect("default shapes are valid")
}

/// Full factorial grid, ordered lexicographically by effect, sample size,
/// number of categories, shape and design.
pub fn scenario_grid_with(skewed: ControlShape, u_shaped: ControlShape) -> Result<Vec<Scenario>> {
    let shapes = [skewed, u_shaped, ControlShape::uniform()];
    let mut grid = Vec::with_capacity(108);
    for or in GRID_ODDS_RATIOS {
        for n in GRID_SAMPLE_SIZES {
            for j in GRID_CATEGORIES {
                for shape in shapes {
                    for design in DesignKind::ALL {
                        grid.push(Scenario::new(grid.len(), j, shape, or.ln(), n, design)?);
                    }
                }
            }
        }
    }
    Ok(grid)
}
