//! Prior specifications for the treatment effect and the cut-points, the
//! unconstrained reparameterisation used by the sampler, and the resulting
//! log-posterior.

mod beta;
mod cutpoints;
mod posterior;
mod transform;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use beta::{log_prior_beta, log_prior_beta_r2, r_squared, LATENT_LOGISTIC_VARIANCE};
pub use cutpoints::log_prior_cutpoints;
pub use posterior::{log_posterior, PosteriorEval, PosteriorTarget, DEFAULT_INDICATOR_VARIANCE};
pub(crate) use transform::cutpoint_values;
pub use transform::{from_unconstrained, to_unconstrained, UnconstrainedState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BetaPriorKind {
    NormalWide,
    NormalNarrow,
    Cauchy,
    LaplaceWide,
    LaplaceNarrow,
    RSquared,
}

/// Prior on the proportional log-odds ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPriorSpec {
    pub kind: BetaPriorKind,
    pub location: f64,
    /// Standard deviation of the Normal/Laplace prior (not the Laplace scale).
    pub scale_sd: f64,
    pub r2_shape1: f64,
    pub r2_shape2: f64,
}

impl BetaPriorSpec {
    pub fn normal(sd: f64) -> Self {
        let kind = if sd >= 10.0 { BetaPriorKind::NormalWide } else { BetaPriorKind::NormalNarrow };
        Self { kind, location: 0.0, scale_sd: sd, r2_shape1: 0.5, r2_shape2: 0.5 }
    }

    pub fn laplace(sd: f64) -> Self {
        let kind = if sd >= 10.0 { BetaPriorKind::LaplaceWide } else { BetaPriorKind::LaplaceNarrow };
        Self { kind, location: 0.0, scale_sd: sd, r2_shape1: 0.5, r2_shape2: 0.5 }
    }

    pub fn cauchy() -> Self {
        Self { kind: BetaPriorKind::Cauchy, location: 0.0, scale_sd: 1.0, r2_shape1: 0.5, r2_shape2: 0.5 }
    }

    pub fn r_squared(shape1: f64, shape2: f64) -> Self {
        Self { kind: BetaPriorKind::RSquared, location: 0.0, scale_sd: 1.0, r2_shape1: shape1, r2_shape2: shape2 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.scale_sd > 0.0 && self.r2_shape1 > 0.0 && self.r2_shape2 > 0.0 && self.location.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid beta prior {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CutpointPriorKind {
    Dirichlet,
    IndependentNormal,
}

/// Prior on the cut-points, either a symmetric Dirichlet on the control-arm
/// simplex or independent Normals on the ordered cut-points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutpointPriorSpec {
    pub kind: CutpointPriorKind,
    pub concentration: f64,
    pub normal_sd: f64,
}

impl CutpointPriorSpec {
    pub fn dirichlet(concentration: f64) -> Self {
        Self { kind: CutpointPriorKind::Dirichlet, concentration, normal_sd: 100.0 }
    }

    pub fn normal(sd: f64) -> Self {
        Self { kind: CutpointPriorKind::IndependentNormal, concentration: 1.0, normal_sd: sd }
    }

    pub fn validate(&self) -> Result<()> {
        if self.concentration > 0.0 && self.normal_sd > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid cut-point prior {self:?}")))
        }
    }
}

/// Registered treatment-effect prior names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BetaPriorId {
    Normal100,
    Normal2_5,
    Cauchy,
    Laplace100,
    Laplace2_5,
    R2Half,
}

impl BetaPriorId {
    pub const ALL: [BetaPriorId; 6] = [
        BetaPriorId::Normal100,
        BetaPriorId::Normal2_5,
        BetaPriorId::Cauchy,
        BetaPriorId::Laplace100,
        BetaPriorId::Laplace2_5,
        BetaPriorId::R2Half,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BetaPriorId::Normal100 => "normal_100",
            BetaPriorId::Normal2_5 => "normal_2.5",
            BetaPriorId::Cauchy => "cauchy",
            BetaPriorId::Laplace100 => "laplace_100",
            BetaPriorId::Laplace2_5 => "laplace_2.5",
            BetaPriorId::R2Half => "r2_0.5",
        }
    }

    pub fn spec(self) -> BetaPriorSpec {
        match self {
            BetaPriorId::Normal100 => BetaPriorSpec::normal(100.0),
            BetaPriorId::Normal2_5 => BetaPriorSpec::normal(2.5),
            BetaPriorId::Cauchy => BetaPriorSpec::cauchy(),
            BetaPriorId::Laplace100 => BetaPriorSpec::laplace(100.0),
            BetaPriorId::Laplace2_5 => BetaPriorSpec::laplace(2.5),
            BetaPriorId::R2Half => BetaPriorSpec::r_squared(0.5, 0.5),
        }
    }
}

/// Registered cut-point prior names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CutpointPriorId {
    Dir1,
    DirHalf,
    Dir0_001,
    DirRecip,
    NormalCuts100,
}

impl CutpointPriorId {
    pub const ALL: [CutpointPriorId; 5] = [
        CutpointPriorId::Dir1,
        CutpointPriorId::DirHalf,
        CutpointPriorId::Dir0_001,
        CutpointPriorId::DirRecip,
        CutpointPriorId::NormalCuts100,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CutpointPriorId::Dir1 => "dir_1",
            CutpointPriorId::DirHalf => "dir_0.5",
            CutpointPriorId::Dir0_001 => "dir_0.001",
            CutpointPriorId::DirRecip => "dir_recip",
            CutpointPriorId::NormalCuts100 => "normal_cuts_100",
        }
    }

    /// Resolves the prior for an outcome with `categories` levels
    /// (`dir_recip` uses concentration `1/J`).
    pub fn spec(self, categories: usize) -> CutpointPriorSpec {
        match self {
            CutpointPriorId::Dir1 => CutpointPriorSpec::dirichlet(1.0),
            CutpointPriorId::DirHalf => CutpointPriorSpec::dirichlet(0.5),
            CutpointPriorId::Dir0_001 => CutpointPriorSpec::dirichlet(0.001),
            CutpointPriorId::DirRecip => CutpointPriorSpec::dirichlet(1.0 / categories as f64),
            CutpointPriorId::NormalCuts100 => CutpointPriorSpec::normal(100.0),
        }
    }
}

macro_rules! impl_id_traits {
    ($ty:ty) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                Self::ALL
                    .iter()
                    .copied()
                    .find(|id| id.as_str() == s)
                    .ok_or_else(|| Error::UnknownPrior(s.to_string()))
            }
        }

        impl TryFrom<String> for $ty {
            type Error = Error;

            fn try_from(s: String) -> Result<Self> {
                s.parse()
            }
        }

        impl From<$ty> for String {
            fn from(id: $ty) -> String {
                id.as_str().to_string()
            }
        }
    };
}

impl_id_traits!(BetaPriorId);
impl_id_traits!(CutpointPriorId);

/// A (treatment-effect prior, cut-point prior) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PriorPair {
    pub beta: BetaPriorId,
    pub cut: CutpointPriorId,
}

impl PriorPair {
    pub fn new(beta: BetaPriorId, cut: CutpointPriorId) -> Self {
        Self { beta, cut }
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.beta, self.cut)
    }
}
