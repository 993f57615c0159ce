use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::GameRecord;

/// Terminal reward of an episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "lambda", rename_all = "snake_case")]
pub enum RewardSpec {
    /// `1[c(X) = Z]`
    CoopOnly,
    /// `1[o(X) = Y]`
    ObjectOnly,
    /// `λ·1[o(X) = Y] + (1 − λ)·1[c(X) = Z]`
    Mixed(f64),
}

impl RewardSpec {
    pub fn mixed(lambda: f64) -> Result<Self> {
        let r = RewardSpec::Mixed(lambda);
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RewardSpec::Mixed(l) if !(0.0..=1.0).contains(&l) => Err(Error::InvalidConfig(format!(
                "mixing weight must lie in [0, 1], got {l}"
            ))),
            _ => Ok(()),
        }
    }

    /// Weight on the object reward.
    pub fn object_weight(&self) -> f64 {
        match *self {
            RewardSpec::CoopOnly => 0.0,
            RewardSpec::ObjectOnly => 1.0,
            RewardSpec::Mixed(l) => l,
        }
    }

    pub fn from_outcomes(&self, object_correct: bool, coop_correct: bool) -> f64 {
        let o = if object_correct { 1.0 } else { 0.0 };
        let c = if coop_correct { 1.0 } else { 0.0 };
        match *self {
            RewardSpec::CoopOnly => c,
            RewardSpec::ObjectOnly => o,
            RewardSpec::Mixed(l) => l * o + (1.0 - l) * c,
        }
    }

    /// Reward of a finished record; errors if a guess is missing.
    pub fn reward(&self, record: &GameRecord) -> Result<f64> {
        let (Some(o), Some(c)) = (record.object_correct(), record.coop_correct()) else {
            return Err(Error::InvalidRecord(format!(
                "record with seed {} has no guesses",
                record.seed
            )));
        };
        Ok(self.from_outcomes(o, c))
    }
}

impl fmt::Display for RewardSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardSpec::CoopOnly => f.write_str("coop"),
            RewardSpec::ObjectOnly => f.write_str("object"),
            RewardSpec::Mixed(l) => write!(f, "mixed:{l}"),
        }
    }
}
