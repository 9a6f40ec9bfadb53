use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::catalog::Outcome;

/// Weights of the failure and novelty terms, normalized to sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct FitnessWeights {
    alpha_fail: f64,
    alpha_novelty: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    #[serde(default = "default_alpha_fail")]
    alpha_fail: f64,
    #[serde(default = "default_alpha_novelty")]
    alpha_novelty: f64,
}

fn default_alpha_fail() -> f64 {
    0.7
}

fn default_alpha_novelty() -> f64 {
    0.3
}

impl TryFrom<RawWeights> for FitnessWeights {
    type Error = SearchError;

    fn try_from(raw: RawWeights) -> Result<Self, Self::Error> {
        FitnessWeights::new(raw.alpha_fail, raw.alpha_novelty)
    }
}

impl From<FitnessWeights> for RawWeights {
    fn from(w: FitnessWeights) -> Self {
        RawWeights {
            alpha_fail: w.alpha_fail,
            alpha_novelty: w.alpha_novelty,
        }
    }
}

impl Default for FitnessWeights {
    fn default() -> Self {
        FitnessWeights {
            alpha_fail: default_alpha_fail(),
            alpha_novelty: default_alpha_novelty(),
        }
    }
}

impl FitnessWeights {
    /// Accepts any non-negative, finite pair with a positive sum and rescales it.
    ///
    /// Pairs whose sum is already within 1e-12 of one are kept verbatim so that
    /// re-normalizing a serialized configuration is the identity.
    pub fn new(alpha_fail: f64, alpha_novelty: f64) -> Result<FitnessWeights, SearchError> {
        for (name, v) in [("alpha_fail", alpha_fail), ("alpha_novelty", alpha_novelty)] {
            if !v.is_finite() || v < 0.0 {
                return Err(SearchError::InvalidWeight { name, value: v });
            }
        }
        let sum = alpha_fail + alpha_novelty;
        if sum <= 0.0 {
            return Err(SearchError::ZeroWeights);
        }
        if (sum - 1.0).abs() <= 1e-12 {
            return Ok(FitnessWeights {
                alpha_fail,
                alpha_novelty,
            });
        }
        Ok(FitnessWeights {
            alpha_fail: alpha_fail / sum,
            alpha_novelty: alpha_novelty / sum,
        })
    }

    pub fn alpha_fail(&self) -> f64 {
        self.alpha_fail
    }

    pub fn alpha_novelty(&self) -> f64 {
        self.alpha_novelty
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub fail_frac: f64,
    pub novelty_raw: f64,
    pub novelty_norm: f64,
    pub ff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailScore {
    pub fraction: f64,
    /// No pairs were supplied; the fraction defaults to zero.
    pub empty: bool,
}

/// Fraction of `(oracle, agent)` outcome pairs on which the agent disagrees with ground truth.
pub fn tc_fail_score(pairs: &[(Outcome, Outcome)]) -> FailScore {
    if pairs.is_empty() {
        return FailScore {
            fraction: 0.0,
            empty: true,
        };
    }
    let failures = pairs.iter().filter(|(oracle, agent)| oracle != agent).count();
    FailScore {
        fraction: failures as f64 / pairs.len() as f64,
        empty: false,
    }
}

/// Weighted sum of the failure fraction and the novelty score scaled by `sqrt(dim)`.
pub fn fitness(
    fail_frac: f64,
    novelty_raw: f64,
    weights: &FitnessWeights,
    dim: usize,
) -> Result<FitnessReport, SearchError> {
    if !(0.0..=1.0).contains(&fail_frac) {
        return Err(SearchError::InvalidScore {
            name: "fail_frac",
            value: fail_frac,
        });
    }
    if !(novelty_raw >= 0.0 && novelty_raw.is_finite()) {
        return Err(SearchError::InvalidScore {
            name: "novelty_raw",
            value: novelty_raw,
        });
    }
    let novelty_norm = (novelty_raw / (dim as f64).sqrt()).min(1.0);
    let ff = weights.alpha_fail * fail_frac + weights.alpha_novelty * novelty_norm;
    Ok(FitnessReport {
        fail_frac,
        novelty_raw,
        novelty_norm,
        ff,
    })
}
