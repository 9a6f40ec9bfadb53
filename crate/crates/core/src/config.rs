//! Campaign configuration, read from TOML.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::DEFAULT_ENERGY_CAP_UJ;
use crate::orchestrator::EnergyCosts;
use crate::search::{FitnessWeights, NoveltyParams, SearchParams};
use crate::wire::{FaultSpec, LinkConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    GenerationalGa,
    /// One evaluation per generation; `search.generations` is the evaluation budget.
    OnePlusOne,
    /// Fresh uniform population every generation, scored on failures only.
    RandomSearch,
}

impl SearchMode {
    pub fn name(self) -> &'static str {
        match self {
            SearchMode::GenerationalGa => "generational-ga",
            SearchMode::OnePlusOne => "one-plus-one",
            SearchMode::RandomSearch => "random-search",
        }
    }
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SearchMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SearchMode::GenerationalGa,
            SearchMode::OnePlusOne,
            SearchMode::RandomSearch,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| ConfigError::Invalid {
            key: "mode".into(),
            reason: format!("unknown mode {s:?}"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub mode: SearchMode,
    /// `builtin:<name>` or a scenario file path relative to the config file.
    pub scenario: String,
    /// Maximum TEST_BATCH dispatches in any 60 s of simulated time.
    pub budget_per_minute: u32,
    pub stop_on_first_disagreement: bool,
    /// Longest a single dispatch may wait on the safety gate before the campaign aborts.
    pub max_defer_ms: f64,
    /// Upper bound of the per-batch energy template.
    pub energy_cap_uj: f64,
    pub search: SearchParams,
    pub novelty: NoveltyParams,
    pub weights: FitnessWeights,
    pub link: LinkConfig,
    pub faults: FaultSpec,
    pub energy: EnergyCosts,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            mode: SearchMode::GenerationalGa,
            scenario: "builtin:nominal".into(),
            budget_per_minute: 30,
            stop_on_first_disagreement: false,
            max_defer_ms: 600_000.0,
            energy_cap_uj: DEFAULT_ENERGY_CAP_UJ,
            search: SearchParams::default(),
            novelty: NoveltyParams::default(),
            weights: FitnessWeights::default(),
            link: LinkConfig::default(),
            faults: FaultSpec::default(),
            energy: EnergyCosts::default(),
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.budget_per_minute == 0 {
            return Err(invalid("budget_per_minute", "must be positive"));
        }
        if !(self.max_defer_ms > 0.0 && self.max_defer_ms.is_finite()) {
            return Err(invalid("max_defer_ms", "must be positive and finite"));
        }
        if !(self.energy_cap_uj > 0.0 && self.energy_cap_uj.is_finite()) {
            return Err(invalid("energy_cap_uj", "must be positive and finite"));
        }
        if self.scenario.is_empty() {
            return Err(invalid("scenario", "must not be empty"));
        }
        let search = match self.mode {
            SearchMode::OnePlusOne => self.search.validate(),
            _ => self.search.validate_generational(),
        };
        search.map_err(|e| match e {
            crate::search::SearchError::InvalidParam { name, reason } => invalid(name, reason),
            other => invalid("search", other.to_string()),
        })?;
        self.novelty.validate().map_err(|e| match e {
            crate::search::SearchError::InvalidParam { name, reason } => invalid(name, reason),
            other => invalid("novelty", other.to_string()),
        })?;
        self.link.validate().map_err(wire_invalid)?;
        self.faults.validate().map_err(wire_invalid)?;
        // TOML integers are signed 64-bit.
        for (key, seed) in [
            ("search.rng_seed", self.search.rng_seed),
            ("faults.rng_seed", self.faults.rng_seed),
        ] {
            if i64::try_from(seed).is_err() {
                return Err(invalid(key, "must not exceed 2^63 - 1"));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn wire_invalid(e: crate::wire::WireError) -> ConfigError {
    match e {
        crate::wire::WireError::InvalidConfig { name, reason } => invalid(name, reason),
        other => invalid("link", other.to_string()),
    }
}

/// Parses a TOML campaign config. Omitted keys take their defaults; unknown keys are errors.
pub fn parse_config(text: &str) -> Result<CampaignConfig, ConfigError> {
    let config: CampaignConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}
