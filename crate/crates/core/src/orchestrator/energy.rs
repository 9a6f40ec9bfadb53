use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CampaignError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EnergyEvent {
    TxByte,
    RxByte,
    EvalTest,
    GaGeneration,
}

impl EnergyEvent {
    pub const ALL: [EnergyEvent; 4] = [
        EnergyEvent::TxByte,
        EnergyEvent::RxByte,
        EnergyEvent::EvalTest,
        EnergyEvent::GaGeneration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnergyEvent::TxByte => "tx_byte",
            EnergyEvent::RxByte => "rx_byte",
            EnergyEvent::EvalTest => "eval_test",
            EnergyEvent::GaGeneration => "ga_generation",
        }
    }
}

impl fmt::Display for EnergyEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnergyEvent {
    type Err = CampaignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnergyEvent::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CampaignError::UnknownEnergyEvent(s.to_string()))
    }
}

/// Cost of one event of each type, in microjoules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyCosts {
    pub tx_byte: u64,
    pub rx_byte: u64,
    pub eval_test: u64,
    pub ga_generation: u64,
}

impl Default for EnergyCosts {
    fn default() -> Self {
        EnergyCosts {
            tx_byte: 1,
            rx_byte: 1,
            eval_test: 50,
            ga_generation: 500,
        }
    }
}

impl EnergyCosts {
    pub fn cost(&self, event: EnergyEvent) -> u64 {
        match event {
            EnergyEvent::TxByte => self.tx_byte,
            EnergyEvent::RxByte => self.rx_byte,
            EnergyEvent::EvalTest => self.eval_test,
            EnergyEvent::GaGeneration => self.ga_generation,
        }
    }
}

/// Cumulative event counts and their total cost. Integer microjoules keep the
/// total an exact function of the counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyLedger {
    pub tx_byte: u64,
    pub rx_byte: u64,
    pub eval_test: u64,
    pub ga_generation: u64,
    pub total_uj: u64,
}

impl EnergyLedger {
    pub fn count(&self, event: EnergyEvent) -> u64 {
        match event {
            EnergyEvent::TxByte => self.tx_byte,
            EnergyEvent::RxByte => self.rx_byte,
            EnergyEvent::EvalTest => self.eval_test,
            EnergyEvent::GaGeneration => self.ga_generation,
        }
    }

    fn count_mut(&mut self, event: EnergyEvent) -> &mut u64 {
        match event {
            EnergyEvent::TxByte => &mut self.tx_byte,
            EnergyEvent::RxByte => &mut self.rx_byte,
            EnergyEvent::EvalTest => &mut self.eval_test,
            EnergyEvent::GaGeneration => &mut self.ga_generation,
        }
    }

    pub fn account(&mut self, event: EnergyEvent, count: u64, costs: &EnergyCosts) {
        *self.count_mut(event) += count;
        self.total_uj += count * costs.cost(event);
    }

    /// [`account`](Self::account) with the event given by name.
    pub fn account_named(
        &mut self,
        event: &str,
        count: u64,
        costs: &EnergyCosts,
    ) -> Result<(), CampaignError> {
        self.account(event.parse()?, count, costs);
        Ok(())
    }

    /// Σ count × cost, computed from scratch.
    pub fn recompute_total(&self, costs: &EnergyCosts) -> u64 {
        EnergyEvent::ALL
            .iter()
            .map(|&e| self.count(e) * costs.cost(e))
            .sum()
    }
}
