use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::wire::payload::StatusReport;
use crate::wire::SimTime;

pub const BUDGET_WINDOW: SimTime = SimTime(60_000_000_000);

/// Templates whose channel the agent reports, plus every resource check.
///
/// With no report, or an empty one, every template is relevant.
pub fn select_relevant_templates(last_status: Option<&StatusReport>, catalog: &Catalog) -> BTreeSet<u8> {
    let all = || catalog.templates().iter().map(|t| t.id).collect();
    let Some(status) = last_status.filter(|s| !s.readings.is_empty()) else {
        return all();
    };
    catalog
        .templates()
        .iter()
        .filter(|t| t.channel.is_none_or(|c| status.channels().any(|r| r == c)))
        .map(|t| t.id)
        .collect()
}

/// Sliding one-minute limit on TEST_BATCH dispatches.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchBudget {
    per_window: u32,
    recent: VecDeque<SimTime>,
}

impl BatchBudget {
    pub fn new(per_window: u32) -> BatchBudget {
        BatchBudget {
            per_window,
            recent: VecDeque::new(),
        }
    }

    fn expire(&mut self, now: SimTime) {
        while self
            .recent
            .front()
            .is_some_and(|&t| t.plus(BUDGET_WINDOW.0) <= now)
        {
            self.recent.pop_front();
        }
    }

    /// Dispatches counted against the window ending at `now`.
    pub fn used(&mut self, now: SimTime) -> u32 {
        self.expire(now);
        self.recent.len() as u32
    }

    pub fn available(&mut self, now: SimTime) -> bool {
        self.used(now) < self.per_window
    }

    /// Earliest time at which one more dispatch fits.
    pub fn next_slot(&mut self, now: SimTime) -> SimTime {
        if self.available(now) {
            return now;
        }
        let idx = self.recent.len() - self.per_window as usize;
        self.recent[idx].plus(BUDGET_WINDOW.0)
    }

    pub fn record(&mut self, at: SimTime) {
        self.recent.push_back(at);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateDecision {
    Allow,
    DeferCritical,
    DeferBusy,
    DeferBudget,
}

impl GateDecision {
    pub fn allows(self) -> bool {
        self == GateDecision::Allow
    }
}

/// Defers while the last known status is critical or busy, or the budget is spent.
pub fn safety_gate(last_status: Option<&StatusReport>, budget_available: bool) -> GateDecision {
    match last_status {
        Some(s) if s.critical => GateDecision::DeferCritical,
        Some(s) if s.busy => GateDecision::DeferBusy,
        _ if !budget_available => GateDecision::DeferBudget,
        _ => GateDecision::Allow,
    }
}
