//! Scenario files: environment dynamics, firmware faults and an injection schedule.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::catalog::{Catalog, Channel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    pub channel: Channel,
    pub initial: f64,
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentModel {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tick_ms")]
    pub tick_ms: f64,
    pub channels: Vec<ChannelModel>,
}

fn default_tick_ms() -> f64 {
    1000.0
}

impl Default for EnvironmentModel {
    /// A quiet indoor room: every channel present, all readings comfortable.
    fn default() -> Self {
        use Channel::*;
        let c = |channel, initial, drift, noise_sigma, min, max| ChannelModel {
            channel,
            initial,
            drift,
            noise_sigma,
            min,
            max,
        };
        EnvironmentModel {
            seed: 0,
            tick_ms: default_tick_ms(),
            channels: vec![
                c(Temperature, 22.0, 0.0, 0.05, 19.0, 25.0),
                c(Humidity, 45.0, 0.0, 0.2, 30.0, 60.0),
                c(Co, 5.0, 0.0, 0.1, 0.0, 20.0),
                c(Co2, 600.0, 0.0, 5.0, 400.0, 1200.0),
                c(Pressure, 1013.0, 0.0, 0.1, 1000.0, 1025.0),
                c(Light, 300.0, 0.0, 10.0, 0.0, 2000.0),
                c(SoilMoisture, 40.0, 0.0, 0.2, 20.0, 60.0),
                c(Battery, 4.8, -1e-5, 0.001, 3.6, 5.0),
                c(LoopLatency, 12.0, 0.0, 0.5, 5.0, 40.0),
                c(FreeMemory, 1500.0, 0.0, 5.0, 800.0, 2048.0),
            ],
        }
    }
}

impl EnvironmentModel {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.tick_ms > 0.0 && self.tick_ms.is_finite()) {
            return Err(AgentError::InvalidScenario(
                "environment.tick_ms must be positive".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for m in &self.channels {
            if !seen.insert(m.channel) {
                return Err(AgentError::InvalidScenario(format!(
                    "channel {} declared twice",
                    m.channel
                )));
            }
            let finite = [m.initial, m.drift, m.noise_sigma, m.min, m.max]
                .iter()
                .all(|v| v.is_finite());
            if !finite || m.noise_sigma < 0.0 {
                return Err(AgentError::InvalidScenario(format!(
                    "channel {}: parameters must be finite with non-negative noise",
                    m.channel
                )));
            }
            if m.min > m.max || m.initial < m.min || m.initial > m.max {
                return Err(AgentError::InvalidScenario(format!(
                    "channel {}: need min <= initial <= max",
                    m.channel
                )));
            }
        }
        Ok(())
    }

    pub fn tick_ns(&self) -> u64 {
        (self.tick_ms * 1e6).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    /// Upper bound moved by `magnitude`.
    BoundaryShift,
    InvertedComparison,
    StuckPass,
    StuckFail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmwareFault {
    pub template_id: u8,
    pub kind: FaultKind,
    #[serde(default)]
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledInjection {
    pub channel: Channel,
    pub value: f64,
    pub at_tick: u64,
    pub duration_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub environment: EnvironmentModel,
    #[serde(default)]
    pub faults: Vec<FirmwareFault>,
    #[serde(default)]
    pub injections: Vec<ScheduledInjection>,
    /// Time the firmware spends per test; the agent reports busy meanwhile.
    #[serde(default = "default_eval_ms")]
    pub eval_ms_per_test: f64,
}

fn default_eval_ms() -> f64 {
    0.5
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "nominal".into(),
            environment: EnvironmentModel::default(),
            faults: Vec::new(),
            injections: Vec::new(),
            eval_ms_per_test: default_eval_ms(),
        }
    }
}

pub const BUILTIN_SCENARIOS: [&str; 4] = ["nominal", "boundary-shift-t0", "co-spike", "inverted-humidity"];

impl Scenario {
    /// A built-in scenario by name.
    pub fn builtin(name: &str) -> Option<Scenario> {
        let base = Scenario {
            name: name.to_string(),
            ..Scenario::default()
        };
        match name {
            "nominal" => Some(base),
            "boundary-shift-t0" => Some(Scenario {
                faults: vec![FirmwareFault {
                    template_id: 0,
                    kind: FaultKind::BoundaryShift,
                    magnitude: 5.0,
                }],
                ..base
            }),
            "co-spike" => Some(Scenario {
                injections: vec![ScheduledInjection {
                    channel: Channel::Co,
                    value: 100.0,
                    at_tick: 100,
                    duration_ticks: 101,
                }],
                ..base
            }),
            "inverted-humidity" => Some(Scenario {
                faults: vec![FirmwareFault {
                    template_id: 1,
                    kind: FaultKind::InvertedComparison,
                    magnitude: 0.0,
                }],
                ..base
            }),
            _ => None,
        }
    }

    pub fn parse(text: &str) -> Result<Scenario, AgentError> {
        let s: Scenario = toml::from_str(text).map_err(|e| AgentError::Parse(e.message().to_string()))?;
        s.validate(&Catalog::standard())?;
        Ok(s)
    }

    /// Resolves `builtin:<name>` or reads a scenario file relative to `base_dir`.
    pub fn resolve(reference: &str, base_dir: &Path) -> Result<Scenario, AgentError> {
        if let Some(name) = reference.strip_prefix("builtin:") {
            return Scenario::builtin(name).ok_or_else(|| AgentError::UnknownScenario(reference.to_string()));
        }
        let path = base_dir.join(reference);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| AgentError::UnknownScenario(format!("{}: {e}", path.display())))?;
        Scenario::parse(&text)
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<(), AgentError> {
        self.environment.validate()?;
        let mut faulted = BTreeSet::new();
        for f in &self.faults {
            if catalog.get(f.template_id).is_none() {
                return Err(AgentError::InvalidScenario(format!(
                    "fault on unknown template {}",
                    f.template_id
                )));
            }
            if !faulted.insert(f.template_id) {
                return Err(AgentError::InvalidScenario(format!(
                    "more than one fault on template {}",
                    f.template_id
                )));
            }
            if !f.magnitude.is_finite() {
                return Err(AgentError::InvalidScenario(format!(
                    "fault on template {} has a non-finite magnitude",
                    f.template_id
                )));
            }
        }
        for inj in &self.injections {
            if !self.environment.channels.iter().any(|m| m.channel == inj.channel) {
                return Err(AgentError::UnknownChannel(inj.channel));
            }
            if !inj.value.is_finite() {
                return Err(AgentError::InvalidScenario(format!(
                    "injection on {} has a non-finite value",
                    inj.channel
                )));
            }
        }
        if !(self.eval_ms_per_test >= 0.0 && self.eval_ms_per_test.is_finite()) {
            return Err(AgentError::InvalidScenario(
                "eval_ms_per_test must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}
