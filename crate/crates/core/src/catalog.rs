//! The twenty unary test-case templates and their ground-truth predicates.
//!
//! Every template is a closed-interval check `input_min <= value <= input_max`
//! over one scalar input. Range checks take a sensor reading, rate-of-change
//! checks take a per-tick delta, and resource checks take a measured system
//! quantity. The agent firmware keeps its own, possibly faulty, copy of these
//! bounds; [`evaluate_template`] is the oracle it is judged against.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::Genome;

/// Number of templates in the catalog, and therefore the genome length.
pub const TEMPLATE_COUNT: usize = 20;

/// Default cap for the energy-per-batch resource check, in microjoules.
pub const DEFAULT_ENERGY_CAP_UJ: f64 = 2000.0;

/// Generation ranges extend the valid range by this fraction of its width on each side.
pub const GENERATION_WIDENING: f64 = 0.5;

/// Sensor channels an agent under test can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Temperature,
    Humidity,
    Co,
    Co2,
    Pressure,
    Light,
    SoilMoisture,
    Battery,
    LoopLatency,
    FreeMemory,
}

impl Channel {
    pub const ALL: [Channel; 10] = [
        Channel::Temperature,
        Channel::Humidity,
        Channel::Co,
        Channel::Co2,
        Channel::Pressure,
        Channel::Light,
        Channel::SoilMoisture,
        Channel::Battery,
        Channel::LoopLatency,
        Channel::FreeMemory,
    ];

    /// Wire identifier used in STATUS payloads.
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Channel> {
        Channel::ALL.get(usize::from(id)).copied()
    }

    pub fn unit(self) -> &'static str {
        match self {
            Channel::Temperature => "degC",
            Channel::Humidity => "%RH",
            Channel::Co | Channel::Co2 => "ppm",
            Channel::Pressure => "hPa",
            Channel::Light => "lux",
            Channel::SoilMoisture => "%",
            Channel::Battery => "V",
            Channel::LoopLatency => "ms",
            Channel::FreeMemory => "bytes",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Channel::Temperature => "temperature",
            Channel::Humidity => "humidity",
            Channel::Co => "co",
            Channel::Co2 => "co2",
            Channel::Pressure => "pressure",
            Channel::Light => "light",
            Channel::SoilMoisture => "soil_moisture",
            Channel::Battery => "battery",
            Channel::LoopLatency => "loop_latency",
            Channel::FreeMemory => "free_memory",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateKind {
    RangeCheck,
    RateOfChangeCheck,
    ResourceCheck,
}

/// One parameterized validity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestTemplate {
    pub id: u8,
    pub name: &'static str,
    /// Sensor channel the check concerns; `None` for link and system resource checks.
    pub channel: Option<Channel>,
    pub input_min: f64,
    pub input_max: f64,
    pub kind: TemplateKind,
}

impl TestTemplate {
    pub fn accepts(&self, value: f64) -> bool {
        value >= self.input_min && value <= self.input_max
    }

    /// Lower end of the range the search may draw inputs from.
    pub fn generation_floor(&self) -> f64 {
        self.input_min - GENERATION_WIDENING * (self.input_max - self.input_min)
    }

    /// Upper end of the range the search may draw inputs from.
    pub fn generation_ceiling(&self) -> f64 {
        self.input_max + GENERATION_WIDENING * (self.input_max - self.input_min)
    }

    pub fn generation_width(&self) -> f64 {
        self.generation_ceiling() - self.generation_floor()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Error,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
            Outcome::Error => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Outcome> {
        match code {
            0 => Some(Outcome::Pass),
            1 => Some(Outcome::Fail),
            2 => Some(Outcome::Error),
            _ => None,
        }
    }

    pub fn from_bool(pass: bool) -> Outcome {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub template_id: u8,
    pub value: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BatchError {
    #[error("batch entry {index}: unknown template id {template_id}")]
    UnknownTemplate { index: usize, template_id: u8 },
    #[error("batch entry {index}: non-finite value for template {template_id}")]
    NonFinite { index: usize, template_id: u8 },
}

/// The full template table. Only the energy-per-batch cap is configurable.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    templates: Vec<TestTemplate>,
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog::with_energy_cap(DEFAULT_ENERGY_CAP_UJ)
    }
}

impl Catalog {
    pub fn standard() -> Catalog {
        Catalog::default()
    }

    pub fn with_energy_cap(energy_cap_uj: f64) -> Catalog {
        use Channel::*;
        use TemplateKind::*;

        let t = |id, name, channel, input_min, input_max, kind| TestTemplate {
            id,
            name,
            channel,
            input_min,
            input_max,
            kind,
        };
        let templates = vec![
            t(0, "temperature_range", Some(Temperature), -40.0, 85.0, RangeCheck),
            t(1, "humidity_range", Some(Humidity), 0.0, 100.0, RangeCheck),
            t(2, "co_range", Some(Co), 0.0, 50.0, RangeCheck),
            t(3, "co2_range", Some(Co2), 400.0, 5000.0, RangeCheck),
            t(4, "pressure_range", Some(Pressure), 870.0, 1085.0, RangeCheck),
            t(5, "light_range", Some(Light), 0.0, 120_000.0, RangeCheck),
            t(
                6,
                "soil_moisture_range",
                Some(SoilMoisture),
                0.0,
                100.0,
                RangeCheck,
            ),
            t(7, "battery_range", Some(Battery), 3.0, 5.5, RangeCheck),
            t(8, "loop_latency_range", Some(LoopLatency), 0.0, 100.0, RangeCheck),
            t(9, "free_memory_floor", Some(FreeMemory), 256.0, 2.0e9, RangeCheck),
            t(
                10,
                "temperature_rate",
                Some(Temperature),
                -2.0,
                2.0,
                RateOfChangeCheck,
            ),
            t(11, "humidity_rate", Some(Humidity), -5.0, 5.0, RateOfChangeCheck),
            t(12, "co_rate", Some(Co), -10.0, 10.0, RateOfChangeCheck),
            t(13, "pressure_rate", Some(Pressure), -1.0, 1.0, RateOfChangeCheck),
            t(
                14,
                "light_rate",
                Some(Light),
                -10_000.0,
                10_000.0,
                RateOfChangeCheck,
            ),
            t(15, "frame_rtt", None, 0.0, 200.0, ResourceCheck),
            t(16, "retransmit_count", None, 0.0, 3.0, ResourceCheck),
            t(17, "payload_length", None, 0.0, 250.0, ResourceCheck),
            t(18, "queue_depth", None, 0.0, 8.0, ResourceCheck),
            t(19, "energy_per_batch", None, 0.0, energy_cap_uj, ResourceCheck),
        ];
        Catalog { templates }
    }

    pub fn templates(&self) -> &[TestTemplate] {
        &self.templates
    }

    pub fn get(&self, id: u8) -> Option<&TestTemplate> {
        self.templates.get(usize::from(id))
    }

    pub fn evaluate(&self, template_id: u8, value: f64) -> Verdict {
        let outcome = match self.get(template_id) {
            Some(_) if !value.is_finite() => Outcome::Error,
            Some(template) => Outcome::from_bool(template.accepts(value)),
            None => Outcome::Error,
        };
        Verdict {
            template_id,
            value,
            outcome,
        }
    }

    /// Validates a received batch: every id known, every value finite.
    pub fn decode_batch(&self, pairs: Vec<(u8, f64)>) -> Result<Vec<(u8, f64)>, BatchError> {
        for (index, &(template_id, value)) in pairs.iter().enumerate() {
            if self.get(template_id).is_none() {
                return Err(BatchError::UnknownTemplate { index, template_id });
            }
            if !value.is_finite() {
                return Err(BatchError::NonFinite { index, template_id });
            }
        }
        Ok(pairs)
    }

    /// Hex SHA-256 of the line-delimited catalog dump; identifies the table in run logs.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for line in self.dump_lines() {
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }

    /// One JSON object per template, in id order.
    pub fn dump_lines(&self) -> Vec<String> {
        self.templates
            .iter()
            .map(|t| serde_json::to_string(t).expect("template serializes"))
            .collect()
    }
}

/// The standard twenty templates, ordered by id.
pub fn catalog() -> Vec<TestTemplate> {
    Catalog::standard().templates
}

/// Ground-truth verdict for `value` under template `template_id` of the standard catalog.
pub fn evaluate_template(template_id: u8, value: f64) -> Verdict {
    Catalog::standard().evaluate(template_id, value)
}

/// Projects the active genes of `genome` into `(template_id, value)` pairs, ascending by id.
pub fn encode_batch(genome: &Genome, active_ids: &BTreeSet<u8>) -> Vec<(u8, f64)> {
    active_ids
        .iter()
        .filter_map(|&id| genome.genes().get(usize::from(id)).map(|&v| (id, v)))
        .collect()
}

pub fn decode_batch(pairs: Vec<(u8, f64)>) -> Result<Vec<(u8, f64)>, BatchError> {
    Catalog::standard().decode_batch(pairs)
}
