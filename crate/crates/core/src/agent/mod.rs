//! The agent under test: a simulated environmental monitor with sensor
//! channels, injectable readings and a firmware copy of the test predicates
//! that may carry seeded defects.

mod scenario;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

pub use scenario::{
    ChannelModel, EnvironmentModel, FaultKind, FirmwareFault, Scenario, ScheduledInjection, BUILTIN_SCENARIOS,
};

use crate::catalog::{Catalog, Channel, Outcome};
use crate::wire::payload::{decode_test_batch, encode_result, encode_status, StatusReport};
use crate::wire::{Endpoint, Frame, FrameType, SimTime};

/// Comfortable indoor temperature band, degC.
pub const COMFORT_TEMPERATURE: (f64, f64) = (18.0, 27.0);
/// CO concentration above which the air is dangerous, ppm.
pub const CO_DANGER_PPM: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("channel {0} is not simulated by this agent")]
    UnknownChannel(Channel),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("unknown scenario {0}")]
    UnknownScenario(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveStatus {
    Nominal,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Behavior {
    Normal,
    Inverted,
    StuckPass,
    StuckFail,
}

/// The firmware's own copy of one template predicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirmwarePredicate {
    pub lo: f64,
    pub hi: f64,
    pub behavior: Behavior,
}

impl FirmwarePredicate {
    pub fn evaluate(&self, value: f64) -> Outcome {
        if !value.is_finite() {
            return Outcome::Error;
        }
        let inside = value >= self.lo && value <= self.hi;
        match self.behavior {
            Behavior::Normal => Outcome::from_bool(inside),
            Behavior::Inverted => Outcome::from_bool(!inside),
            Behavior::StuckPass => Outcome::Pass,
            Behavior::StuckFail => Outcome::Fail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Firmware {
    predicates: BTreeMap<u8, FirmwarePredicate>,
}

impl Firmware {
    /// Copies the catalog bounds and applies at most one fault per template.
    pub fn from_catalog(catalog: &Catalog, faults: &[FirmwareFault]) -> Result<Firmware, AgentError> {
        let mut predicates: BTreeMap<u8, FirmwarePredicate> = catalog
            .templates()
            .iter()
            .map(|t| {
                (
                    t.id,
                    FirmwarePredicate {
                        lo: t.input_min,
                        hi: t.input_max,
                        behavior: Behavior::Normal,
                    },
                )
            })
            .collect();
        let mut seen = std::collections::BTreeSet::new();
        for f in faults {
            if !seen.insert(f.template_id) {
                return Err(AgentError::InvalidScenario(format!(
                    "more than one fault on template {}",
                    f.template_id
                )));
            }
            let p = predicates.get_mut(&f.template_id).ok_or_else(|| {
                AgentError::InvalidScenario(format!("fault on unknown template {}", f.template_id))
            })?;
            match f.kind {
                FaultKind::BoundaryShift => p.hi += f.magnitude,
                FaultKind::InvertedComparison => p.behavior = Behavior::Inverted,
                FaultKind::StuckPass => p.behavior = Behavior::StuckPass,
                FaultKind::StuckFail => p.behavior = Behavior::StuckFail,
            }
        }
        Ok(Firmware { predicates })
    }

    pub fn predicate(&self, template_id: u8) -> Option<&FirmwarePredicate> {
        self.predicates.get(&template_id)
    }

    pub fn evaluate(&self, template_id: u8, value: f64) -> Outcome {
        self.predicates
            .get(&template_id)
            .map_or(Outcome::Error, |p| p.evaluate(value))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Injection {
    pub value: f64,
    pub remaining_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentState {
    /// Underlying readings produced by the environment dynamics.
    pub channels: BTreeMap<Channel, f64>,
    pub injected: BTreeMap<Channel, Injection>,
    pub firmware: Firmware,
    pub clock_ticks: u64,
    pub busy_until: SimTime,
}

impl AgentState {
    /// The reading the agent acts on: an active injection wins over the environment.
    pub fn effective(&self, channel: Channel) -> Option<f64> {
        match self.injected.get(&channel) {
            Some(inj) if inj.remaining_ticks > 0 => Some(inj.value),
            _ => self.channels.get(&channel).copied(),
        }
    }

    pub fn local_objective_status(&self) -> ObjectiveStatus {
        let too_hot_or_cold = self
            .effective(Channel::Temperature)
            .is_some_and(|t| t < COMFORT_TEMPERATURE.0 || t > COMFORT_TEMPERATURE.1);
        let dangerous_air = self.effective(Channel::Co).is_some_and(|co| co > CO_DANGER_PPM);
        if too_hot_or_cold || dangerous_air {
            ObjectiveStatus::Critical
        } else {
            ObjectiveStatus::Nominal
        }
    }
}

/// An agent under test driven by virtual time.
#[derive(Debug, Clone)]
pub struct Agent {
    state: AgentState,
    model: EnvironmentModel,
    rng: ChaCha8Rng,
    schedule: Vec<ScheduledInjection>,
    catalog: Catalog,
    eval_ns_per_test: u64,
    seq: u8,
    tests_evaluated: u64,
}

impl Agent {
    pub fn new(scenario: &Scenario, catalog: &Catalog) -> Result<Agent, AgentError> {
        scenario.validate(catalog)?;
        let firmware = Firmware::from_catalog(catalog, &scenario.faults)?;
        let channels = scenario
            .environment
            .channels
            .iter()
            .map(|m| (m.channel, m.initial))
            .collect();
        let mut agent = Agent {
            state: AgentState {
                channels,
                injected: BTreeMap::new(),
                firmware,
                clock_ticks: 0,
                busy_until: SimTime::ZERO,
            },
            rng: ChaCha8Rng::seed_from_u64(scenario.environment.seed),
            model: scenario.environment.clone(),
            schedule: scenario.injections.clone(),
            catalog: catalog.clone(),
            eval_ns_per_test: (scenario.eval_ms_per_test * 1e6).round() as u64,
            seq: 0,
            tests_evaluated: 0,
        };
        agent.apply_schedule();
        Ok(agent)
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn tests_evaluated(&self) -> u64 {
        self.tests_evaluated
    }

    pub fn effective(&self, channel: Channel) -> Option<f64> {
        self.state.effective(channel)
    }

    pub fn local_objective_status(&self) -> ObjectiveStatus {
        self.state.local_objective_status()
    }

    fn apply_schedule(&mut self) {
        let tick = self.state.clock_ticks;
        let due: Vec<ScheduledInjection> = self
            .schedule
            .iter()
            .filter(|s| s.at_tick == tick)
            .copied()
            .collect();
        for s in due {
            // Scenario validation guarantees the channel exists.
            let _ = self.inject_sensor_value(s.channel, s.value, s.duration_ticks);
        }
    }

    /// Advances the environment by one tick.
    ///
    /// Noise is drawn for every channel, injected or not, so that injections
    /// never shift the random stream of other channels.
    pub fn step_environment(&mut self) {
        for m in &self.model.channels {
            let noise = if m.noise_sigma > 0.0 {
                Normal::new(0.0, m.noise_sigma)
                    .expect("validated sigma")
                    .sample(&mut self.rng)
            } else {
                0.0
            };
            if let Some(inj) = self.state.injected.get_mut(&m.channel) {
                inj.remaining_ticks = inj.remaining_ticks.saturating_sub(1);
                if inj.remaining_ticks > 0 {
                    continue;
                }
                self.state.injected.remove(&m.channel);
            }
            if let Some(reading) = self.state.channels.get_mut(&m.channel) {
                *reading = (*reading + m.drift + noise).clamp(m.min, m.max);
            }
        }
        self.state.clock_ticks += 1;
        self.apply_schedule();
    }

    /// Steps the environment until its tick count matches virtual time `now`.
    pub fn sync_to(&mut self, now: SimTime) {
        let target = now.0 / self.model.tick_ns();
        while self.state.clock_ticks < target {
            self.step_environment();
        }
    }

    /// Overrides the effective reading of `channel` with `value` for `duration_ticks` ticks.
    pub fn inject_sensor_value(
        &mut self,
        channel: Channel,
        value: f64,
        duration_ticks: u64,
    ) -> Result<(), AgentError> {
        if !self.state.channels.contains_key(&channel) {
            return Err(AgentError::UnknownChannel(channel));
        }
        if duration_ticks == 0 {
            return Ok(());
        }
        self.state.injected.insert(
            channel,
            Injection {
                value,
                remaining_ticks: duration_ticks,
            },
        );
        Ok(())
    }

    pub fn status_report(&self, now: SimTime) -> StatusReport {
        StatusReport {
            critical: self.local_objective_status() == ObjectiveStatus::Critical,
            busy: now < self.state.busy_until,
            readings: self
                .state
                .channels
                .keys()
                .filter_map(|&c| self.effective(c).map(|v| (c, v)))
                .collect(),
        }
    }

    fn next_seq(&mut self) -> u8 {
        let s = self.seq;
        self.seq = self.seq.wrapping_add(1);
        s
    }

    /// Executes a received frame and builds the reply.
    ///
    /// TEST_BATCH frames are judged by the firmware predicates, never the
    /// catalog oracle. STATUS frames are requests for a status report.
    /// Anything else, or a malformed batch, is answered with NACK.
    pub fn handle_frame(&mut self, frame: &Frame, now: SimTime) -> Frame {
        match frame.kind() {
            FrameType::TestBatch => {
                let batch = decode_test_batch(frame.payload())
                    .ok()
                    .and_then(|pairs| self.catalog.decode_batch(pairs).ok());
                let Some(batch) = batch else {
                    return Frame::nack(frame.seq());
                };
                self.state.busy_until = now.plus(self.eval_ns_per_test * batch.len() as u64);
                self.tests_evaluated += batch.len() as u64;
                let results: Vec<(u8, Outcome)> = batch
                    .iter()
                    .map(|&(id, v)| (id, self.state.firmware.evaluate(id, v)))
                    .collect();
                let payload = encode_result(&results).expect("batch size bounded by frame size");
                let seq = self.next_seq();
                Frame::new(FrameType::Result, seq, payload).expect("result fits")
            }
            FrameType::Status => {
                let payload = encode_status(&self.status_report(now)).expect("status fits");
                let seq = self.next_seq();
                Frame::new(FrameType::Status, seq, payload).expect("status fits")
            }
            _ => Frame::nack(frame.seq()),
        }
    }
}

impl Endpoint for Agent {
    fn on_frame(&mut self, frame: &Frame, now: SimTime) -> Option<Frame> {
        self.sync_to(now);
        Some(self.handle_frame(frame, now))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::payload::{decode_result, decode_status, encode_test_batch};

    fn quiet() -> Scenario {
        let mut s = Scenario::default();
        for m in &mut s.environment.channels {
            m.noise_sigma = 0.0;
            m.drift = 0.0;
        }
        s
    }

    fn agent(s: &Scenario) -> Agent {
        Agent::new(s, &Catalog::standard()).unwrap()
    }

    fn batch(seq: u8, tests: &[(u8, f64)]) -> Frame {
        Frame::new(FrameType::TestBatch, seq, encode_test_batch(tests).unwrap()).unwrap()
    }

    #[test]
    fn fixed_point_without_drift_or_noise() {
        let mut a = agent(&quiet());
        let before = a.state().channels.clone();
        for _ in 0..10 {
            a.step_environment();
        }
        assert_eq!(a.state().channels, before);
        assert_eq!(a.state().clock_ticks, 10);
    }

    #[test]
    fn readings_stay_clamped() {
        let mut s = quiet();
        s.environment.channels[0] = ChannelModel {
            channel: Channel::Temperature,
            initial: 25.0,
            drift: 1.0,
            noise_sigma: 0.0,
            min: 19.0,
            max: 25.0,
        };
        let mut a = agent(&s);
        a.step_environment();
        assert_eq!(a.effective(Channel::Temperature), Some(25.0));
    }

    #[test]
    fn trajectories_are_seeded() {
        let run = |seed| {
            let mut s = Scenario::default();
            s.environment.seed = seed;
            let mut a = agent(&s);
            (0..50)
                .map(|_| {
                    a.step_environment();
                    a.state().channels.clone()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn injection_holds_for_exactly_its_duration() {
        let mut a = agent(&quiet());
        a.inject_sensor_value(Channel::Temperature, 120.0, 5).unwrap();
        let mut seen = vec![a.effective(Channel::Temperature).unwrap()];
        for _ in 0..6 {
            a.step_environment();
            seen.push(a.effective(Channel::Temperature).unwrap());
        }
        assert_eq!(seen, vec![120.0, 120.0, 120.0, 120.0, 120.0, 22.0, 22.0]);
        assert_eq!(a.effective(Channel::Humidity), Some(45.0));
    }

    #[test]
    fn zero_duration_and_unknown_channel() {
        let mut a = agent(&quiet());
        a.inject_sensor_value(Channel::Co, 99.0, 0).unwrap();
        assert_eq!(a.effective(Channel::Co), Some(5.0));

        let mut s = quiet();
        s.environment.channels.retain(|m| m.channel != Channel::Light);
        let mut a = agent(&s);
        assert_eq!(
            a.inject_sensor_value(Channel::Light, 1.0, 3),
            Err(AgentError::UnknownChannel(Channel::Light))
        );
    }

    #[test]
    fn local_objective() {
        let mut a = agent(&quiet());
        assert_eq!(a.local_objective_status(), ObjectiveStatus::Nominal);
        a.inject_sensor_value(Channel::Temperature, 35.0, 1).unwrap();
        assert_eq!(a.local_objective_status(), ObjectiveStatus::Critical);
        let mut a = agent(&quiet());
        a.inject_sensor_value(Channel::Co, 100.0, 1).unwrap();
        assert_eq!(a.local_objective_status(), ObjectiveStatus::Critical);
        let mut a = agent(&quiet());
        a.inject_sensor_value(Channel::Co, 50.0, 1).unwrap();
        assert_eq!(a.local_objective_status(), ObjectiveStatus::Nominal);
    }

    #[test]
    fn fault_free_batch_matches_oracle() {
        let mut a = agent(&quiet());
        let reply = a.handle_frame(&batch(0, &[(0, 25.0)]), SimTime::ZERO);
        assert_eq!(reply.kind(), FrameType::Result);
        assert_eq!(decode_result(reply.payload()).unwrap(), vec![(0, Outcome::Pass)]);
    }

    #[test]
    fn boundary_shift_passes_what_the_oracle_fails() {
        let mut s = quiet();
        s.faults.push(FirmwareFault {
            template_id: 0,
            kind: FaultKind::BoundaryShift,
            magnitude: 5.0,
        });
        let mut a = agent(&s);
        let reply = a.handle_frame(&batch(0, &[(0, 87.0)]), SimTime::ZERO);
        assert_eq!(decode_result(reply.payload()).unwrap(), vec![(0, Outcome::Pass)]);
        assert_eq!(crate::catalog::evaluate_template(0, 87.0).outcome, Outcome::Fail);
    }

    #[test]
    fn malformed_batches_and_unexpected_frames_get_nack() {
        let mut a = agent(&quiet());
        let reply = a.handle_frame(&batch(3, &[(0, 1.0), (42, 1.0)]), SimTime::ZERO);
        assert_eq!(reply, Frame::nack(3));
        let garbage = Frame::new(FrameType::TestBatch, 4, vec![9, 9]).unwrap();
        assert_eq!(a.handle_frame(&garbage, SimTime::ZERO), Frame::nack(4));
        assert_eq!(a.handle_frame(&Frame::ack(5), SimTime::ZERO), Frame::nack(5));
    }

    #[test]
    fn status_request_reports_flags_and_readings() {
        let mut a = agent(&quiet());
        a.inject_sensor_value(Channel::Co, 100.0, 10).unwrap();
        let req = Frame::new(FrameType::Status, 0, vec![]).unwrap();
        let reply = a.handle_frame(&req, SimTime::ZERO);
        let report = decode_status(reply.payload()).unwrap();
        assert!(report.critical);
        assert!(!report.busy);
        assert_eq!(report.readings.len(), 10);
        assert_eq!(report.reading(Channel::Co), Some(100.0));
    }

    #[test]
    fn busy_while_evaluating() {
        let mut a = agent(&quiet());
        let tests: Vec<(u8, f64)> = (0..20).map(|i| (i, 0.0)).collect();
        a.handle_frame(&batch(0, &tests), SimTime::ZERO);
        assert!(a.status_report(SimTime::from_ms(5.0)).busy);
        assert!(!a.status_report(SimTime::from_ms(10.0)).busy);
    }

    #[test]
    fn handle_frame_leaves_channels_untouched() {
        let mut a = agent(&Scenario::default());
        for _ in 0..3 {
            a.step_environment();
        }
        let before = a.state().channels.clone();
        let tests: Vec<(u8, f64)> = (0..20).map(|i| (i, 1.0)).collect();
        a.handle_frame(&batch(0, &tests), SimTime::ZERO);
        a.handle_frame(&Frame::new(FrameType::Status, 1, vec![]).unwrap(), SimTime::ZERO);
        assert_eq!(a.state().channels, before);
    }

    #[test]
    fn reply_sequence_numbers_increment() {
        let mut a = agent(&quiet());
        let req = Frame::new(FrameType::Status, 0, vec![]).unwrap();
        let seqs: Vec<u8> = (0..300)
            .map(|_| a.handle_frame(&req, SimTime::ZERO).seq())
            .collect();
        for w in seqs.windows(2) {
            assert_eq!(w[1], w[0].wrapping_add(1));
        }
    }

    #[test]
    fn scheduled_injection_fires_on_its_tick() {
        let mut s = quiet();
        s.injections.push(ScheduledInjection {
            channel: Channel::Co,
            value: 100.0,
            at_tick: 100,
            duration_ticks: 101,
        });
        let mut a = agent(&s);
        a.sync_to(SimTime::from_secs(99));
        assert_eq!(a.local_objective_status(), ObjectiveStatus::Nominal);
        a.sync_to(SimTime::from_secs(100));
        assert_eq!(a.local_objective_status(), ObjectiveStatus::Critical);
        a.sync_to(SimTime::from_secs(200));
        assert_eq!(a.local_objective_status(), ObjectiveStatus::Critical);
        a.sync_to(SimTime::from_secs(201));
        assert_eq!(a.local_objective_status(), ObjectiveStatus::Nominal);
    }
}
